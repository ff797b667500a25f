//! Data-generating processes with a known one-step map `y_t = g(y_{t-1}; eps_t)`.
//!
//! These models are the ground truth for every estimator in the crate: they
//! simulate trajectories, expose the exact transition, and compute the true
//! impulse response (in closed form when one exists, by paired Monte Carlo
//! otherwise).
//!
//! Draw order is fixed: one standard-normal vector per time step, consumed in
//! time order, components in index order.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{IrfCurve, Route};
use crate::error::{ensure_finite, invalid_input, Error, Result};
use crate::rng::{standard_normals, substream};
use crate::series::{mean_and_se, TimeSeries};
use crate::stats::normal_cdf;

/// Draws used when a DAR(1) model is validated against the Lyapunov condition.
pub const LYAPUNOV_CHECK_DRAWS: usize = 200_000;
/// Fixed seed for the validation draw, so validation is deterministic.
pub const LYAPUNOV_CHECK_SEED: u64 = 0x4c59_4150;

/// Double autoregression `y_t = rho y_{t-1} + sqrt(alpha + beta y_{t-1}^2) eps_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarParams {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DarParams {
    pub fn new(rho: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { rho, alpha, beta };
        p.check_ranges()?;
        Ok(p)
    }

    fn check_ranges(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidModel("DAR(1) parameters must be finite".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidModel(format!("DAR(1) needs alpha > 0, got {}", self.alpha)));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidModel(format!("DAR(1) needs beta >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// Conditional standard deviation at `y`.
    pub fn scale(&self, y: f64) -> f64 {
        (self.alpha + self.beta * y * y).sqrt()
    }

    pub fn transition(&self, y: f64, eps: f64) -> f64 {
        self.rho * y + self.scale(y) * eps
    }
}

/// Gaussian VAR(1) `y_t = A y_{t-1} + D eps_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VarParamsRepr", into = "VarParamsRepr")]
pub struct VarParams {
    pub a: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarParamsRepr {
    a: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(invalid_input(format!("{name} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<VarParamsRepr> for VarParams {
    type Error = Error;

    fn try_from(r: VarParamsRepr) -> Result<Self> {
        Ok(Self {
            a: matrix_from_rows(&r.a, "A")?,
            d: matrix_from_rows(&r.d, "D")?,
        })
    }
}

impl From<VarParams> for VarParamsRepr {
    fn from(p: VarParams) -> Self {
        Self {
            a: matrix_rows(&p.a),
            d: matrix_rows(&p.d),
        }
    }
}

impl VarParams {
    pub fn new(a: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let p = Self { a, d };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if !self.a.is_square() || self.d.shape() != (n, n) || n == 0 {
            return Err(Error::InvalidModel("A and D must be square of equal size".into()));
        }
        if self.a.iter().chain(self.d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("VAR(1) matrices must be finite".into()));
        }
        let radius = self.spectral_radius();
        if radius >= 1.0 {
            return Err(Error::InvalidModel(format!(
                "VAR(1) is not stable: spectral radius {radius}"
            )));
        }
        if self.d.determinant().abs() <= f64::EPSILON * self.d.norm().powi(n as i32) {
            return Err(Error::InvalidModel("VAR(1) loading matrix D is singular".into()));
        }
        Ok(())
    }
}

pub type DriftFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScaleFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Conditionally Gaussian model `y_t = m(y_{t-1}) + D(y_{t-1}) eps_t` with
/// caller-supplied drift and scale. The scale is checked where it is evaluated.
#[derive(Clone)]
pub struct CondGaussian {
    pub dim: usize,
    pub drift: DriftFn,
    pub scale: ScaleFn,
}

impl fmt::Debug for CondGaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CondGaussian").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl CondGaussian {
    pub fn new(
        dim: usize,
        drift: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        scale: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            drift: Arc::new(drift),
            scale: Arc::new(scale),
        }
    }

    fn drift_at(&self, y: &[f64]) -> Result<Vec<f64>> {
        let m = (self.drift)(y);
        if m.len() != self.dim || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("drift is not a finite {}-vector at {y:?}", self.dim)));
        }
        Ok(m)
    }

    fn scale_at(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let d = (self.scale)(y);
        if d.shape() != (self.dim, self.dim) || d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("scale is not a finite {0}x{0} matrix at {y:?}", self.dim)));
        }
        let ok = if self.dim == 1 {
            d[(0, 0)] > 0.0
        } else {
            d.determinant() != 0.0
        };
        if !ok {
            return Err(Error::InvalidModel(format!("scale is degenerate at {y:?}")));
        }
        Ok(d)
    }
}

/// A data-generating process.
///
/// Serializable variants use a `"variant"` tag, e.g.
/// `{"variant": "dar1", "rho": 0.5, "alpha": 1.0, "beta": 0.5}`. The
/// conditionally Gaussian variant holds closures and cannot be serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum ModelSpec {
    #[serde(rename = "dar1")]
    Dar1(DarParams),
    #[serde(rename = "gaussian_ar1")]
    GaussianAr1 { rho: f64, sigma: f64 },
    #[serde(rename = "gaussian_var1")]
    GaussianVar1(VarParams),
    #[serde(skip)]
    CondGaussian(CondGaussian),
}

impl ModelSpec {
    pub fn dar1(rho: f64, alpha: f64, beta: f64) -> Self {
        ModelSpec::Dar1(DarParams { rho, alpha, beta })
    }

    pub fn gaussian_ar1(rho: f64, sigma: f64) -> Self {
        ModelSpec::GaussianAr1 { rho, sigma }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Dar1(_) | ModelSpec::GaussianAr1 { .. } => 1,
            ModelSpec::GaussianVar1(p) => p.dim(),
            ModelSpec::CondGaussian(c) => c.dim,
        }
    }

    /// Checks the variant's invariants. For DAR(1) this includes a Monte Carlo
    /// Lyapunov check; the model is refused when the exponent is nonnegative
    /// at three standard errors.
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Dar1(p) => {
                p.check_ranges()?;
                let lyap = lyapunov_exponent(p, LYAPUNOV_CHECK_DRAWS, LYAPUNOV_CHECK_SEED)?;
                if lyap.value - 3.0 * lyap.std_error >= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "DAR(1) fails the stationarity condition: Lyapunov exponent {:.4} (se {:.4})",
                        lyap.value, lyap.std_error
                    )));
                }
                Ok(())
            }
            ModelSpec::GaussianAr1 { rho, sigma } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return Err(Error::InvalidModel(format!("AR(1) needs |rho| < 1, got {rho}")));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidModel(format!("AR(1) needs sigma > 0, got {sigma}")));
                }
                Ok(())
            }
            ModelSpec::GaussianVar1(p) => p.validate(),
            ModelSpec::CondGaussian(c) => {
                if c.dim == 0 {
                    return Err(Error::InvalidModel("dimension must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Conditional CDF `P(y_t <= z | y_{t-1} = y)` for univariate models.
    pub fn transition_cdf(&self, y: f64, z: f64) -> Result<f64> {
        let (m, s) = match self {
            ModelSpec::Dar1(p) => (p.rho * y, p.scale(y)),
            ModelSpec::GaussianAr1 { rho, sigma } => (rho * y, *sigma),
            ModelSpec::CondGaussian(c) if c.dim == 1 => (c.drift_at(&[y])?[0], c.scale_at(&[y])?[(0, 0)]),
            _ => return Err(invalid_input("transition CDF is only available for univariate models")),
        };
        Ok(normal_cdf((z - m) / s))
    }
}

/// Standard-normal innovations for `H` steps of an `n`-dimensional model.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSequence {
    draws: Vec<f64>,
    dim: usize,
    pub seed: Option<u64>,
}

impl ShockSequence {
    /// Draws `steps` innovation vectors from stream 0 of `seed`.
    pub fn generate(steps: usize, dim: usize, seed: u64) -> Self {
        let draws = standard_normals(&mut substream(seed, 0), steps * dim);
        Self {
            draws,
            dim,
            seed: Some(seed),
        }
    }

    /// Wraps explicit draws, `steps x dim` row-major.
    pub fn from_draws(draws: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || draws.len() % dim != 0 {
            return Err(invalid_input("shock draws do not form whole vectors"));
        }
        ensure_finite(&draws, "shock draws")?;
        Ok(Self { draws, dim, seed: None })
    }

    pub fn steps(&self) -> usize {
        self.draws.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Innovation for step `k` (0-based, so `step(0)` is `eps_{t+1}`).
    pub fn step(&self, k: usize) -> &[f64] {
        &self.draws[k * self.dim..(k + 1) * self.dim]
    }

    /// Returns a copy with `delta` added to the first innovation.
    pub fn shocked(&self, delta: &[f64]) -> Self {
        let mut out = self.clone();
        for (e, d) in out.draws[..self.dim].iter_mut().zip(delta) {
            *e += d;
        }
        out
    }
}

fn check_dims(model: &ModelSpec, v: &[f64], what: &str) -> Result<()> {
    if v.len() != model.dim() {
        return Err(invalid_input(format!(
            "{what} has length {}, model dimension is {}",
            v.len(),
            model.dim()
        )));
    }
    ensure_finite(v, what)
}

fn transition_unchecked(model: &ModelSpec, y: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    Ok(match model {
        ModelSpec::Dar1(p) => vec![p.transition(y[0], eps[0])],
        ModelSpec::GaussianAr1 { rho, sigma } => vec![rho * y[0] + sigma * eps[0]],
        ModelSpec::GaussianVar1(p) => {
            let y = DVector::from_column_slice(y);
            let e = DVector::from_column_slice(eps);
            (&p.a * y + &p.d * e).as_slice().to_vec()
        }
        ModelSpec::CondGaussian(c) => {
            let m = c.drift_at(y)?;
            let d = c.scale_at(y)?;
            let e = DVector::from_column_slice(eps);
            (DVector::from_vec(m) + d * e).as_slice().to_vec()
        }
    })
}

/// One step of the model: `g(y_prev; eps)`.
pub fn transition_g(model: &ModelSpec, y_prev: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    check_dims(model, y_prev, "state")?;
    check_dims(model, eps, "shock")?;
    transition_unchecked(model, y_prev, eps)
}

/// Path `y_{t+1}, ..., y_{t+H}` obtained by composing `g` with the given shocks.
pub fn iterate_g(model: &ModelSpec, y0: &[f64], shocks: &ShockSequence) -> Result<Vec<Vec<f64>>> {
    if shocks.steps() == 0 {
        return Err(invalid_input("empty shock sequence"));
    }
    check_dims(model, y0, "initial state")?;
    if shocks.dim() != model.dim() {
        return Err(invalid_input("shock dimension does not match the model"));
    }
    let mut path = Vec::with_capacity(shocks.steps());
    let mut y = y0.to_vec();
    for k in 0..shocks.steps() {
        y = transition_unchecked(model, &y, shocks.step(k))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("path diverged at step {}", k + 1)));
        }
        path.push(y.clone());
    }
    Ok(path)
}

/// Simulates `t_len` observations starting from `y0` (which is not included).
pub fn simulate(model: &ModelSpec, t_len: usize, y0: &[f64], seed: u64) -> Result<TimeSeries> {
    simulate_with_burn_in(model, t_len, y0, seed, 0)
}

/// As [`simulate`], discarding the first `burn_in` steps.
pub fn simulate_with_burn_in(
    model: &ModelSpec,
    t_len: usize,
    y0: &[f64],
    seed: u64,
    burn_in: usize,
) -> Result<TimeSeries> {
    model.validate()?;
    if t_len < 2 {
        return Err(invalid_input("need at least 2 observations"));
    }
    check_dims(model, y0, "initial state")?;
    let n = model.dim();
    let mut rng = substream(seed, 0);
    let mut y = y0.to_vec();
    let mut values = Vec::with_capacity(t_len * n);
    for step in 0..burn_in + t_len {
        let eps = standard_normals(&mut rng, n);
        y = transition_unchecked(model, &y, &eps)?;
        if step >= burn_in {
            values.extend_from_slice(&y);
        }
    }
    TimeSeries::new(values, n, format!("simulated seed={seed}"))
}

/// Monte Carlo estimate of the DAR(1) Lyapunov exponent `E log|rho + sqrt(beta) eps|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub std_error: f64,
}

pub fn lyapunov_exponent(params: &DarParams, draws: usize, seed: u64) -> Result<LyapunovEstimate> {
    params.check_ranges()?;
    if draws < 10_000 {
        return Err(invalid_input("Lyapunov estimate needs at least 10^4 draws"));
    }
    if params.beta == 0.0 {
        return Ok(LyapunovEstimate {
            value: params.rho.abs().ln(),
            std_error: 0.0,
        });
    }
    let sb = params.beta.sqrt();
    let terms: Vec<f64> = standard_normals(&mut substream(seed, 0), draws)
        .into_iter()
        .map(|e| (params.rho + sb * e).abs().ln())
        .collect();
    let (value, std_error) = mean_and_se(&terms);
    Ok(LyapunovEstimate { value, std_error })
}

/// True impulse response `E[y^(delta)_{t+h} - y_{t+h} | y_t = y0]` for `h = 1..=horizons`.
///
/// Uses exact expressions where the model has one and paired Monte Carlo
/// (common random numbers, `replications` paths) otherwise:
///
/// * Gaussian AR(1): `rho^(h-1) sigma delta`
/// * Gaussian VAR(1): `A^(h-1) D delta`
/// * DAR(1): `rho^(h-1) delta sqrt(alpha + beta y0^2)` (its conditional mean is linear,
///   so only the first step's scale matters)
pub fn true_irf(
    model: &ModelSpec,
    y0: &[f64],
    horizons: usize,
    delta: &[f64],
    replications: usize,
    seed: u64,
) -> Result<IrfCurve> {
    check_irf_args(model, y0, horizons, delta, replications)?;
    let closed: Option<Vec<f64>> = match model {
        ModelSpec::GaussianAr1 { rho, sigma } => {
            Some((1..=horizons).map(|h| rho.powi(h as i32 - 1) * sigma * delta[0]).collect())
        }
        ModelSpec::Dar1(p) => {
            let impact = delta[0] * p.scale(y0[0]);
            Some((1..=horizons).map(|h| p.rho.powi(h as i32 - 1) * impact).collect())
        }
        ModelSpec::GaussianVar1(p) => {
            let mut v = &p.d * DVector::from_column_slice(delta);
            let mut out = Vec::with_capacity(horizons * p.dim());
            for _ in 0..horizons {
                out.extend_from_slice(v.as_slice());
                v = &p.a * v;
            }
            Some(out)
        }
        ModelSpec::CondGaussian(_) => None,
    };
    match closed {
        Some(values) => {
            let n = model.dim();
            Ok(IrfCurve::new(
                Route::Oracle,
                n,
                delta.to_vec(),
                y0.to_vec(),
                replications,
                values,
                vec![0.0; horizons * n],
                vec![0; horizons],
                vec![true; horizons],
            ))
        }
        None => true_irf_monte_carlo(model, y0, horizons, delta, replications, seed),
    }
}

fn check_irf_args(model: &ModelSpec, y0: &[f64], horizons: usize, delta: &[f64], replications: usize) -> Result<()> {
    model.validate()?;
    if horizons < 1 {
        return Err(invalid_input("horizon must be at least 1"));
    }
    if replications < 1 {
        return Err(invalid_input("need at least one replication"));
    }
    check_dims(model, y0, "initial state")?;
    check_dims(model, delta, "shock")
}

/// Paired Monte Carlo version of [`true_irf`], regardless of closed forms.
///
/// Replication `r` draws its innovations from stream `r` of `seed`; shocked
/// and baseline paths share them except for `delta` added to the first.
pub fn true_irf_monte_carlo(
    model: &ModelSpec,
    y0: &[f64],
    horizons: usize,
    delta: &[f64],
    replications: usize,
    seed: u64,
) -> Result<IrfCurve> {
    check_irf_args(model, y0, horizons, delta, replications)?;
    let n = model.dim();
    let diffs: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let shocks = ShockSequence::from_draws(standard_normals(&mut rng, horizons * n), n)?;
            let base = iterate_g(model, y0, &shocks)?;
            let hit = iterate_g(model, y0, &shocks.shocked(delta))?;
            Ok(hit
                .iter()
                .zip(&base)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(horizons * n);
    let mut ses = Vec::with_capacity(horizons * n);
    let mut column = vec![0.0; replications];
    for k in 0..horizons * n {
        for (c, d) in column.iter_mut().zip(&diffs) {
            *c = d[k];
        }
        let (m, se) = mean_and_se(&column);
        values.push(m);
        ses.push(se);
    }
    Ok(IrfCurve::new(
        Route::Oracle,
        n,
        delta.to_vec(),
        y0.to_vec(),
        replications,
        values,
        ses,
        vec![0; horizons],
        vec![false; horizons],
    ))
}
