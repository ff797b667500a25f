//! Nonparametric impulse responses for univariate series, plus the Gaussian
//! VAR closed forms.
//!
//! Both estimators simulate `S` paired paths from `y_t = y0` through the
//! estimated map `g_hat(y; eps) = Q_hat[Phi(eps) | y]`. Replication `s` draws
//! its innovations from stream `s` of the request seed; the shocked path uses
//! the same draws except `eps_{t+1} + delta` (common random numbers), so a
//! zero shock gives exactly zero.
//!
//! * **Direct**: iterate `g_hat` for `H` steps and average the differences.
//! * **Local projection**: one step through `g_hat`, then average
//!   `m_hat^(h-1)(y^(delta)_{t+1}) - m_hat^(h-1)(y_{t+1})` where `m_hat^(k)` is
//!   the kernel regression of `y_{t+k}` on `y_t` and `m^(0)` is the identity.
//!   At `h = 1` both routes are the same computation and agree bitwise.
//!
//! A replication whose path reaches a point without enough nearby data is
//! rejected (not extrapolated) from that horizon on; more than 10% rejected at
//! any horizon is an error.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{IrfCurve, Route};
use crate::error::{invalid_input, Error, Result};
use crate::kernel_lab::{KernelConfig, NwRegressor, QuantileMap};
use crate::model_zoo::VarParams;
use crate::rng::{derive_seed, standard_normals, substream};
use crate::series::{mean_and_se, std_dev, TimeSeries};

pub const DEFAULT_HORIZONS: usize = 10;
pub const DEFAULT_REPLICATIONS: usize = 10_000;
/// Largest tolerated share of rejected replications at any horizon.
pub const MAX_REJECTED_FRACTION: f64 = 0.10;

/// Circular block bootstrap of the estimator's sampling error.
///
/// Each resample draws blocks of consecutive time indices (wrapping around the
/// end) and refits the estimator on the observed pairs at those indices, with
/// the bandwidth of the original fit. The simulation inside each refit reuses
/// the request seed, so resamples differ only through the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSpec {
    pub reps: usize,
    /// Replications `S` used inside each refit.
    pub replications: usize,
    /// Defaults to `ceil(T^(1/3))`.
    pub block_len: Option<usize>,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            reps: 50,
            replications: 1_000,
            block_len: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrfRequest {
    /// Conditioning state `y_t`.
    pub y0: f64,
    /// Largest horizon `H`; values are reported for `1..=H`.
    pub horizons: usize,
    pub delta: f64,
    /// Simulated path pairs `S`.
    pub replications: usize,
    pub kernel: KernelConfig,
    pub seed: u64,
    pub route: Route,
    pub bootstrap: Option<BootstrapSpec>,
}

impl Default for IrfRequest {
    fn default() -> Self {
        Self {
            y0: 0.0,
            horizons: DEFAULT_HORIZONS,
            delta: 1.0,
            replications: DEFAULT_REPLICATIONS,
            kernel: KernelConfig::default(),
            seed: 0,
            route: Route::Direct,
            bootstrap: None,
        }
    }
}

impl IrfRequest {
    pub fn validate(&self) -> Result<()> {
        if self.horizons < 1 {
            return Err(invalid_input("horizon must be at least 1"));
        }
        if self.replications < 1 {
            return Err(invalid_input("need at least one replication"));
        }
        if !self.delta.is_finite() || !self.y0.is_finite() {
            return Err(invalid_input("shock size and initial state must be finite"));
        }
        if let Some(b) = &self.bootstrap {
            if b.reps < 2 || b.replications < 1 || b.block_len == Some(0) {
                return Err(invalid_input("bootstrap needs at least 2 resamples, 1 replication and a positive block"));
            }
        }
        Ok(())
    }
}

/// Estimated one-step map and, for local projections, the kernel regressions
/// `m_hat^(1..H-1)`.
struct Fitted {
    map: QuantileMap,
    regressions: Vec<NwRegressor>,
}

impl Fitted {
    fn from_series(y: &[f64], req: &IrfRequest, with_regressions: bool) -> Result<Self> {
        let map = QuantileMap::fit(y, &req.kernel)?;
        let regressions = if with_regressions {
            (1..req.horizons)
                .map(|k| NwRegressor::fit(y, k, &req.kernel))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self { map, regressions })
    }

    fn from_times(y: &[f64], times: &[usize], bandwidth: f64, req: &IrfRequest, with_regressions: bool) -> Result<Self> {
        let pairs = times.iter().filter(|&&t| t >= 1).map(|&t| (y[t - 1], y[t])).collect();
        let map = QuantileMap::from_pairs(pairs, bandwidth, &req.kernel)?;
        let mut regressions = Vec::new();
        if with_regressions {
            for k in 1..req.horizons {
                let pairs: Vec<(f64, f64)> = times.iter().filter(|&&t| t + k < y.len()).map(|&t| (y[t], y[t + k])).collect();
                regressions.push(NwRegressor::from_pairs(k, &pairs, bandwidth, &req.kernel)?);
            }
        }
        Ok(Self { map, regressions })
    }
}

/// Simulated baseline and shocked paths `y_{t+1..t+H}`.
#[derive(Debug, Clone)]
pub struct PathSet {
    horizons: usize,
    base: Vec<f64>,
    hit: Vec<f64>,
    eps1: Vec<f64>,
    /// First step (1-based) at which the replication was rejected, or `usize::MAX`.
    failed_at: Vec<usize>,
    /// Innovations clamped to `[-6, 6]` before use.
    pub clamped: usize,
}

impl PathSet {
    pub fn replications(&self) -> usize {
        self.eps1.len()
    }

    pub fn horizons(&self) -> usize {
        self.horizons
    }

    /// Whether replication `r` is usable at horizon `h`.
    pub fn accepted(&self, r: usize, h: usize) -> bool {
        self.failed_at[r] > h
    }

    pub fn rejected_at(&self, h: usize) -> usize {
        self.failed_at.iter().filter(|&&f| f <= h).count()
    }

    pub fn baseline(&self, r: usize, h: usize) -> f64 {
        self.base[r * self.horizons + h - 1]
    }

    pub fn shocked(&self, r: usize, h: usize) -> f64 {
        self.hit[r * self.horizons + h - 1]
    }

    /// First-step innovation of replication `r` (before the shock).
    pub fn first_innovation(&self, r: usize) -> f64 {
        self.eps1[r]
    }
}

struct Replication {
    base: Vec<f64>,
    hit: Vec<f64>,
    eps1: f64,
    failed_at: usize,
    clamped: usize,
}

fn simulate_paths(fitted: &Fitted, req: &IrfRequest, steps: usize, replications: usize) -> Result<PathSet> {
    let start = fitted.map.at(req.y0)?;
    let reps: Vec<Replication> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let eps = standard_normals(&mut substream(req.seed, r), steps);
            let mut rep = Replication {
                base: vec![f64::NAN; steps],
                hit: vec![f64::NAN; steps],
                eps1: eps[0],
                failed_at: usize::MAX,
                clamped: 0,
            };
            let b = start.g_hat(eps[0])?;
            let s = start.g_hat(eps[0] + req.delta)?;
            rep.clamped += b.clamped as usize + s.clamped as usize;
            rep.base[0] = b.estimate.value;
            rep.hit[0] = s.estimate.value;
            for k in 1..steps {
                let b = fitted.map.g_hat(rep.base[k - 1], eps[k]);
                let s = fitted.map.g_hat(rep.hit[k - 1], eps[k]);
                match (b, s) {
                    (Ok(b), Ok(s)) => {
                        rep.clamped += b.clamped as usize + s.clamped as usize;
                        rep.base[k] = b.estimate.value;
                        rep.hit[k] = s.estimate.value;
                    }
                    (Err(Error::InsufficientLocalData { .. }), _) | (_, Err(Error::InsufficientLocalData { .. })) => {
                        rep.failed_at = k + 1;
                        break;
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
            Ok(rep)
        })
        .collect::<Result<_>>()?;

    let mut out = PathSet {
        horizons: steps,
        base: Vec::with_capacity(replications * steps),
        hit: Vec::with_capacity(replications * steps),
        eps1: Vec::with_capacity(replications),
        failed_at: Vec::with_capacity(replications),
        clamped: 0,
    };
    for rep in reps {
        out.base.extend(rep.base);
        out.hit.extend(rep.hit);
        out.eps1.push(rep.eps1);
        out.failed_at.push(rep.failed_at);
        out.clamped += rep.clamped;
    }
    Ok(out)
}

/// Per-horizon summaries of per-replication values (`None` = rejected).
struct Summary {
    values: Vec<f64>,
    mc_se: Vec<f64>,
    rejected: Vec<usize>,
}

fn summarize(horizons: usize, replications: usize, value: impl Fn(usize, usize) -> Option<f64>) -> Result<Summary> {
    let mut s = Summary {
        values: Vec::with_capacity(horizons),
        mc_se: Vec::with_capacity(horizons),
        rejected: Vec::with_capacity(horizons),
    };
    let mut column = Vec::with_capacity(replications);
    for h in 1..=horizons {
        column.clear();
        column.extend((0..replications).filter_map(|r| value(r, h)));
        let rejected = replications - column.len();
        check_rejections(h, rejected, replications)?;
        let (m, se) = mean_and_se(&column);
        s.values.push(m);
        s.mc_se.push(se);
        s.rejected.push(rejected);
    }
    Ok(s)
}

fn check_rejections(horizon: usize, rejected: usize, total: usize) -> Result<()> {
    if rejected as f64 > MAX_REJECTED_FRACTION * total as f64 {
        return Err(Error::ExcessiveRejection {
            horizon,
            rejected,
            total,
        });
    }
    Ok(())
}

fn finish(req: &IrfRequest, route: Route, s: Summary) -> IrfCurve {
    let h = s.values.len();
    IrfCurve::new(
        route,
        1,
        vec![req.delta],
        vec![req.y0],
        req.replications,
        s.values,
        s.mc_se,
        s.rejected,
        vec![false; h],
    )
}

fn direct_summary(fitted: &Fitted, req: &IrfRequest, replications: usize) -> Result<Summary> {
    let paths = simulate_paths(fitted, req, req.horizons, replications)?;
    summarize(req.horizons, replications, |r, h| {
        paths.accepted(r, h).then(|| paths.shocked(r, h) - paths.baseline(r, h))
    })
}

fn lp_summary(fitted: &Fitted, req: &IrfRequest, replications: usize) -> Result<Summary> {
    let paths = simulate_paths(fitted, req, 1, replications)?;
    // m_hat^(h-1) at both first-step values, computed once per horizon
    let mut diffs: Vec<Vec<Option<f64>>> = Vec::with_capacity(req.horizons);
    diffs.push((0..replications).map(|r| Some(paths.shocked(r, 1) - paths.baseline(r, 1))).collect());
    for reg in &fitted.regressions {
        let col = (0..replications)
            .into_par_iter()
            .map(|r| match (reg.predict(paths.shocked(r, 1)), reg.predict(paths.baseline(r, 1))) {
                (Ok(a), Ok(b)) => Ok(Some(a.value - b.value)),
                (Err(Error::InsufficientLocalData { .. }), _) | (_, Err(Error::InsufficientLocalData { .. })) => Ok(None),
                (Err(e), _) | (_, Err(e)) => Err(e),
            })
            .collect::<Result<_>>()?;
        diffs.push(col);
    }
    summarize(req.horizons, replications, |r, h| diffs[h - 1][r])
}

fn prepare(series: &TimeSeries, req: &IrfRequest) -> Result<Vec<f64>> {
    req.validate()?;
    Ok(series.values_1d()?.to_vec())
}

/// Direct estimator: average difference of paired paths through `g_hat`.
pub fn irf_direct(series: &TimeSeries, req: &IrfRequest) -> Result<IrfCurve> {
    let y = prepare(series, req)?;
    let fitted = Fitted::from_series(&y, req, false)?;
    let mut curve = finish(req, Route::Direct, direct_summary(&fitted, req, req.replications)?);
    if let Some(spec) = &req.bootstrap {
        curve.sampling_se = Some(bootstrap_se(&y, req, spec, false, |f, s| {
            Ok(direct_summary(f, req, s)?.values)
        })?);
    }
    Ok(curve)
}

/// Local-projection estimator: one step through `g_hat`, then kernel regressions.
pub fn irf_lp(series: &TimeSeries, req: &IrfRequest) -> Result<IrfCurve> {
    let y = prepare(series, req)?;
    let fitted = Fitted::from_series(&y, req, true)?;
    let mut curve = finish(req, Route::LocalProjection, lp_summary(&fitted, req, req.replications)?);
    if let Some(spec) = &req.bootstrap {
        curve.sampling_se = Some(bootstrap_se(&y, req, spec, true, |f, s| Ok(lp_summary(f, req, s)?.values))?);
    }
    Ok(curve)
}

/// Dispatches on `req.route`. The oracle route needs a known model; see
/// [`crate::model_zoo::true_irf`].
pub fn estimate_irf(series: &TimeSeries, req: &IrfRequest) -> Result<IrfCurve> {
    match req.route {
        Route::Direct => irf_direct(series, req),
        Route::LocalProjection => irf_lp(series, req),
        Route::Oracle => Err(invalid_input("the oracle route needs a model, not a series")),
    }
}

fn bootstrap_se(
    y: &[f64],
    req: &IrfRequest,
    spec: &BootstrapSpec,
    with_regressions: bool,
    estimate: impl Fn(&Fitted, usize) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let t = y.len();
    let bandwidth = req.kernel.resolve_bandwidth(y)?;
    let block = spec.block_len.unwrap_or_else(|| (t as f64).cbrt().ceil() as usize).min(t);
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(spec.reps);
    let mut failed = 0;
    for b in 0..spec.reps as u64 {
        let mut rng = substream(derive_seed(spec.seed, 0x0b00), b);
        let mut times = Vec::with_capacity(t + block);
        while times.len() < t {
            let start = rng.random_range(0..t);
            times.extend((0..block).map(|i| (start + i) % t));
        }
        times.truncate(t);
        let outcome = Fitted::from_times(y, &times, bandwidth, req, with_regressions).and_then(|f| estimate(&f, spec.replications));
        match outcome {
            Ok(v) => draws.push(v),
            Err(Error::InsufficientLocalData { .. } | Error::ExcessiveRejection { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if draws.len() < 2 || failed as f64 > MAX_REJECTED_FRACTION * spec.reps as f64 {
        return Err(invalid_input(format!(
            "bootstrap failed: {failed} of {} resamples could not be estimated",
            spec.reps
        )));
    }
    Ok((0..req.horizons)
        .map(|k| std_dev(&draws.iter().map(|d| d[k]).collect::<Vec<_>>()))
        .collect())
}

/// Function of the state whose response is measured.
#[derive(Clone)]
pub enum Transform {
    Identity,
    /// `1{y < threshold}`: the response of a predictive probability.
    Indicator { threshold: f64 },
    /// Difference of the empirical `level`-quantiles of the shocked and
    /// baseline predictive distributions.
    Quantile { level: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => write!(f, "Identity"),
            Transform::Indicator { threshold } => write!(f, "Indicator({threshold})"),
            Transform::Quantile { level } => write!(f, "Quantile({level})"),
            Transform::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Number of batches used for the Monte Carlo error of quantile responses.
const QUANTILE_BATCHES: usize = 10;

/// Direct-route response of `a(y_{t+h})` for the given transform.
pub fn irf_transformed(series: &TimeSeries, req: &IrfRequest, transform: &Transform) -> Result<IrfCurve> {
    let y = prepare(series, req)?;
    let fitted = Fitted::from_series(&y, req, false)?;
    let paths = simulate_paths(&fitted, req, req.horizons, req.replications)?;
    let s = req.replications;
    let summary = match transform {
        Transform::Identity => summarize(req.horizons, s, |r, h| {
            paths.accepted(r, h).then(|| paths.shocked(r, h) - paths.baseline(r, h))
        })?,
        Transform::Indicator { threshold } => {
            let ind = |v: f64| if v < *threshold { 1.0 } else { 0.0 };
            summarize(req.horizons, s, |r, h| {
                paths.accepted(r, h).then(|| ind(paths.shocked(r, h)) - ind(paths.baseline(r, h)))
            })?
        }
        Transform::Custom(a) => summarize(req.horizons, s, |r, h| {
            paths.accepted(r, h).then(|| a(paths.shocked(r, h)) - a(paths.baseline(r, h)))
        })?,
        Transform::Quantile { level } => quantile_summary(&paths, *level)?,
    };
    for (h, v) in summary.values.iter().enumerate() {
        if !v.is_finite() {
            return Err(invalid_input(format!("transformed response is not finite at horizon {}", h + 1)));
        }
    }
    Ok(finish(req, Route::Direct, summary))
}

/// Linear-interpolation sample quantile of sorted data.
fn sample_quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantile_summary(paths: &PathSet, level: f64) -> Result<Summary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid_input(format!("quantile level must be in (0, 1), got {level}")));
    }
    let n = paths.replications();
    if n < 2 * QUANTILE_BATCHES {
        return Err(invalid_input(format!("quantile responses need at least {} replications", 2 * QUANTILE_BATCHES)));
    }
    let diff = |reps: &[usize], h: usize| {
        let mut a: Vec<f64> = reps.iter().map(|&r| paths.shocked(r, h)).collect();
        let mut b: Vec<f64> = reps.iter().map(|&r| paths.baseline(r, h)).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        sample_quantile(&a, level) - sample_quantile(&b, level)
    };
    let mut s = Summary {
        values: vec![],
        mc_se: vec![],
        rejected: vec![],
    };
    for h in 1..=paths.horizons() {
        let ok: Vec<usize> = (0..n).filter(|&r| paths.accepted(r, h)).collect();
        check_rejections(h, n - ok.len(), n)?;
        let batches: Vec<f64> = ok.chunks(ok.len().div_ceil(QUANTILE_BATCHES)).map(|c| diff(c, h)).collect();
        s.values.push(diff(&ok, h));
        s.mc_se.push(std_dev(&batches) / (batches.len() as f64).sqrt());
        s.rejected.push(n - ok.len());
    }
    Ok(s)
}

/// Response of the product `y_{t+h} y_{t+h-1}` (with `y_t = y0` at `h = 1`).
pub fn irf_dynamic(series: &TimeSeries, req: &IrfRequest) -> Result<IrfCurve> {
    if req.horizons < 2 {
        return Err(invalid_input("dynamic responses need at least 2 horizons"));
    }
    let y = prepare(series, req)?;
    let fitted = Fitted::from_series(&y, req, false)?;
    let paths = simulate_paths(&fitted, req, req.horizons, req.replications)?;
    let summary = summarize(req.horizons, req.replications, |r, h| {
        paths.accepted(r, h).then(|| {
            let (pb, ph) = if h == 1 {
                (req.y0, req.y0)
            } else {
                (paths.baseline(r, h - 1), paths.shocked(r, h - 1))
            };
            paths.shocked(r, h) * ph - paths.baseline(r, h) * pb
        })
    })?;
    Ok(finish(req, Route::Direct, summary))
}

/// Mean squared difference of the paired paths (nonnegative by construction).
pub fn irf_joint(series: &TimeSeries, req: &IrfRequest) -> Result<IrfCurve> {
    let y = prepare(series, req)?;
    let fitted = Fitted::from_series(&y, req, false)?;
    let paths = simulate_paths(&fitted, req, req.horizons, req.replications)?;
    let summary = summarize(req.horizons, req.replications, |r, h| {
        paths.accepted(r, h).then(|| (paths.shocked(r, h) - paths.baseline(r, h)).powi(2))
    })?;
    Ok(finish(req, Route::Direct, summary))
}

/// Simulated direct-route paths, for decompositions and custom summaries.
pub fn direct_paths(series: &TimeSeries, req: &IrfRequest) -> Result<PathSet> {
    let y = prepare(series, req)?;
    let fitted = Fitted::from_series(&y, req, false)?;
    simulate_paths(&fitted, req, req.horizons, req.replications)
}

/// Inputs for a Hermite decomposition at horizon `h` on the request's route:
/// the baseline outputs (`y_hat_{t+h}` for the direct route,
/// `m_hat^(h-1)(y_hat_{t+1})` for local projections), the first-step
/// innovations that produced them, and the route's IRF estimate at `h` from
/// the same draws.
pub fn decomposition_inputs(series: &TimeSeries, req: &IrfRequest, h: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if h < 1 || h > req.horizons {
        return Err(invalid_input(format!("horizon {h} outside 1..={}", req.horizons)));
    }
    let y = prepare(series, req)?;
    let s = req.replications;
    let (outputs, shocked, eps): (Vec<f64>, Vec<f64>, Vec<f64>) = match req.route {
        Route::Direct => {
            let fitted = Fitted::from_series(&y, req, false)?;
            let paths = simulate_paths(&fitted, req, h, s)?;
            check_rejections(h, paths.rejected_at(h), s)?;
            let ok: Vec<usize> = (0..s).filter(|&r| paths.accepted(r, h)).collect();
            (
                ok.iter().map(|&r| paths.baseline(r, h)).collect(),
                ok.iter().map(|&r| paths.shocked(r, h)).collect(),
                ok.iter().map(|&r| paths.first_innovation(r)).collect(),
            )
        }
        Route::LocalProjection => {
            let fitted = Fitted::from_series(&y, &IrfRequest { horizons: h, ..req.clone() }, true)?;
            let paths = simulate_paths(&fitted, req, 1, s)?;
            let mut out = (vec![], vec![], vec![]);
            let mut rejected = 0;
            for r in 0..s {
                let (b, a) = (paths.baseline(r, 1), paths.shocked(r, 1));
                let pair = if h == 1 {
                    Ok((b, a))
                } else {
                    let reg = &fitted.regressions[h - 2];
                    reg.predict(b).and_then(|pb| Ok((pb.value, reg.predict(a)?.value)))
                };
                match pair {
                    Ok((pb, pa)) => {
                        out.0.push(pb);
                        out.1.push(pa);
                        out.2.push(paths.first_innovation(r));
                    }
                    Err(Error::InsufficientLocalData { .. }) => rejected += 1,
                    Err(e) => return Err(e),
                }
            }
            check_rejections(h, rejected, s)?;
            out
        }
        Route::Oracle => return Err(invalid_input("the oracle route has no simulated outputs")),
    };
    let diffs: Vec<f64> = shocked.iter().zip(&outputs).map(|(a, b)| a - b).collect();
    let irf = mean_and_se(&diffs).0;
    Ok((outputs, eps, irf))
}

/// `A^h D delta`.
pub fn var_irf(params: &VarParams, delta: &[f64], h: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if delta.len() != params.dim() {
        return Err(invalid_input(format!(
            "shock has length {}, system dimension is {}",
            delta.len(),
            params.dim()
        )));
    }
    let mut v = &params.d * DVector::from_column_slice(delta);
    for _ in 0..h {
        v = &params.a * v;
    }
    Ok(v.as_slice().to_vec())
}

/// Largest response `a' A^h D delta` over unit-norm shocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxIrf {
    /// `|| D' A'^h a ||`.
    pub value: f64,
    /// The maximizing unit shock; `None` when the response is identically zero.
    pub delta_star: Option<Vec<f64>>,
    pub degenerate: bool,
}

pub fn var_max_irf(params: &VarParams, a: &[f64], h: usize) -> Result<MaxIrf> {
    params.validate()?;
    if a.len() != params.dim() {
        return Err(invalid_input("direction has the wrong dimension"));
    }
    if a.iter().all(|&v| v == 0.0) || a.iter().any(|v| !v.is_finite()) {
        return Err(invalid_input("direction must be finite and nonzero"));
    }
    let mut v = DVector::from_column_slice(a);
    let at = params.a.transpose();
    for _ in 0..h {
        v = &at * v;
    }
    let v = params.d.transpose() * v;
    let value = v.norm();
    if value == 0.0 {
        return Ok(MaxIrf {
            value: 0.0,
            delta_star: None,
            degenerate: true,
        });
    }
    Ok(MaxIrf {
        value,
        delta_star: Some((v / value).as_slice().to_vec()),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{simulate, ModelSpec};
    use crate::stats::normal_cdf;
    use nalgebra::DMatrix;

    fn ar_sample(t: usize, seed: u64) -> TimeSeries {
        simulate(&ModelSpec::gaussian_ar1(0.5, 1.0), t, &[0.0], seed).unwrap()
    }

    fn req(h: usize, s: usize) -> IrfRequest {
        IrfRequest {
            horizons: h,
            replications: s,
            ..IrfRequest::default()
        }
    }

    #[test]
    fn routes_agree_bitwise_at_horizon_one() {
        let y = ar_sample(800, 1);
        let r = IrfRequest { delta: 0.7, y0: 0.3, ..req(3, 300) };
        let d = irf_direct(&y, &r).unwrap();
        let l = irf_lp(&y, &r).unwrap();
        assert_eq!(d.at(1)[0].to_bits(), l.at(1)[0].to_bits());
        assert_eq!(d.se_at(1)[0].to_bits(), l.se_at(1)[0].to_bits());
    }

    #[test]
    fn null_shock_is_exactly_zero_everywhere() {
        let y = ar_sample(500, 2);
        let r = IrfRequest { delta: 0.0, ..req(4, 200) };
        for c in [
            irf_direct(&y, &r).unwrap(),
            irf_lp(&y, &r).unwrap(),
            irf_dynamic(&y, &r).unwrap(),
            irf_joint(&y, &r).unwrap(),
            irf_transformed(&y, &r, &Transform::Indicator { threshold: 0.0 }).unwrap(),
            irf_transformed(&y, &r, &Transform::Quantile { level: 0.3 }).unwrap(),
        ] {
            assert!(c.values().iter().all(|&v| v == 0.0), "{:?}", c.values());
        }
    }

    #[test]
    fn identity_transform_reduces_to_direct() {
        let y = ar_sample(500, 3);
        let r = req(3, 300);
        let d = irf_direct(&y, &r).unwrap();
        let t = irf_transformed(&y, &r, &Transform::Identity).unwrap();
        assert_eq!(d.values(), t.values());
        let c = irf_transformed(&y, &r, &Transform::Custom(Arc::new(|v| v))).unwrap();
        assert_eq!(d.values(), c.values());
    }

    #[test]
    fn gaussian_ar_curve_decays_geometrically() {
        let y = ar_sample(5000, 4);
        let r = req(4, 2000);
        let d = irf_direct(&y, &r).unwrap();
        let l = irf_lp(&y, &r).unwrap();
        for h in 1..=4 {
            let truth = 0.5f64.powi(h as i32 - 1);
            // generous: sampling error of a T=5000 kernel estimate is a few percent
            assert!((d.at(h)[0] - truth).abs() < 0.12, "direct h={h}: {}", d.at(h)[0]);
            assert!((l.at(h)[0] - truth).abs() < 0.12, "lp h={h}: {}", l.at(h)[0]);
        }
    }

    #[test]
    fn indicator_response_matches_normal_shift() {
        let y = ar_sample(20_000, 5);
        let r = IrfRequest { y0: 0.0, ..req(1, 4000) };
        let c = irf_transformed(&y, &r, &Transform::Indicator { threshold: 0.0 }).unwrap();
        let truth = normal_cdf(-1.0) - normal_cdf(0.0);
        assert!((truth + 0.3413).abs() < 1e-4);
        assert!((c.at(1)[0] - truth).abs() < 0.04, "{}", c.at(1)[0]);
        assert!(c.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn joint_response_is_nonnegative() {
        let y = simulate(&ModelSpec::dar1(0.5, 1.0, 0.5), 1000, &[0.0], 6).unwrap();
        let c = irf_joint(&y, &IrfRequest { delta: -0.8, ..req(5, 300) }).unwrap();
        assert!(c.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn far_initial_state_is_refused() {
        let y = ar_sample(500, 7);
        let err = irf_direct(&y, &IrfRequest { y0: 40.0, ..req(2, 50) }).unwrap_err();
        assert_eq!(err.kind(), "insufficient_local_data");
    }

    #[test]
    fn rejections_are_counted_per_horizon() {
        // a large shock pushes shocked paths into the sparse tail under a tight bandwidth
        let y = ar_sample(300, 8);
        let cfg = KernelConfig {
            kernel: crate::kernel_lab::Kernel::Epanechnikov,
            bandwidth: crate::kernel_lab::Bandwidth::Fixed(0.15),
            min_weight_sum: None,
        };
        let r = IrfRequest { delta: 6.0, kernel: cfg, ..req(3, 200) };
        match irf_direct(&y, &r) {
            Ok(c) => assert!(c.rejected.windows(2).all(|w| w[0] <= w[1])),
            Err(e) => assert_eq!(e.kind(), "excessive_rejection"),
        }
        let paths = direct_paths(&y, &IrfRequest { delta: 0.5, ..r }).unwrap();
        assert_eq!(paths.rejected_at(1), 0);
        assert!(paths.rejected_at(2) <= paths.rejected_at(3));
    }

    #[test]
    fn bootstrap_attaches_sampling_error() {
        let y = ar_sample(600, 9);
        let r = IrfRequest {
            bootstrap: Some(BootstrapSpec {
                reps: 8,
                replications: 100,
                ..BootstrapSpec::default()
            }),
            ..req(2, 200)
        };
        let c = irf_direct(&y, &r).unwrap();
        let boot = c.sampling_se.clone().unwrap();
        assert_eq!(boot.len(), 2);
        assert!(boot.iter().all(|&b| b > 0.0 && b.is_finite()));
        assert!(c.combined_se().iter().zip(c.mc_se()).all(|(a, b)| a >= b));
        let again = irf_direct(&y, &r).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn decomposition_inputs_reproduce_the_curve() {
        let y = ar_sample(800, 10);
        let r = req(2, 300);
        let curve = irf_direct(&y, &r).unwrap();
        let (_, _, irf) = decomposition_inputs(&y, &r, 2).unwrap();
        assert!((irf - curve.at(2)[0]).abs() < 1e-12);
        let rl = IrfRequest { route: Route::LocalProjection, ..r };
        let lp = irf_lp(&y, &rl).unwrap();
        let (_, eps, irf) = decomposition_inputs(&y, &rl, 2).unwrap();
        assert!((irf - lp.at(2)[0]).abs() < 1e-12);
        assert_eq!(eps.len(), 300 - lp.rejected[1]);
    }

    #[test]
    fn var_closed_forms() {
        let p = VarParams::new(DMatrix::identity(2, 2) * 0.5, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(var_irf(&p, &[1.0, 0.0], 3).unwrap(), vec![0.125, 0.0]);
        assert!(var_irf(&p, &[1.0], 3).is_err());
        let m = var_max_irf(&p, &[1.0, 0.0], 2).unwrap();
        assert_eq!(m.value, 0.25);
        assert_eq!(m.delta_star, Some(vec![1.0, 0.0]));
        assert!(var_max_irf(&p, &[0.0, 0.0], 2).is_err());
        let nil = VarParams::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(var_irf(&nil, &[1.0, 1.0], 2).unwrap(), vec![0.0, 0.0]);
        let z = var_max_irf(&nil, &[1.0, 0.0], 2).unwrap();
        assert!(z.degenerate && z.delta_star.is_none());
    }

    #[test]
    fn max_irf_is_rotation_invariant() {
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.4]);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]);
        let p1 = VarParams::new(a.clone(), d.clone()).unwrap();
        let p2 = VarParams::new(a, d * q).unwrap();
        let v1 = var_max_irf(&p1, &[1.0, -1.0], 3).unwrap().value;
        let v2 = var_max_irf(&p2, &[1.0, -1.0], 3).unwrap().value;
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn request_json_defaults() {
        let r: IrfRequest = serde_json::from_str(r#"{"y0": 0.2, "delta": 0.5, "route": "local_projection"}"#).unwrap();
        assert_eq!(r.horizons, DEFAULT_HORIZONS);
        assert_eq!(r.replications, DEFAULT_REPLICATIONS);
        assert_eq!(r.route, Route::LocalProjection);
        assert!(IrfRequest { horizons: 0, ..r.clone() }.validate().is_err());
        assert!(IrfRequest { delta: f64::INFINITY, ..r }.validate().is_err());
    }
}
