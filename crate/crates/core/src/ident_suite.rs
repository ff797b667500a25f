//! Identification tools: recovering a bivariate linear mixing from
//! autocovariances, and a moment test of the first-order Markov property.
//!
//! # Mixing recovery
//!
//! If `y_t = A x_t` with `A = [[1, a12], [a21, 1]]` and independent sources
//! with autocovariances `g1(h)`, `g2(h)`, the observable autocovariances satisfy
//!
//! ```text
//! g12(h) = p g11(h) + q g22(h),   p = a21 / (1 + a12 a21),  q = a12 / (1 + a12 a21)
//! ```
//!
//! so `(p, q)` is a regression of the (symmetrized) cross-covariance on the two
//! own-covariances across lags, and `a12` solves `p a12^2 - a12 + q = 0`. The
//! two roots are the same factor model with the sources swapped and rescaled.
//!
//! # Markov test
//!
//! A first-order Markov process has `E[c(y_{t-1}) Cov(a(y_t), b(y_{t-2}) | y_{t-1})] = 0`
//! for all functions `a, b, c`. The test estimates these moments for a small
//! dictionary of triples, using leave-one-out kernel regressions for the
//! conditional means, and compares a Wald statistic (block-bootstrap
//! covariance) with its chi-square limit.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{ensure_finite, invalid_input, Error, Result};
use crate::kernel_lab::{silverman_bandwidth, Kernel};
use crate::rng::substream;
use crate::series::{mean, TimeSeries};

pub const DEFAULT_MAX_LAG: usize = 10;
/// Largest acceptable condition number of the autocovariance design.
pub const MAX_CONDITION_NUMBER: f64 = 1e8;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 500;
pub const TEST_LEVEL: f64 = 0.05;

/// Autocovariances of a bivariate series at lags `0..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossAcf {
    pub g11: Vec<f64>,
    pub g22: Vec<f64>,
    /// `(Cov(y1_t, y2_{t-h}) + Cov(y2_t, y1_{t-h})) / 2`.
    pub g12: Vec<f64>,
}

impl CrossAcf {
    /// Sample autocovariances (demeaned, divisor `T`).
    pub fn from_series(series: &TimeSeries, max_lag: usize) -> Result<Self> {
        if series.dim() != 2 {
            return Err(invalid_input(format!("expected a bivariate series, got dimension {}", series.dim())));
        }
        let t = series.len();
        if max_lag + 2 > t {
            return Err(invalid_input("series too short for the requested lags"));
        }
        let y1 = series.column(0);
        let y2 = series.column(1);
        let (m1, m2) = (mean(&y1), mean(&y2));
        let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64, h: usize| {
            (h..t).map(|s| (a[s] - ma) * (b[s - h] - mb)).sum::<f64>() / t as f64
        };
        let mut out = Self {
            g11: vec![],
            g22: vec![],
            g12: vec![],
        };
        for h in 0..=max_lag {
            out.g11.push(cov(&y1, m1, &y1, m1, h));
            out.g22.push(cov(&y2, m2, &y2, m2, h));
            out.g12.push(0.5 * (cov(&y1, m1, &y2, m2, h) + cov(&y2, m2, &y1, m1, h)));
        }
        Ok(out)
    }

    /// Population autocovariances implied by a mixing and the source autocovariances.
    pub fn from_sources(a12: f64, a21: f64, source1: &[f64], source2: &[f64]) -> Result<Self> {
        if source1.len() != source2.len() || source1.is_empty() {
            return Err(invalid_input("source autocovariances must have equal, nonzero length"));
        }
        Ok(Self {
            g11: source1.iter().zip(source2).map(|(a, b)| a + a12 * a12 * b).collect(),
            g22: source1.iter().zip(source2).map(|(a, b)| a21 * a21 * a + b).collect(),
            g12: source1.iter().zip(source2).map(|(a, b)| a21 * a + a12 * b).collect(),
        })
    }

    pub fn lags(&self) -> usize {
        self.g11.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCandidate {
    pub a12: f64,
    pub a21: f64,
}

impl MixingCandidate {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(1.0, self.a12, self.a21, 1.0)
    }

    /// The regression coefficients `(p, q)` this mixing implies.
    pub fn implied_pq(&self) -> (f64, f64) {
        let s = 1.0 + self.a12 * self.a21;
        (self.a21 / s, self.a12 / s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub p: f64,
    pub q: f64,
    /// One or two admissible mixings (one when `p = 0`).
    pub candidates: Vec<MixingCandidate>,
    /// Index of the reported candidate. Both roots fit the autocovariances
    /// equally well; the one with the smaller `|a12 a21|` is chosen.
    pub chosen: usize,
    /// Euclidean norm of the cross-covariance regression residuals.
    pub residual_norm: f64,
    pub condition_number: f64,
    /// `A_hat^{-1} y` for the chosen candidate, when recovered from data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<TimeSeries>,
}

impl MixingEstimate {
    pub fn chosen_candidate(&self) -> MixingCandidate {
        self.candidates[self.chosen]
    }
}

/// Solves for the mixing from (sample or population) autocovariances.
pub fn recover_mixing_from_acf(acf: &CrossAcf) -> Result<MixingEstimate> {
    let n = acf.lags();
    if n < 2 {
        return Err(invalid_input("need autocovariances at two or more lags"));
    }
    ensure_finite(&acf.g11, "g11")?;
    ensure_finite(&acf.g22, "g22")?;
    ensure_finite(&acf.g12, "g12")?;
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { acf.g11[i] } else { acf.g22[i] });
    let y = DVector::from_column_slice(&acf.g12);
    let sv = x.clone().svd(true, true);
    let (smax, smin) = (sv.singular_values.max(), sv.singular_values.min());
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition_number <= MAX_CONDITION_NUMBER) {
        return Err(Error::DegenerateDynamics { condition_number });
    }
    let coef = sv
        .solve(&y, 0.0)
        .map_err(|e| Error::DegenerateDynamics {
            condition_number: if e.is_empty() { f64::INFINITY } else { condition_number },
        })?;
    let (p, q) = (coef[0], coef[1]);
    let residual_norm = (&y - &x * &coef).norm();

    let disc = 1.0 - 4.0 * p * q;
    if disc < 0.0 {
        return Err(Error::NoSolution(format!(
            "autocovariance regression gives 1 - 4pq = {disc:.3e} < 0"
        )));
    }
    let root = disc.sqrt();
    let mut roots = vec![2.0 * q / (1.0 + root)];
    if p != 0.0 {
        roots.push((1.0 + root) / (2.0 * p));
    }
    let candidates: Vec<MixingCandidate> = roots
        .into_iter()
        .filter_map(|a12| {
            let a21 = p / (1.0 - p * a12);
            let ok = a12.is_finite() && a21.is_finite() && (1.0 + a12 * a21).abs() > 1e-12;
            ok.then_some(MixingCandidate { a12, a21 })
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoSolution("no root satisfies a12 a21 != -1".into()));
    }
    let chosen = (0..candidates.len())
        .min_by(|&i, &j| {
            let k = |c: &MixingCandidate| (c.a12 * c.a21).abs();
            k(&candidates[i]).total_cmp(&k(&candidates[j]))
        })
        .unwrap();
    Ok(MixingEstimate {
        p,
        q,
        candidates,
        chosen,
        residual_norm,
        condition_number,
        sources: None,
    })
}

/// Recovers the mixing of a bivariate series from its autocovariances at
/// lags `0..=max_lag`, and unmixes the series with the chosen candidate.
pub fn recover_mixing(series: &TimeSeries, max_lag: usize) -> Result<MixingEstimate> {
    if max_lag < 2 {
        return Err(invalid_input("need max_lag >= 2"));
    }
    let acf = CrossAcf::from_series(series, max_lag)?;
    let mut est = recover_mixing_from_acf(&acf)?;
    let inv = est
        .chosen_candidate()
        .matrix()
        .try_inverse()
        .ok_or_else(|| Error::NoSolution("chosen mixing is singular".into()))?;
    let mut values = Vec::with_capacity(series.as_slice().len());
    for row in series.rows() {
        let x = inv * nalgebra::Vector2::new(row[0], row[1]);
        values.extend_from_slice(&[x[0], x[1]]);
    }
    est.sources = Some(TimeSeries::new(values, 2, format!("sources of {}", series.origin))?);
    Ok(est)
}

/// A function used in the Markov moment conditions.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFn {
    One,
    Identity,
    Square,
    /// `1{x > median}` with the sample median of the tested series.
    AboveMedian,
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BasisFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BasisFn::One => "one",
            BasisFn::Identity => "identity",
            BasisFn::Square => "square",
            BasisFn::AboveMedian => "above_median",
            BasisFn::Custom(_) => "custom",
        };
        f.write_str(s)
    }
}

impl BasisFn {
    fn eval(&self, x: f64, median: f64) -> f64 {
        match self {
            BasisFn::One => 1.0,
            BasisFn::Identity => x,
            BasisFn::Square => x * x,
            BasisFn::AboveMedian => {
                if x > median {
                    1.0
                } else {
                    0.0
                }
            }
            BasisFn::Custom(f) => f(x),
        }
    }
}

/// `(a, b, c)` in `E[c(y_{t-1}) Cov(a(y_t), b(y_{t-2}) | y_{t-1})] = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisTriple {
    pub a: BasisFn,
    pub b: BasisFn,
    pub c: BasisFn,
}

impl BasisTriple {
    pub fn new(a: BasisFn, b: BasisFn, c: BasisFn) -> Self {
        Self { a, b, c }
    }
}

/// `(x, x, 1)`, `(x, x, x)`, `(x^2, x^2, 1)`, `(1{x>med}, 1{x>med}, x)`.
pub fn default_basis() -> Vec<BasisTriple> {
    use BasisFn::*;
    vec![
        BasisTriple::new(Identity, Identity, One),
        BasisTriple::new(Identity, Identity, Identity),
        BasisTriple::new(Square, Square, One),
        BasisTriple::new(AboveMedian, AboveMedian, Identity),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTestResult {
    /// Sample moments, one per basis triple.
    pub moments: Vec<f64>,
    /// Wald statistic `m' V^{-1} m`, `V` the bootstrap covariance of `m`.
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    /// `true` when the Markov hypothesis is rejected at 5%.
    pub reject: bool,
    pub bootstrap_reps: usize,
    pub block_len: usize,
    pub observations: usize,
}

/// Leave-one-out Nadaraya-Watson fit of `resp` on `cond` at every `cond[i]`.
fn loo_fit(cond: &[f64], resp: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    let k = Kernel::Gaussian;
    let inv_b = 1.0 / bandwidth;
    (0..cond.len())
        .into_par_iter()
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, (&x, &r)) in cond.iter().zip(resp).enumerate() {
                if j != i {
                    let w = k.eval((x - cond[i]) * inv_b);
                    num += w * r;
                    den += w;
                }
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::InsufficientLocalData {
                    point: cond[i],
                    weight: den,
                    required: 0.0,
                })
            }
        })
        .collect()
}

/// Tests the first-order Markov property of a univariate series.
///
/// `block_len` defaults to `ceil(T^(1/3))`. The bootstrap resamples blocks of
/// the per-period moment contributions, holding the kernel fits fixed.
pub fn markov_moment_test(
    series: &TimeSeries,
    basis: &[BasisTriple],
    block_len: Option<usize>,
    reps: usize,
    seed: u64,
) -> Result<MarkovTestResult> {
    let y = series.values_1d()?;
    let t = y.len();
    if t < 100 {
        return Err(invalid_input(format!("Markov test needs at least 100 observations, got {t}")));
    }
    if basis.is_empty() {
        return Err(invalid_input("empty basis"));
    }
    if reps < 2 {
        return Err(invalid_input("need at least 2 bootstrap replications"));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[(t - 1) / 2] + sorted[t / 2]);
    let bandwidth = silverman_bandwidth(y)?;

    // periods with y_t, y_{t-1}, y_{t-2} all observed
    let now = &y[2..];
    let mid = &y[1..t - 1];
    let back = &y[..t - 2];
    let n = now.len();
    let k = basis.len();

    let mut z = DMatrix::zeros(n, k);
    for (j, triple) in basis.iter().enumerate() {
        let a: Vec<f64> = now.iter().map(|&v| triple.a.eval(v, median)).collect();
        let b: Vec<f64> = back.iter().map(|&v| triple.b.eval(v, median)).collect();
        let c: Vec<f64> = mid.iter().map(|&v| triple.c.eval(v, median)).collect();
        for (v, what) in [(&a, "a"), (&b, "b"), (&c, "c")] {
            ensure_finite(v, &format!("basis function {what} of triple {j}"))?;
        }
        let a_hat = loo_fit(mid, &a, bandwidth)?;
        let b_hat = loo_fit(mid, &b, bandwidth)?;
        for i in 0..n {
            z[(i, j)] = c[i] * (a[i] - a_hat[i]) * (b[i] - b_hat[i]);
        }
    }
    let moments: Vec<f64> = (0..k).map(|j| z.column(j).mean()).collect();

    let block = block_len.unwrap_or_else(|| (t as f64).cbrt().ceil() as usize);
    if block == 0 || block > n {
        return Err(invalid_input(format!("block length must be in 1..={n}")));
    }
    let means: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut sums = vec![0.0; k];
            let mut taken = 0;
            while taken < n {
                let start = rng.random_range(0..n);
                for i in 0..block.min(n - taken) {
                    let row = (start + i) % n;
                    for (j, s) in sums.iter_mut().enumerate() {
                        *s += z[(row, j)];
                    }
                }
                taken += block;
            }
            sums.into_iter().map(|s| s / n as f64).collect()
        })
        .collect();
    let mut cov = DMatrix::zeros(k, k);
    let centre: Vec<f64> = (0..k).map(|j| means.iter().map(|m| m[j]).sum::<f64>() / reps as f64).collect();
    for m in &means {
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] += (m[i] - centre[i]) * (m[j] - centre[j]);
            }
        }
    }
    cov /= (reps - 1) as f64;
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("bootstrap covariance of the moments is singular".into()))?;
    let mv = DVector::from_column_slice(&moments);
    let statistic = mv.dot(&chol.solve(&mv)).max(0.0);
    let chi = ChiSquared::new(k as f64).map_err(|e| invalid_input(e.to_string()))?;
    let critical_value = chi.inverse_cdf(1.0 - TEST_LEVEL);
    Ok(MarkovTestResult {
        moments,
        statistic,
        critical_value,
        p_value: 1.0 - chi.cdf(statistic),
        degrees_of_freedom: k,
        reject: statistic > critical_value,
        bootstrap_reps: reps,
        block_len: block,
        observations: t,
    })
}
