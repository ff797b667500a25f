//! Kernel smoothing: density, conditional CDF and quantile, the estimated
//! one-step map `g_hat(y; eps) = Q_hat[Phi(eps) | y]`, and Nadaraya-Watson
//! regressions of `y_{t+h}` on `y_t`.
//!
//! Conditional estimators weight the pair `(y_{t-1}, y_t)` by
//! `K((y_{t-1} - y) / b)`, the kernel value itself (not divided by `b`). The
//! sum of these weights is reported as the effective weight, and an estimate
//! is refused when it is too small (see [`KernelConfig::min_weight_sum`]).
//!
//! With a `silverman` bandwidth, `b` is computed once from the whole observed
//! series, so every estimator built from the same data uses the same `b`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid_input, Error, Result};
use crate::series::std_dev;
use crate::stats::normal_cdf;

/// Innovations are clamped to this range before `Phi` is applied.
pub const EPS_CLAMP: f64 = 6.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest value the kernel can take.
    pub fn peak(self) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI,
            Kernel::Epanechnikov => 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Silverman,
}

/// Either a fixed positive bandwidth or a rule (`"silverman"` in JSON).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Rule(BandwidthRule),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Rule(BandwidthRule::Silverman)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    /// Minimum total kernel weight at a conditioning point. When `None`, the
    /// weights must sum to at least five times the largest single weight,
    /// i.e. roughly five effective observations.
    pub min_weight_sum: Option<f64>,
}

impl KernelConfig {
    pub fn with_bandwidth(b: f64) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(b),
            ..Self::default()
        }
    }

    /// Resolves the bandwidth for `data`.
    pub fn resolve_bandwidth(&self, data: &[f64]) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(b) if b.is_finite() && b > 0.0 => Ok(b),
            Bandwidth::Fixed(b) => Err(invalid_input(format!("bandwidth must be positive, got {b}"))),
            Bandwidth::Rule(BandwidthRule::Silverman) => silverman_bandwidth(data),
        }
    }

    fn check_weight(&self, point: f64, sum: f64, max: f64) -> Result<()> {
        let required = match self.min_weight_sum {
            Some(m) => m,
            None => 5.0 * max,
        };
        if !(sum > 0.0) || sum < required {
            return Err(Error::InsufficientLocalData {
                point,
                weight: sum,
                required,
            });
        }
        Ok(())
    }
}

/// `1.06 * sd * n^(-1/5)`.
pub fn silverman_bandwidth(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(invalid_input("bandwidth rule needs at least 2 observations"));
    }
    ensure_finite(data, "bandwidth data")?;
    let sd = std_dev(data);
    if !(sd > 0.0) {
        return Err(invalid_input("cannot choose a bandwidth for constant data"));
    }
    Ok(1.06 * sd * (data.len() as f64).powf(-0.2))
}

/// A kernel estimate together with the local mass it rests on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub value: f64,
    pub effective_weight: f64,
    pub bandwidth_used: f64,
}

/// Kernel density estimate `(1 / (n b)) sum K((x - x_i) / b)`.
pub fn kde(data: &[f64], x: f64, cfg: &KernelConfig) -> Result<f64> {
    ensure_finite(data, "data")?;
    let b = cfg.resolve_bandwidth(data)?;
    let s: f64 = data.iter().map(|&d| cfg.kernel.eval((x - d) / b)).sum();
    Ok(s / (data.len() as f64 * b))
}

fn check_series(series: &[f64], min_len: usize) -> Result<()> {
    if series.len() < min_len {
        return Err(invalid_input(format!(
            "need at least {min_len} observations, got {}",
            series.len()
        )));
    }
    ensure_finite(series, "series")
}

/// Kernel-weighted conditional distribution of `y_t` given `y_{t-1}`, with
/// pairs pre-sorted by the response so that quantiles are a single scan.
#[derive(Debug, Clone)]
pub struct QuantileMap {
    cond: Vec<f64>,
    resp: Vec<f64>,
    bandwidth: f64,
    cfg: KernelConfig,
}

impl QuantileMap {
    pub fn fit(series: &[f64], cfg: &KernelConfig) -> Result<Self> {
        check_series(series, 3)?;
        let bandwidth = cfg.resolve_bandwidth(series)?;
        Self::from_pairs(series.windows(2).map(|w| (w[0], w[1])).collect(), bandwidth, cfg)
    }

    /// Builds the map from explicit `(y_{t-1}, y_t)` pairs and a bandwidth,
    /// e.g. a bootstrap resample of the pairs of a series.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>, bandwidth: f64, cfg: &KernelConfig) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(invalid_input("need at least 2 pairs"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid_input(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if pairs.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(invalid_input("pairs must be finite"));
        }
        // stable: equal responses keep their input order
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (cond, resp) = pairs.into_iter().unzip();
        Ok(Self {
            cond,
            resp,
            bandwidth,
            cfg: *cfg,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn weights_into(&self, y: f64, buf: &mut Vec<f64>) -> Result<f64> {
        buf.clear();
        let inv_b = 1.0 / self.bandwidth;
        let k = self.cfg.kernel;
        let (mut sum, mut max) = (0.0, 0.0f64);
        buf.extend(self.cond.iter().map(|&x| {
            let w = k.eval((x - y) * inv_b);
            sum += w;
            max = max.max(w);
            w
        }));
        self.cfg.check_weight(y, sum, max)?;
        Ok(sum)
    }

    fn estimate(&self, value: f64, sum: f64) -> ConditionalEstimate {
        ConditionalEstimate {
            value,
            effective_weight: sum,
            bandwidth_used: self.bandwidth,
        }
    }

    /// `sum w_t 1{y_t < z} / sum w_t`.
    pub fn cdf(&self, y: f64, z: f64) -> Result<ConditionalEstimate> {
        let mut w = Vec::with_capacity(self.cond.len());
        let sum = self.weights_into(y, &mut w)?;
        let below = self.resp.partition_point(|&r| r < z);
        let part: f64 = w[..below].iter().sum();
        Ok(self.estimate(part / sum, sum))
    }

    /// Smallest response whose cumulative weight reaches `alpha` of the total.
    pub fn quantile(&self, y: f64, alpha: f64) -> Result<ConditionalEstimate> {
        check_level(alpha)?;
        let mut w = Vec::with_capacity(self.cond.len());
        let sum = self.weights_into(y, &mut w)?;
        let target = alpha * sum;
        let mut acc = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            acc += wi;
            if acc >= target && wi > 0.0 {
                return Ok(self.estimate(self.resp[i], sum));
            }
        }
        // rounding left acc marginally short of alpha * sum
        let last = w.iter().rposition(|&wi| wi > 0.0).unwrap_or(w.len() - 1);
        Ok(self.estimate(self.resp[last], sum))
    }

    /// Conditional distribution at `y` with its cumulative weights cached, for
    /// evaluating many quantile levels at one conditioning point.
    pub fn at(&self, y: f64) -> Result<ConditionalQuantiles<'_>> {
        let mut cum = Vec::with_capacity(self.cond.len());
        let sum = self.weights_into(y, &mut cum)?;
        let mut acc = 0.0;
        for c in cum.iter_mut() {
            acc += *c;
            *c = acc;
        }
        Ok(ConditionalQuantiles {
            map: self,
            cum,
            sum,
        })
    }

    /// `g_hat(y; eps) = Q_hat[Phi(eps) | y]`.
    pub fn g_hat(&self, y: f64, eps: f64) -> Result<GHat> {
        let (alpha, clamped) = shock_level(eps)?;
        let est = self.quantile(y, alpha)?;
        Ok(GHat { estimate: est, clamped })
    }
}

/// Cached conditional distribution at one point.
#[derive(Debug, Clone)]
pub struct ConditionalQuantiles<'a> {
    map: &'a QuantileMap,
    cum: Vec<f64>,
    sum: f64,
}

impl ConditionalQuantiles<'_> {
    pub fn effective_weight(&self) -> f64 {
        self.sum
    }

    /// Same value as [`QuantileMap::quantile`] at this point.
    pub fn quantile(&self, alpha: f64) -> Result<ConditionalEstimate> {
        check_level(alpha)?;
        let target = alpha * self.sum;
        // The first index reaching a positive target necessarily carries
        // positive weight; the running sums are those of the sequential scan.
        let i = match self.cum.partition_point(|&c| c < target) {
            i if i < self.cum.len() => i,
            _ => (0..self.cum.len())
                .rev()
                .find(|&j| weight_at(&self.cum, j) > 0.0)
                .unwrap_or(self.cum.len() - 1),
        };
        Ok(self.map.estimate(self.map.resp[i], self.sum))
    }

    pub fn g_hat(&self, eps: f64) -> Result<GHat> {
        let (alpha, clamped) = shock_level(eps)?;
        Ok(GHat {
            estimate: self.quantile(alpha)?,
            clamped,
        })
    }
}

fn weight_at(cum: &[f64], i: usize) -> f64 {
    if i == 0 {
        cum[0]
    } else {
        cum[i] - cum[i - 1]
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid_input(format!("quantile level must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn shock_level(eps: f64) -> Result<(f64, bool)> {
    if !eps.is_finite() {
        return Err(invalid_input("innovation must be finite"));
    }
    let clamped = eps.abs() > EPS_CLAMP;
    Ok((normal_cdf(eps.clamp(-EPS_CLAMP, EPS_CLAMP)), clamped))
}

/// Value of the estimated one-step map; `clamped` is set when the innovation
/// was outside `[-6, 6]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GHat {
    pub estimate: ConditionalEstimate,
    pub clamped: bool,
}

/// Nadaraya-Watson regression of `y_{t+h}` on `y_t`.
#[derive(Debug, Clone)]
pub struct NwRegressor {
    horizon: usize,
    cond: Vec<f64>,
    resp: Vec<f64>,
    bandwidth: f64,
    cfg: KernelConfig,
}

impl NwRegressor {
    /// Requires `T > h + 2`.
    pub fn fit(series: &[f64], h: usize, cfg: &KernelConfig) -> Result<Self> {
        if h == 0 {
            return Err(invalid_input("regression horizon must be at least 1"));
        }
        check_series(series, h + 3)?;
        let bandwidth = cfg.resolve_bandwidth(series)?;
        let n = series.len() - h;
        Ok(Self {
            horizon: h,
            cond: series[..n].to_vec(),
            resp: series[h..].to_vec(),
            bandwidth,
            cfg: *cfg,
        })
    }

    /// Builds the regression from explicit `(y_t, y_{t+h})` pairs.
    pub fn from_pairs(h: usize, pairs: &[(f64, f64)], bandwidth: f64, cfg: &KernelConfig) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(invalid_input("need at least 2 pairs"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid_input(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self {
            horizon: h,
            cond: pairs.iter().map(|p| p.0).collect(),
            resp: pairs.iter().map(|p| p.1).collect(),
            bandwidth,
            cfg: *cfg,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn predict(&self, y: f64) -> Result<ConditionalEstimate> {
        let inv_b = 1.0 / self.bandwidth;
        let k = self.cfg.kernel;
        let (mut sum, mut num, mut max) = (0.0, 0.0, 0.0f64);
        for (&x, &r) in self.cond.iter().zip(&self.resp) {
            let w = k.eval((x - y) * inv_b);
            sum += w;
            num += w * r;
            max = max.max(w);
        }
        self.cfg.check_weight(y, sum, max)?;
        Ok(ConditionalEstimate {
            value: num / sum,
            effective_weight: sum,
            bandwidth_used: self.bandwidth,
        })
    }
}

/// Conditional CDF `P(y_t < z | y_{t-1} = y)`.
pub fn cond_cdf(series: &[f64], y: f64, z: f64, cfg: &KernelConfig) -> Result<ConditionalEstimate> {
    QuantileMap::fit(series, cfg)?.cdf(y, z)
}

/// Conditional quantile of `y_t` at level `alpha` given `y_{t-1} = y`.
pub fn cond_quantile(series: &[f64], y: f64, alpha: f64, cfg: &KernelConfig) -> Result<ConditionalEstimate> {
    QuantileMap::fit(series, cfg)?.quantile(y, alpha)
}

/// The estimated one-step map `Q_hat[Phi(eps) | y]`.
pub fn g_hat(series: &[f64], y: f64, eps: f64, cfg: &KernelConfig) -> Result<GHat> {
    QuantileMap::fit(series, cfg)?.g_hat(y, eps)
}

/// `m_hat^(h)(y)`, the kernel regression of `y_{t+h}` on `y_t` at `y`.
pub fn nadaraya_watson(series: &[f64], h: usize, y: f64, cfg: &KernelConfig) -> Result<ConditionalEstimate> {
    NwRegressor::fit(series, h, cfg)?.predict(y)
}
