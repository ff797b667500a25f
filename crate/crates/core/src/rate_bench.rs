//! Monte Carlo convergence-rate sweeps.
//!
//! A sweep simulates the model at several sample sizes `T`, estimates a target
//! quantity on every `(T, seed)` cell, and compares it with the model's known
//! value. Per-`T` RMSEs are then regressed on `log(T * b_T)`; a slope near
//! `-1/2` is the nonparametric `sqrt(T b_T)` rate. For impulse-response
//! targets the direct and local-projection routes are run side by side and
//! their RMSE ratio is reported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Route;
use crate::error::{invalid_input, Error, Result};
use crate::irf_engine::{estimate_irf, IrfRequest};
use crate::kernel_lab::{KernelConfig, QuantileMap};
use crate::model_zoo::{simulate_with_burn_in, true_irf, ModelSpec};
use crate::rng::derive_seed;

pub const MIN_SAMPLE_SIZES: usize = 2;
pub const MIN_SEEDS: usize = 10;
/// A cell rejecting more than this share of its replications aborts the sweep.
pub const FATAL_REJECTED_FRACTION: f64 = 0.5;
const BURN_IN: usize = 200;

/// Quantity estimated in every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// Conditional CDF `F(z | y)` at each `(y, z)`.
    CondCdf { points: Vec<(f64, f64)> },
    /// Impulse response at one horizon, by both estimation routes.
    Irf { horizon: usize, delta: f64, y0: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub model: ModelSpec,
    /// Increasing sample sizes.
    pub sample_sizes: Vec<usize>,
    /// Seeds per sample size.
    pub seeds: usize,
    pub master_seed: u64,
    pub target: Target,
    #[serde(default)]
    pub kernel: KernelConfig,
    /// Simulated path pairs per IRF estimate.
    #[serde(default = "default_replications")]
    pub replications: usize,
}

fn default_replications() -> usize {
    2_000
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.dim() != 1 {
            return Err(invalid_input("rate sweeps need a univariate model"));
        }
        if self.sample_sizes.len() < MIN_SAMPLE_SIZES {
            return Err(invalid_input(format!("need at least {MIN_SAMPLE_SIZES} sample sizes")));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid_input("sample sizes must be strictly increasing"));
        }
        if self.sample_sizes[0] < 10 {
            return Err(invalid_input("sample sizes must be at least 10"));
        }
        if self.seeds < MIN_SEEDS {
            return Err(invalid_input(format!("need at least {MIN_SEEDS} seeds per sample size")));
        }
        match &self.target {
            Target::CondCdf { points } => {
                if points.is_empty() {
                    return Err(invalid_input("no evaluation points"));
                }
                if points.iter().any(|(y, z)| !y.is_finite() || !z.is_finite()) {
                    return Err(invalid_input("evaluation points must be finite"));
                }
            }
            Target::Irf { horizon, delta, y0 } => {
                if *horizon < 1 || !delta.is_finite() || !y0.is_finite() {
                    return Err(invalid_input("IRF target needs horizon >= 1 and finite delta, y0"));
                }
                if self.replications < 1 {
                    return Err(invalid_input("need at least one replication"));
                }
            }
        }
        Ok(())
    }

    /// Data seed and Monte Carlo seed of cell `(size_index, seed_index)`.
    fn cell_seeds(&self, size_index: usize, seed_index: usize) -> (u64, u64) {
        let cell = derive_seed(derive_seed(self.master_seed, size_index as u64), seed_index as u64);
        (derive_seed(cell, 0), derive_seed(cell, 1))
    }
}

/// One estimate compared with its oracle value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: usize,
    pub route: String,
    pub target: String,
    pub estimate: f64,
    pub oracle: f64,
    pub abs_err: f64,
}

impl SweepRecord {
    pub fn new(t: usize, seed: usize, route: &str, target: &str, estimate: f64, oracle: f64) -> Self {
        Self {
            t,
            seed,
            route: route.to_string(),
            target: target.to_string(),
            estimate,
            oracle,
            abs_err: (estimate - oracle).abs(),
        }
    }
}

/// An estimator error that was recorded instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub t: usize,
    pub seed: usize,
    pub route: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub t: usize,
    pub route: String,
    /// Mean bandwidth over the seeds at this `T`.
    pub bandwidth: f64,
    pub rmse: f64,
    /// Records entering the RMSE.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub route: String,
    /// Least-squares slope of `log RMSE` on `log(T b_T)`; `None` when some
    /// RMSE is zero or missing and the logarithm is undefined.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRatio {
    pub t: usize,
    /// `RMSE(direct) / RMSE(lp)`; `None` if either is unavailable or the denominator is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<CellFailure>,
    pub rates: Vec<RateRow>,
    pub fits: Vec<RateFit>,
    /// Present for IRF targets only.
    pub ratios: Vec<RouteRatio>,
}

impl SweepReport {
    /// Aggregates records into per-`T` RMSEs, slopes and route ratios.
    ///
    /// `bandwidths` holds `(T, b)` for each fitted cell; records at a `T`
    /// without any bandwidth use `b = 1`.
    pub fn from_records(records: Vec<SweepRecord>, failures: Vec<CellFailure>, bandwidths: &[(usize, f64)]) -> Self {
        let mut sizes: Vec<usize> = records.iter().map(|r| r.t).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let mut routes: Vec<String> = Vec::new();
        for r in &records {
            if !routes.contains(&r.route) {
                routes.push(r.route.clone());
            }
        }

        let mut rates = Vec::new();
        for route in &routes {
            for &t in &sizes {
                let errs: Vec<f64> = records
                    .iter()
                    .filter(|r| r.t == t && &r.route == route)
                    .map(|r| r.abs_err)
                    .collect();
                if errs.is_empty() {
                    continue;
                }
                let bs: Vec<f64> = bandwidths.iter().filter(|(bt, _)| *bt == t).map(|(_, b)| *b).collect();
                let bandwidth = if bs.is_empty() { 1.0 } else { bs.iter().sum::<f64>() / bs.len() as f64 };
                let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
                rates.push(RateRow {
                    t,
                    route: route.clone(),
                    bandwidth,
                    rmse,
                    count: errs.len(),
                });
            }
        }

        let fits = routes
            .iter()
            .map(|route| {
                let pts: Vec<(f64, f64)> = rates
                    .iter()
                    .filter(|row| &row.route == route)
                    .map(|row| ((row.t as f64 * row.bandwidth).ln(), row.rmse.ln()))
                    .collect();
                RateFit {
                    route: route.clone(),
                    slope: ls_slope(&pts),
                }
            })
            .collect();

        let rmse_of = |t: usize, route: &str| rates.iter().find(|r| r.t == t && r.route == route).map(|r| r.rmse);
        let has_lp = routes.iter().any(|r| r == Route::LocalProjection.label());
        let ratios = if has_lp {
            sizes
                .iter()
                .map(|&t| RouteRatio {
                    t,
                    ratio: match (rmse_of(t, Route::Direct.label()), rmse_of(t, Route::LocalProjection.label())) {
                        (Some(d), Some(l)) if l > 0.0 => Some(d / l),
                        _ => None,
                    },
                })
                .collect()
        } else {
            Vec::new()
        };

        Self {
            records,
            failures,
            rates,
            fits,
            ratios,
        }
    }

    pub fn slope(&self, route: &str) -> Option<f64> {
        self.fits.iter().find(|f| f.route == route).and_then(|f| f.slope)
    }

    pub fn ratio_at(&self, t: usize) -> Option<f64> {
        self.ratios.iter().find(|r| r.t == t).and_then(|r| r.ratio)
    }
}

/// Slope of the least-squares line through `pts`; `None` for fewer than two
/// distinct abscissae or any non-finite coordinate.
fn ls_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 || pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct CellOutcome {
    records: Vec<SweepRecord>,
    failures: Vec<CellFailure>,
    bandwidth: Option<f64>,
}

fn target_label(target: &Target, point: Option<(f64, f64)>) -> String {
    match (target, point) {
        (Target::CondCdf { .. }, Some((y, z))) => format!("cdf(y={y},z={z})"),
        (Target::Irf { horizon, delta, y0 }, _) => format!("irf(h={horizon},delta={delta},y0={y0})"),
        _ => unreachable!("cdf labels carry their point"),
    }
}

fn failure(t: usize, seed: usize, route: &str, e: &Error) -> CellFailure {
    CellFailure {
        t,
        seed,
        route: route.to_string(),
        kind: e.kind().to_string(),
        message: e.to_string(),
    }
}

fn run_cell(spec: &SweepSpec, size_index: usize, seed_index: usize) -> Result<CellOutcome> {
    let t = spec.sample_sizes[size_index];
    let (data_seed, mc_seed) = spec.cell_seeds(size_index, seed_index);
    let series = simulate_with_burn_in(&spec.model, t, &[0.0], data_seed, BURN_IN)?;
    let y = series.values_1d()?;
    let mut out = CellOutcome {
        records: Vec::new(),
        failures: Vec::new(),
        bandwidth: None,
    };
    match &spec.target {
        Target::CondCdf { points } => {
            let map = match QuantileMap::fit(y, &spec.kernel) {
                Ok(m) => m,
                Err(e) => {
                    out.failures.push(failure(t, seed_index, "kernel", &e));
                    return Ok(out);
                }
            };
            out.bandwidth = Some(map.bandwidth());
            for &(py, pz) in points {
                let label = target_label(&spec.target, Some((py, pz)));
                let oracle = spec.model.transition_cdf(py, pz)?;
                match map.cdf(py, pz) {
                    Ok(est) => out.records.push(SweepRecord::new(t, seed_index, "kernel", &label, est.value, oracle)),
                    Err(e) => out.failures.push(failure(t, seed_index, "kernel", &e)),
                }
            }
        }
        Target::Irf { horizon, delta, y0 } => {
            let label = target_label(&spec.target, None);
            let h = *horizon;
            let oracle = true_irf(&spec.model, &[*y0], h, &[*delta], spec.replications, mc_seed)?.at(h)[0];
            out.bandwidth = Some(spec.kernel.resolve_bandwidth(y)?);
            for route in [Route::Direct, Route::LocalProjection] {
                let req = IrfRequest {
                    y0: *y0,
                    horizons: h,
                    delta: *delta,
                    replications: spec.replications,
                    kernel: spec.kernel.clone(),
                    seed: mc_seed,
                    route,
                    bootstrap: None,
                };
                match estimate_irf(&series, &req) {
                    Ok(curve) => out.records.push(SweepRecord::new(t, seed_index, route.label(), &label, curve.at(h)[0], oracle)),
                    Err(Error::ExcessiveRejection { horizon, rejected, total })
                        if rejected as f64 > FATAL_REJECTED_FRACTION * total as f64 =>
                    {
                        return Err(Error::ExcessiveRejection { horizon, rejected, total });
                    }
                    Err(e) => out.failures.push(failure(t, seed_index, route.label(), &e)),
                }
            }
        }
    }
    Ok(out)
}

/// Runs every `(T, seed)` cell in parallel and aggregates in a fixed order,
/// so the report depends only on the `SweepSpec`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.sample_sizes.len())
        .flat_map(|i| (0..spec.seeds).map(move |s| (i, s)))
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(i, s)| run_cell(spec, i, s))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut bandwidths = Vec::new();
    for ((i, _), o) in cells.iter().zip(outcomes) {
        records.extend(o.records);
        failures.extend(o.failures);
        if let Some(b) = o.bandwidth {
            bandwidths.push((spec.sample_sizes[*i], b));
        }
    }
    Ok(SweepReport::from_records(records, failures, &bandwidths))
}
