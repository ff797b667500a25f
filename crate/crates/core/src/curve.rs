//! Horizon-indexed impulse response values.

use serde::{Deserialize, Serialize};

/// Which computation produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Paired simulation through the estimated one-step map.
    Direct,
    /// One simulated step, then Nadaraya-Watson local projections.
    LocalProjection,
    /// Ground truth from a known data-generating process.
    Oracle,
}

impl Route {
    pub fn label(self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::LocalProjection => "lp",
            Route::Oracle => "true",
        }
    }
}

/// Impulse responses at horizons `1..=H`.
///
/// Values are stored row-major as `H x dim`; univariate curves have `dim == 1`
/// and [`IrfCurve::values`] is then simply the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfCurve {
    pub route: Route,
    pub dim: usize,
    pub delta: Vec<f64>,
    pub y0: Vec<f64>,
    /// Replications requested (`S`).
    pub replications: usize,
    values: Vec<f64>,
    mc_se: Vec<f64>,
    /// Replications discarded at each horizon.
    pub rejected: Vec<usize>,
    /// `true` where the value is an exact closed form rather than a Monte Carlo mean.
    pub closed_form: Vec<bool>,
    /// Bootstrap standard error of the estimator itself (resampling the data),
    /// when it was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_se: Option<Vec<f64>>,
}

impl IrfCurve {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        route: Route,
        dim: usize,
        delta: Vec<f64>,
        y0: Vec<f64>,
        replications: usize,
        values: Vec<f64>,
        mc_se: Vec<f64>,
        rejected: Vec<usize>,
        closed_form: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(values.len(), mc_se.len());
        debug_assert_eq!(values.len(), rejected.len() * dim);
        Self {
            route,
            dim,
            delta,
            y0,
            replications,
            values,
            mc_se,
            rejected,
            closed_form,
            sampling_se: None,
        }
    }

    pub fn horizons(&self) -> usize {
        self.rejected.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mc_se(&self) -> &[f64] {
        &self.mc_se
    }

    /// Response vector at horizon `h` (1-based).
    pub fn at(&self, h: usize) -> &[f64] {
        &self.values[(h - 1) * self.dim..h * self.dim]
    }

    pub fn se_at(&self, h: usize) -> &[f64] {
        &self.mc_se[(h - 1) * self.dim..h * self.dim]
    }

    /// `sqrt(mc_se^2 + sampling_se^2)` per entry; the Monte Carlo error alone
    /// when no sampling error was computed.
    pub fn combined_se(&self) -> Vec<f64> {
        match &self.sampling_se {
            Some(b) => self.mc_se.iter().zip(b).map(|(m, b)| m.hypot(*b)).collect(),
            None => self.mc_se.clone(),
        }
    }

    pub fn combined_se_at(&self, h: usize) -> Vec<f64> {
        self.combined_se()[(h - 1) * self.dim..h * self.dim].to_vec()
    }
}
