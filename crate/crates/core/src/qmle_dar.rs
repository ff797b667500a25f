//! Gaussian quasi-maximum likelihood for DAR(1) by exhaustive grid search.
//!
//! The objective is the standard Gaussian quasi log-likelihood
//!
//! ```text
//! L(rho, alpha, beta) = sum_{t=2}^T -1/2 [ ln v_t + (y_t - rho y_{t-1})^2 / v_t ],
//! v_t = alpha + beta y_{t-1}^2.
//! ```
//!
//! For fixed `(alpha, beta)` it is a quadratic in `rho`, so the search
//! accumulates four weighted sums per `(alpha, beta)` pair and then scores
//! every `rho` on the lattice in constant time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::model_zoo::DarParams;
use crate::series::TimeSeries;

/// Cubic lattice over `(rho, alpha, beta)`: points `lower[i] + k * step` up to `upper[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub step: f64,
}

impl Default for GridSpec {
    /// `[0.01, 1.20]^3` at step 0.01.
    fn default() -> Self {
        Self {
            lower: [0.01; 3],
            upper: [1.20; 3],
            step: 0.01,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(invalid_input(format!("grid step must be positive, got {}", self.step)));
        }
        for i in 0..3 {
            if !(self.lower[i].is_finite() && self.upper[i].is_finite() && self.lower[i] < self.upper[i]) {
                return Err(invalid_input(format!("grid axis {i} needs lower < upper")));
            }
        }
        if self.lower[1] <= 0.0 {
            return Err(invalid_input("alpha grid must start above zero"));
        }
        if self.lower[2] < 0.0 {
            return Err(invalid_input("beta grid must start at or above zero"));
        }
        Ok(())
    }

    /// Number of lattice points on axis `i`.
    pub fn axis_len(&self, i: usize) -> usize {
        ((self.upper[i] - self.lower[i]) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn axis_value(&self, i: usize, k: usize) -> f64 {
        self.lower[i] + k as f64 * self.step
    }

    pub fn axis(&self, i: usize) -> Vec<f64> {
        (0..self.axis_len(i)).map(|k| self.axis_value(i, k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmleResult {
    pub params: DarParams,
    pub loglik: f64,
    /// Set when the maximizer lies on a face of the grid, i.e. the true
    /// maximizer may be outside it.
    pub grid_argmax_on_boundary: bool,
}

fn check_len(series: &TimeSeries) -> Result<&[f64]> {
    let y = series.values_1d()?;
    if y.len() < 2 {
        return Err(invalid_input("quasi-likelihood needs at least 2 observations"));
    }
    Ok(y)
}

/// Quasi log-likelihood of `series` at `params`.
pub fn dar_quasi_loglik(params: &DarParams, series: &TimeSeries) -> Result<f64> {
    let y = check_len(series)?;
    if !(params.alpha > 0.0 && params.beta >= 0.0) {
        return Err(invalid_input("quasi-likelihood needs alpha > 0 and beta >= 0"));
    }
    Ok(y.windows(2)
        .map(|w| {
            let v = params.alpha + params.beta * w[0] * w[0];
            let r = w[1] - params.rho * w[0];
            -0.5 * (v.ln() + r * r / v)
        })
        .sum())
}

#[derive(Debug, Clone, Copy)]
struct Best {
    loglik: f64,
    idx: [usize; 3],
}

impl Best {
    // Larger loglik wins; ties go to the lexicographically smallest (rho, alpha, beta).
    fn better(self, other: Best) -> Best {
        match other.loglik.partial_cmp(&self.loglik) {
            Some(std::cmp::Ordering::Greater) => other,
            Some(std::cmp::Ordering::Equal) if other.idx < self.idx => other,
            _ if self.loglik.is_nan() => other,
            _ => self,
        }
    }
}

/// Exhaustive maximization of [`dar_quasi_loglik`] over the lattice.
pub fn qmle_grid_search(series: &TimeSeries, grid: &GridSpec) -> Result<QmleResult> {
    grid.validate()?;
    let y = check_len(series)?;
    let x: Vec<f64> = y[..y.len() - 1].to_vec();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let z = &y[1..];
    let rhos = grid.axis(0);
    let betas = grid.axis(2);
    let na = grid.axis_len(1);

    let best = (0..na)
        .into_par_iter()
        .map(|ia| {
            let alpha = grid.axis_value(1, ia);
            let mut best = Best {
                loglik: f64::NEG_INFINITY,
                idx: [usize::MAX; 3],
            };
            for (ib, &beta) in betas.iter().enumerate() {
                let (mut s_ln, mut s_zz, mut s_xz, mut s_xx) = (0.0, 0.0, 0.0, 0.0);
                for ((&xt, &x2t), &zt) in x.iter().zip(&x2).zip(z) {
                    let v = alpha + beta * x2t;
                    let iv = 1.0 / v;
                    s_ln += v.ln();
                    s_zz += zt * zt * iv;
                    s_xz += xt * zt * iv;
                    s_xx += x2t * iv;
                }
                for (ir, &rho) in rhos.iter().enumerate() {
                    let ll = -0.5 * (s_ln + s_zz - 2.0 * rho * s_xz + rho * rho * s_xx);
                    best = best.better(Best {
                        loglik: ll,
                        idx: [ir, ia, ib],
                    });
                }
            }
            best
        })
        .reduce_with(Best::better)
        .expect("grid has at least one alpha value");

    if !best.loglik.is_finite() {
        return Err(invalid_input("quasi-likelihood is not finite anywhere on the grid"));
    }
    let params = DarParams {
        rho: grid.axis_value(0, best.idx[0]),
        alpha: grid.axis_value(1, best.idx[1]),
        beta: grid.axis_value(2, best.idx[2]),
    };
    let on_boundary = (0..3).any(|i| best.idx[i] == 0 || best.idx[i] + 1 == grid.axis_len(i));
    Ok(QmleResult {
        params,
        loglik: best.loglik,
        grid_argmax_on_boundary: on_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{simulate, ModelSpec};

    fn small_grid() -> GridSpec {
        GridSpec {
            lower: [0.2, 0.6, 0.1],
            upper: [0.8, 1.4, 0.9],
            step: 0.05,
        }
    }

    #[test]
    fn hand_evaluation() {
        let s = TimeSeries::univariate(vec![0.0, 1.0], "hand").unwrap();
        let p = DarParams { rho: 0.0, alpha: 1.0, beta: 0.0 };
        assert_eq!(dar_quasi_loglik(&p, &s).unwrap(), -0.5);
    }

    #[test]
    fn default_grid_is_the_unit_cube_at_hundredths() {
        let g = GridSpec::default();
        assert!(g.validate().is_ok());
        assert_eq!(g.axis_len(0), 120);
        assert!((g.axis_value(1, 119) - 1.2).abs() < 1e-12);
        assert!(GridSpec { lower: [0.0, 0.0, 0.0], ..g }.validate().is_err());
        assert!(GridSpec { step: 0.0, ..g }.validate().is_err());
    }

    #[test]
    fn search_is_exhaustive() {
        let s = simulate(&ModelSpec::dar1(0.5, 1.0, 0.5), 400, &[0.0], 21).unwrap();
        let g = small_grid();
        let r = qmle_grid_search(&s, &g).unwrap();
        let direct = dar_quasi_loglik(&r.params, &s).unwrap();
        assert!((direct - r.loglik).abs() < 1e-9 * direct.abs());
        for rho in g.axis(0) {
            for alpha in g.axis(1) {
                for beta in g.axis(2) {
                    let ll = dar_quasi_loglik(&DarParams { rho, alpha, beta }, &s).unwrap();
                    assert!(ll <= r.loglik + 1e-9 * ll.abs(), "({rho},{alpha},{beta}) beats the search");
                }
            }
        }
    }

    #[test]
    fn beta_zero_recovers_ols_slope() {
        let s = simulate(&ModelSpec::gaussian_ar1(0.6, 1.0), 2000, &[0.0], 3).unwrap();
        let y = s.values_1d().unwrap();
        let ols = y.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / y[..y.len() - 1].iter().map(|v| v * v).sum::<f64>();
        // beta pinned to zero, alpha pinned to one: the search is least squares in rho
        let g = GridSpec {
            lower: [0.0, 1.0, 0.0],
            upper: [1.0, 1.0 + 1e-12, 1e-12],
            step: 0.001,
        };
        let r = qmle_grid_search(&s, &g).unwrap();
        let nearest = (ols / 0.001).round() * 0.001;
        assert!((r.params.rho - nearest).abs() < 1e-9, "{} vs {}", r.params.rho, ols);
    }

    #[test]
    fn per_observation_loglik_at_truth() {
        let p = DarParams { rho: 0.5, alpha: 1.0, beta: 0.5 };
        let s = simulate(&ModelSpec::Dar1(p), 100_000, &[0.0], 5).unwrap();
        let y = s.values_1d().unwrap();
        let ll = dar_quasi_loglik(&p, &s).unwrap() / (y.len() - 1) as f64;
        let e_ln: f64 = y[..y.len() - 1].iter().map(|v| (1.0 + 0.5 * v * v).ln()).sum::<f64>() / (y.len() - 1) as f64;
        assert!((ll + 0.5 * (1.0 + e_ln)).abs() < 0.01, "{ll} vs {}", -0.5 * (1.0 + e_ln));
    }

    #[test]
    fn boundary_flag() {
        let s = simulate(&ModelSpec::dar1(0.5, 1.0, 0.5), 2000, &[0.0], 8).unwrap();
        let inner = qmle_grid_search(&s, &small_grid()).unwrap();
        assert!(!inner.grid_argmax_on_boundary);
        let off = GridSpec {
            lower: [0.7, 0.6, 0.1],
            upper: [0.9, 1.4, 0.9],
            step: 0.05,
        };
        let r = qmle_grid_search(&s, &off).unwrap();
        assert!(r.grid_argmax_on_boundary);
        assert!((r.params.rho - 0.7).abs() < 1e-12);
    }

    #[test]
    fn scale_equivariance() {
        let s = simulate(&ModelSpec::dar1(0.5, 1.0, 0.5), 3000, &[0.0], 13).unwrap();
        let c = 2.0;
        let scaled = s.map(|v| c * v).unwrap();
        let g = GridSpec {
            lower: [0.3, 0.6, 0.2],
            upper: [0.7, 1.4, 0.8],
            step: 0.01,
        };
        let gs = GridSpec {
            lower: [0.3, 0.6 * c * c, 0.2],
            upper: [0.7, 1.4 * c * c, 0.8],
            step: 0.01,
        };
        let a = qmle_grid_search(&s, &g).unwrap().params;
        let b = qmle_grid_search(&scaled, &gs).unwrap().params;
        assert!((a.rho - b.rho).abs() <= 0.011);
        assert!((a.alpha - b.alpha / (c * c)).abs() <= 0.011);
        assert!((a.beta - b.beta).abs() <= 0.011);
    }

    #[test]
    fn objective_falls_away_from_true_rho() {
        let p = DarParams { rho: 0.5, alpha: 1.0, beta: 0.5 };
        let s = simulate(&ModelSpec::Dar1(p), 20_000, &[0.0], 2).unwrap();
        let at = |rho| dar_quasi_loglik(&DarParams { rho, ..p }, &s).unwrap();
        assert!(at(0.5) > at(0.3) && at(0.3) > at(0.1));
        assert!(at(0.5) > at(0.7) && at(0.7) > at(0.9));
    }

    #[test]
    fn univariate_only() {
        let s = TimeSeries::new(vec![0.0; 6], 2, "x").unwrap();
        assert!(qmle_grid_search(&s, &small_grid()).is_err());
    }
}
