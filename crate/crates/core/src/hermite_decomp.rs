//! Hermite polynomials and the decomposition of impulse responses by degree
//! of nonlinearity.
//!
//! Polynomials follow the probabilists' convention: `He_0 = 1`, `He_1 = x`,
//! `He_{j+1}(x) = x He_j(x) - j He_{j-1}(x)`, orthogonal under the standard
//! normal with `E[He_j(e)^2] = j!`.
//!
//! If `M(eps)` is a simulated outcome driven by the first-step innovation,
//! then `E[M(eps + delta) - M(eps)] = sum_{j>=1} delta^j / j! E[M He_j]`. The
//! decomposition estimates `beta_j = E[M He_j] / j!` by least squares of `M`
//! on `He_0..He_J` and reports `c_j = beta_j delta^j`: `c_1` is the linear
//! part of the response and `c_2 + ... + c_J` the nonlinear part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid_input, Error, Result};

pub const DEFAULT_DEGREE: usize = 5;

/// `He_j(x)`.
pub fn hermite(j: usize, x: f64) -> f64 {
    match j {
        0 => 1.0,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..j {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `He_0(x), ..., He_J(x)`.
pub fn hermite_all(max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(1.0);
    if max_degree >= 1 {
        out.push(x);
    }
    for k in 1..max_degree {
        out.push(x * out[k] - k as f64 * out[k - 1]);
    }
    out
}

/// `S x (J+1)` matrix with column `j` equal to `He_j(eps)`.
pub fn hermite_design(eps: &[f64], max_degree: usize) -> Result<DMatrix<f64>> {
    if max_degree < 1 {
        return Err(invalid_input("Hermite degree must be at least 1"));
    }
    if eps.len() <= max_degree + 1 {
        return Err(invalid_input(format!(
            "need more than {} draws for degree {max_degree}, got {}",
            max_degree + 1,
            eps.len()
        )));
    }
    ensure_finite(eps, "innovation draws")?;
    let cols = max_degree + 1;
    let mut m = DMatrix::zeros(eps.len(), cols);
    for (i, &e) in eps.iter().enumerate() {
        for (j, v) in hermite_all(max_degree, e).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteDecomposition {
    pub horizon: usize,
    pub delta: f64,
    /// `beta_0, ..., beta_J`.
    pub coefficients: Vec<f64>,
    pub coefficient_se: Vec<f64>,
    /// `c_1, ..., c_J` (index `j - 1`).
    pub contributions: Vec<f64>,
    pub linear_part: f64,
    pub nonlinear_part: f64,
    /// Always `linear_part + nonlinear_part`.
    pub reconstructed_total: f64,
    pub linear_se: f64,
    pub nonlinear_se: f64,
    pub total_se: f64,
    /// Standard deviation of the regression residuals.
    pub residual_se: f64,
    /// The impulse response estimated directly, when supplied for comparison.
    pub reference_irf: Option<f64>,
}

impl HermiteDecomposition {
    pub fn max_degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn with_reference(mut self, irf: f64) -> Self {
        self.reference_irf = Some(irf);
        self
    }
}

/// Least-squares Hermite decomposition of `outputs` (simulated values at
/// horizon `h`) against the first-step innovations `eps` that produced them.
pub fn decompose_irf(
    outputs: &[f64],
    eps: &[f64],
    delta: f64,
    max_degree: usize,
    horizon: usize,
) -> Result<HermiteDecomposition> {
    if outputs.len() != eps.len() {
        return Err(invalid_input("outputs and innovations differ in length"));
    }
    if !delta.is_finite() {
        return Err(invalid_input("shock size must be finite"));
    }
    ensure_finite(outputs, "simulated outputs")?;
    let x = hermite_design(eps, max_degree)?;
    let (s, p) = x.shape();

    let qr = x.qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(i) = (0..p).find(|&i| !(r[(i, i)].abs() >= 1e-10 * max_diag)) {
        return Err(Error::RankDeficient(format!(
            "Hermite column {i} is numerically dependent on lower degrees"
        )));
    }
    let mut qty = DVector::from_column_slice(outputs);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;

    let y = DVector::from_column_slice(outputs);
    let resid = &y - qr_design_times(eps, max_degree, &beta);
    let dof = (s - p) as f64;
    let sigma2 = resid.norm_squared() / dof;

    // Cov(beta) = sigma^2 (R'R)^{-1} = sigma^2 R^{-1} R^{-T}
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient("triangular inverse failed".into()))?;
    let cov = (&r_inv * r_inv.transpose()) * sigma2;

    let weights = |range: std::ops::RangeInclusive<usize>| {
        let mut d = DVector::zeros(p);
        for j in range {
            d[j] = delta.powi(j as i32);
        }
        d
    };
    let lin_se = (cov[(1, 1)] * delta * delta).sqrt();
    let se_of = |d: DVector<f64>| (d.transpose() * &cov * &d)[(0, 0)].max(0.0).sqrt();

    let contributions: Vec<f64> = (1..p).map(|j| beta[j] * delta.powi(j as i32)).collect();
    let linear_part = contributions[0];
    let nonlinear_part: f64 = contributions[1..].iter().sum();
    Ok(HermiteDecomposition {
        horizon,
        delta,
        coefficients: beta.as_slice().to_vec(),
        coefficient_se: (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        contributions,
        linear_part,
        nonlinear_part,
        reconstructed_total: linear_part + nonlinear_part,
        linear_se: lin_se,
        nonlinear_se: se_of(weights(2..=max_degree)),
        total_se: se_of(weights(1..=max_degree)),
        residual_se: sigma2.sqrt(),
        reference_irf: None,
    })
}

fn qr_design_times(eps: &[f64], max_degree: usize, beta: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        eps.len(),
        eps.iter().map(|&e| {
            hermite_all(max_degree, e)
                .iter()
                .zip(beta.iter())
                .map(|(h, b)| h * b)
                .sum::<f64>()
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normals, substream};
    use approx::assert_relative_eq;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    // Closed-form expansion of the Rodrigues formula:
    // He_n(x) = n! sum_m (-1)^m x^(n-2m) / (m! (n-2m)! 2^m).
    fn rodrigues(n: usize, x: f64) -> f64 {
        (0..=n / 2)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(n) / (factorial(m) * factorial(n - 2 * m) * 2f64.powi(m as i32))
                    * x.powi((n - 2 * m) as i32)
            })
            .sum()
    }

    #[test]
    fn table_values() {
        assert_eq!(hermite(2, 0.0), -1.0);
        assert_eq!(hermite(5, 1.0), 6.0);
        assert_eq!(hermite(3, 2.0), 2.0);
        assert_eq!(hermite(0, 7.0), 1.0);
    }

    #[test]
    fn recurrence_matches_expansion() {
        for i in 0..=100 {
            let x = -4.0 + 0.08 * i as f64;
            let all = hermite_all(8, x);
            for j in 0..=8 {
                let a = hermite(j, x);
                assert_eq!(a, all[j]);
                assert!((a - rodrigues(j, x)).abs() <= 1e-9 * (1.0 + a.abs()), "j={j} x={x}");
            }
        }
    }

    #[test]
    fn design_shape_and_rank_checks() {
        let eps = standard_normals(&mut substream(1, 0), 50);
        let d = hermite_design(&eps, 3).unwrap();
        assert_eq!(d.shape(), (50, 4));
        assert!(d.column(0).iter().all(|&v| v == 1.0));
        assert!(hermite_design(&eps[..4], 3).is_err());
        assert!(hermite_design(&eps, 0).is_err());
        // three distinct values cannot support a cubic
        let dup: Vec<f64> = (0..30).map(|i| [-1.0, 0.0, 1.0][i % 3]).collect();
        let outputs = vec![0.0; 30];
        let err = decompose_irf(&outputs, &dup, 1.0, 3, 1).unwrap_err();
        assert_eq!(err.kind(), "rank_deficient");
    }

    #[test]
    fn gram_and_means() {
        let s = 100_000;
        let eps = standard_normals(&mut substream(2, 0), s);
        let d = hermite_design(&eps, 5).unwrap();
        for i in 0..=5 {
            for j in 0..=5 {
                // entrywise sample mean of He_i He_j, judged against its own standard error
                let prods: Vec<f64> = d.column(i).iter().zip(d.column(j).iter()).map(|(a, b)| a * b).collect();
                let (g, se) = crate::series::mean_and_se(&prods);
                let target = if i == j { factorial(i) } else { 0.0 };
                assert!((g - target).abs() <= 4.0 * se + 1e-12, "({i},{j}) {g} se {se}");
            }
            if i >= 1 {
                let mean = d.column(i).mean();
                assert!(mean.abs() < 3.0 / (s as f64 / factorial(i)).sqrt(), "mean of column {i}: {mean}");
            }
        }
    }

    #[test]
    fn polynomial_outputs_are_recovered_exactly() {
        let eps = standard_normals(&mut substream(3, 0), 200);
        // M = 2 + 3 He_1 + 0.5 He_2
        let out: Vec<f64> = eps.iter().map(|&e| 2.0 + 3.0 * e + 0.5 * (e * e - 1.0)).collect();
        let dec = decompose_irf(&out, &eps, 0.4, 4, 1).unwrap();
        assert_relative_eq!(dec.coefficients[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(dec.coefficients[1], 3.0, epsilon = 1e-10);
        assert_relative_eq!(dec.coefficients[2], 0.5, epsilon = 1e-10);
        assert_relative_eq!(dec.linear_part, 1.2, epsilon = 1e-10);
        assert_relative_eq!(dec.nonlinear_part, 0.08, epsilon = 1e-10);
        // exact shift: M(e + d) - M(e) averaged is 3d + 0.5 d^2
        assert_relative_eq!(dec.reconstructed_total, 1.2 + 0.08, epsilon = 1e-10);
        assert_eq!(dec.reconstructed_total, dec.linear_part + dec.nonlinear_part);
    }

    #[test]
    fn linear_outputs_have_no_nonlinear_part() {
        let s = 20_000;
        let mut rng = substream(4, 0);
        let e1 = standard_normals(&mut rng, s);
        let e2 = standard_normals(&mut rng, s);
        let (rho, sigma, y0, delta) = (0.5, 1.3, 0.7, 0.8);
        // h = 2 outputs of a Gaussian AR(1)
        let out: Vec<f64> = e1
            .iter()
            .zip(&e2)
            .map(|(a, b)| rho * (rho * y0 + sigma * a) + sigma * b)
            .collect();
        let dec = decompose_irf(&out, &e1, delta, 5, 2).unwrap();
        assert!(dec.nonlinear_part.abs() < 3.0 * dec.nonlinear_se, "{dec:?}");
        assert!((dec.linear_part - rho * sigma * delta).abs() < 3.0 * dec.linear_se);
    }

    #[test]
    fn population_identity_on_nonlinear_model() {
        // y1 = 0.6 tanh(y0) + e1, y2 = 0.6 tanh(y1) + e2; M(e1) = E[y2 | e1] = 0.6 tanh(y1)
        let m = |x: f64| 0.6 * x.tanh();
        let y0 = 0.3;
        let s = 200_000;
        let mut rng = substream(5, 0);
        let e1 = standard_normals(&mut rng, s);
        let e2 = standard_normals(&mut rng, s);
        let out: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| m(m(y0) + a) + b).collect();
        let dec = decompose_irf(&out, &e1, 1.0, 5, 2).unwrap();

        let n = 1_000_000;
        let f = standard_normals(&mut substream(6, 0), n);
        for j in 1..=3 {
            let terms: Vec<f64> = f.iter().map(|&e| m(m(y0) + e) * hermite(j, e)).collect();
            let (mean, se) = crate::series::mean_and_se(&terms);
            let est = dec.coefficients[j] * factorial(j);
            let combined = (se * se + (dec.coefficient_se[j] * factorial(j)).powi(2)).sqrt();
            assert!((est - mean).abs() < 3.0 * combined, "j={j}: {est} vs {mean} (se {combined})");
        }
    }

    #[test]
    fn input_validation() {
        let eps = standard_normals(&mut substream(7, 0), 20);
        assert!(decompose_irf(&eps[..10], &eps, 1.0, 2, 1).is_err());
        assert!(decompose_irf(&eps, &eps, f64::NAN, 2, 1).is_err());
    }
}
