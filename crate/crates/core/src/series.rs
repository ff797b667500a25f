//! Observed or simulated trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};

/// A `T x n` trajectory stored row-major: row `t` is the state at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    dim: usize,
    /// Where the data came from (a seed description or a file path).
    pub origin: String,
}

impl TimeSeries {
    /// Builds a series from row-major values. Requires at least two rows and
    /// finite entries.
    pub fn new(values: Vec<f64>, dim: usize, origin: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_input("series dimension must be at least 1"));
        }
        if values.len() % dim != 0 {
            return Err(invalid_input(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        if values.len() / dim < 2 {
            return Err(invalid_input("series needs at least 2 observations"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_input(format!(
                "non-finite value at t={}, component {}",
                i / dim + 1,
                i % dim + 1
            )));
        }
        Ok(Self {
            values,
            dim,
            origin: origin.into(),
        })
    }

    pub fn univariate(values: Vec<f64>, origin: impl Into<String>) -> Result<Self> {
        Self::new(values, 1, origin)
    }

    /// Stacks equally long component columns into one series.
    pub fn from_columns(columns: &[Vec<f64>], origin: impl Into<String>) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 {
            return Err(invalid_input("no columns"));
        }
        let len = columns[0].len();
        if columns.iter().any(|c| c.len() != len) {
            return Err(invalid_input("columns have different lengths"));
        }
        let mut values = Vec::with_capacity(len * dim);
        for t in 0..len {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(values, dim, origin)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// The observations of a univariate series, or an error for `n > 1`.
    pub fn values_1d(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(invalid_input(format!(
                "expected a univariate series, got dimension {}",
                self.dim
            )));
        }
        Ok(&self.values)
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.values.iter().map(|&v| f(v)).collect(),
            self.dim,
            self.origin.clone(),
        )
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor.
pub(crate) fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(x);
    if n == 1 {
        return (m, 0.0);
    }
    (m, std_dev(x) / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(TimeSeries::univariate(vec![1.0], "x").is_err());
        assert!(TimeSeries::univariate(vec![1.0, f64::NAN], "x").is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0, 3.0], 2, "x").is_err());
    }

    #[test]
    fn columns_round_trip() {
        let s = TimeSeries::from_columns(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], "x").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.row(1), &[2.0, 5.0]);
        assert_eq!(s.column(1), vec![4.0, 5.0, 6.0]);
        assert!(s.values_1d().is_err());
    }
}
