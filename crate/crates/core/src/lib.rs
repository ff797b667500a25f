//! Nonparametric impulse responses for nonlinear time series.
//!
//! A stationary Markov process can be written as `y_t = g(y_{t-1}; eps_t)`
//! with `g(y; e) = Q[Phi(e) | y]`, the conditional quantile function evaluated
//! at a Gaussian probability level. Estimating that quantile with kernels
//! gives a fully nonparametric one-step map, from which impulse responses are
//! obtained by paired simulation ([`irf_engine`]), and decomposed into linear
//! and nonlinear parts by Hermite projection ([`hermite_decomp`]).
//!
//! Modules:
//!
//! * [`model_zoo`] — data-generating processes with known truth
//! * [`kernel_lab`] — kernel density, conditional CDF/quantile, Nadaraya-Watson
//! * [`qmle_dar`] — grid-search quasi-likelihood for DAR(1)
//! * [`irf_engine`] — direct and local-projection IRF estimators
//! * [`hermite_decomp`] — Hermite expansion of simulated responses
//! * [`ident_suite`] — mixing recovery from autocovariances, Markov moment test
//! * [`rate_bench`] — Monte Carlo convergence sweeps
//! * [`io`] — CSV ingestion and output

pub mod curve;
pub mod error;
pub mod hermite_decomp;
pub mod ident_suite;
pub mod io;
pub mod irf_engine;
pub mod kernel_lab;
pub mod model_zoo;
pub mod qmle_dar;
pub mod rate_bench;
pub mod rng;
pub mod series;
pub mod stats;

pub use curve::{IrfCurve, Route};
pub use error::{Error, Result};
pub use model_zoo::ModelSpec;
pub use series::TimeSeries;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub mod kernels {}
    #[doc = include_str!("../../../book/src/impulse_responses.md")]
    pub mod impulse_responses {}
    #[doc = include_str!("../../../book/src/hermite.md")]
    pub mod hermite {}
    #[doc = include_str!("../../../book/src/qmle.md")]
    pub mod qmle {}
    #[doc = include_str!("../../../book/src/identification.md")]
    pub mod identification {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
