//! Run configuration: one JSON object, every section optional.

use std::path::PathBuf;

use nlirf::irf_engine::{BootstrapSpec, DEFAULT_HORIZONS, DEFAULT_REPLICATIONS};
use nlirf::kernel_lab::KernelConfig;
use nlirf::qmle_dar::GridSpec;
use nlirf::rate_bench::Target;
use nlirf::{ModelSpec, Route};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: &str = "1";

/// Stream ids for [`nlirf::rng::derive_seed`]. Each subcommand draws from its
/// own child seed, so adding one never changes another's numbers.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const IRF: u64 = 3;
    pub const DECOMPOSE: u64 = 4;
    pub const MARKOV_TEST: u64 = 6;
    pub const BENCH: u64 = 7;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub qmle: QmleSection,
    #[serde(default)]
    pub irf: IrfSection,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub identify: IdentifySection,
    #[serde(default)]
    pub markov_test: MarkovTestSection,
    #[serde(default)]
    pub bench: Option<BenchSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION.to_string(),
            seed: 0,
            data: DataSource::default(),
            kernel: KernelConfig::default(),
            simulate: SimulateSection::default(),
            qmle: QmleSection::default(),
            irf: IrfSection::default(),
            decompose: DecomposeSection::default(),
            identify: IdentifySection::default(),
            markov_test: MarkovTestSection::default(),
            bench: None,
        }
    }
}

/// Where the series comes from: a CSV file, or a model to simulate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub input: Option<PathBuf>,
    pub model: Option<ModelSpec>,
    pub t_len: usize,
    pub burn_in: usize,
    /// Starting state; zeros when absent.
    pub y0: Option<Vec<f64>>,
}

impl Default for DataSource {
    fn default() -> Self {
        Self {
            input: None,
            model: None,
            t_len: 5_000,
            burn_in: 0,
            y0: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Grid points of the marginal density estimate.
    pub density_points: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { density_points: 200 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmleSection {
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrfSection {
    pub y0: f64,
    pub horizons: usize,
    /// One output file per shock size.
    pub deltas: Vec<f64>,
    pub replications: usize,
    pub bootstrap: Option<BootstrapSpec>,
    /// Add the parametric route: DAR(1) fitted by QMLE, responses in closed form.
    pub qmle_plug_in: bool,
    pub grid: GridSpec,
}

impl Default for IrfSection {
    fn default() -> Self {
        Self {
            y0: 0.0,
            horizons: DEFAULT_HORIZONS,
            deltas: vec![-1.0, -0.5, 0.5, 1.0],
            replications: DEFAULT_REPLICATIONS,
            bootstrap: None,
            qmle_plug_in: false,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub y0: f64,
    pub delta: f64,
    /// Decomposes horizons `1..=horizons`.
    pub horizons: usize,
    pub degree: usize,
    pub replications: usize,
    pub route: Route,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        Self {
            y0: 0.0,
            delta: 0.5,
            horizons: 7,
            degree: nlirf::hermite_decomp::DEFAULT_DEGREE,
            replications: DEFAULT_REPLICATIONS,
            route: Route::Direct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifySection {
    pub max_lag: usize,
}

impl Default for IdentifySection {
    fn default() -> Self {
        Self {
            max_lag: nlirf::ident_suite::DEFAULT_MAX_LAG,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovTestSection {
    /// Defaults to `ceil(T^(1/3))`.
    pub block_len: Option<usize>,
    pub reps: usize,
}

impl Default for MarkovTestSection {
    fn default() -> Self {
        Self {
            block_len: None,
            reps: nlirf::ident_suite::DEFAULT_BOOTSTRAP_REPS,
        }
    }
}

/// A rate sweep; its master seed comes from the run seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub model: ModelSpec,
    pub sample_sizes: Vec<usize>,
    pub seeds: usize,
    pub target: Target,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_bench_replications")]
    pub replications: usize,
}

fn default_bench_replications() -> usize {
    2_000
}

/// What a run leaves behind next to its outputs; feeding it back as
/// `--config` repeats the run exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: String,
    pub subcommand: String,
    /// SHA-256 of the canonical JSON of `config`; stamped on every output.
    pub config_sha256: String,
    /// SHA-256 of the input file, when the data came from one.
    pub input_sha256: Option<String>,
    pub config: RunConfig,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

/// Parses a config file, which may be either a [`RunConfig`] or a manifest.
/// Returns the config and, for manifests, the subcommand it recorded.
pub fn parse_config(text: &str) -> Result<(RunConfig, Option<String>), String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let is_manifest = value.get("config_sha256").is_some() && value.get("config").is_some();
    let (config, sub) = if is_manifest {
        let m: Manifest = serde_json::from_value(value).map_err(|e| e.to_string())?;
        (m.config, Some(m.subcommand))
    } else {
        let c: RunConfig = serde_json::from_value(value).map_err(|e| e.to_string())?;
        (c, None)
    };
    if config.version != FORMAT_VERSION {
        return Err(format!(
            "unsupported config version `{}` (expected `{FORMAT_VERSION}`)",
            config.version
        ));
    }
    Ok((config, sub))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let (c, sub) = parse_config(r#"{"version":"1"}"#).unwrap();
        assert!(sub.is_none());
        assert_eq!(c.irf.deltas, vec![-1.0, -0.5, 0.5, 1.0]);
        assert_eq!(c.decompose.degree, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config(r#"{"version":"1","sed":3}"#).unwrap_err();
        assert!(e.contains("unknown field"), "{e}");
        let e = parse_config(r#"{"version":"1","irf":{"horizon":3}}"#).unwrap_err();
        assert!(e.contains("unknown field"), "{e}");
    }

    #[test]
    fn version_is_checked() {
        assert!(parse_config(r#"{"version":"0"}"#).unwrap_err().contains("version"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"{"version":"1","seed":9,"data":{"model":{"variant":"dar1","rho":0.5,"alpha":1.0,"beta":0.5},"t_len":200}}"#;
        let (c, _) = parse_config(text).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let (again, _) = parse_config(&json).unwrap();
        assert_eq!(serde_json::to_string(&again).unwrap(), json);
    }
}
