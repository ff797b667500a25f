//! `nlirf`: run the estimators from a JSON config and write plot-ready CSV.
//!
//! Every run writes its outputs plus `manifest.json` into `--out`. Passing
//! that manifest back as `--config` reproduces the outputs byte for byte.
//! Failures print one line, `error: kind=<kind> message="<text>"`, and exit
//! with a nonzero status.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{parse_config, RunConfig};
use crate::output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "nlirf", version, about = "Nonparametric impulse responses for nonlinear time series")]
struct Cli {
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Simulate the configured model: trajectory and marginal density.
    Simulate,
    /// DAR(1) quasi-maximum likelihood by grid search.
    Qmle,
    /// Impulse responses by the true, direct and local-projection routes.
    Irf,
    /// Hermite decomposition into linear and nonlinear parts.
    Decompose,
    /// Mixing matrix of a bivariate series from its autocovariances.
    Identify,
    /// Moment test of the first-order Markov property.
    MarkovTest,
    /// Convergence-rate sweep.
    Bench,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Qmle => "qmle",
            Command::Irf => "irf",
            Command::Decompose => "decompose",
            Command::Identify => "identify",
            Command::MarkovTest => "markov-test",
            Command::Bench => "bench",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    kind: String,
    message: String,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }
}

impl From<nlirf::Error> for CliError {
    fn from(e: nlirf::Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Debug formatting quotes the message and escapes newlines, keeping it on one line.
        write!(f, "error: kind={} message={:?}", self.kind, self.message)
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let (cfg, recorded) = parse_config(&text).map_err(|m| CliError::new("config", format!("{}: {m}", path.display())))?;
            if let Some(sub) = recorded {
                if sub != cli.command.name() {
                    return Err(CliError::new(
                        "config",
                        format!("manifest was written by `{sub}`, not `{}`", cli.command.name()),
                    ));
                }
            }
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let mut out = Outputs::new(&cli.out, &cfg)?;
    let input_sha256 = match cli.command {
        Command::Simulate => commands::simulate(&cfg, &mut out)?,
        Command::Qmle => commands::qmle(&cfg, &mut out)?,
        Command::Irf => commands::irf(&cfg, &mut out)?,
        Command::Decompose => commands::decompose(&cfg, &mut out)?,
        Command::Identify => commands::identify(&cfg, &mut out)?,
        Command::MarkovTest => commands::markov_test(&cfg, &mut out)?,
        Command::Bench => commands::bench(&cfg, &mut out)?,
    };
    out.finish(cli.command.name(), cfg, input_sha256)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            eprintln!("{}", CliError::new("usage", first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
