//! Output files stamped with the config hash, plus the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Manifest, OutputEntry, RunConfig, FORMAT_VERSION};
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Numbers are written with 17 significant digits; missing values are empty.
pub fn num(x: f64) -> String {
    nlirf::io::format_f64(x)
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Outputs {
    dir: PathBuf,
    config_sha256: String,
    entries: Vec<OutputEntry>,
}

impl Outputs {
    pub fn new(dir: &Path, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let canonical = serde_json::to_vec(config).map_err(|e| CliError::new("config", e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_sha256: sha256_hex(&canonical),
            entries: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        self.entries.push(OutputEntry {
            file: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// CSV with a `# manifest-sha256:` comment line ahead of the header.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut bytes = format!("# manifest-sha256: {}\n", self.config_sha256).into_bytes();
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut bytes);
            let fail = |e: csv::Error| CliError::new("io", e.to_string());
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(row).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::new("io", e.to_string()))?;
        }
        self.write(name, bytes)
    }

    /// JSON object `{"manifest_sha256": ..., "result": value}`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            manifest_sha256: &'a str,
            result: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Stamped {
            manifest_sha256: &self.config_sha256,
            result: value,
        })
        .map_err(|e| CliError::new("io", e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, bytes)
    }

    /// Writes `manifest.json` listing every output with its digest.
    pub fn finish(self, subcommand: &str, config: RunConfig, input_sha256: Option<String>) -> Result<(), CliError> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            config_sha256: self.config_sha256,
            input_sha256,
            config,
            outputs: self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::new("io", e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }
}
