//! `RunConfig`: the single description of a run, filled either from command
//! line flags or from a JSON file (`cmj run --config run.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Simulate,
    Certify,
    Couple,
    Probe,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum CertKind {
    /// Convergent reciprocal series.
    #[serde(rename = "i")]
    #[value(name = "i")]
    I,
    /// Window-sum condition, optionally through a majorant.
    #[serde(rename = "ii")]
    #[value(name = "ii")]
    Ii,
    /// Bound chain for the pathological rates.
    #[serde(rename = "iii")]
    #[value(name = "iii")]
    Iii,
    /// Exact against asymptotic window sums for `iterlog:c,k`.
    #[serde(rename = "window")]
    #[value(name = "window")]
    Window,
}

/// Descriptor strings (`rates`, `weight`, `majorant`) use the same syntax
/// as the command line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub rates: Option<String>,
    pub weight: Option<String>,
    pub majorant: Option<String>,
    pub count: Option<u64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub cert: Option<CertKind>,
    pub eps: Option<f64>,
    pub imax: Option<u64>,
    pub grid_min: Option<u64>,
    pub grid_max: Option<u64>,
    pub per_decade: Option<u32>,
    /// `c,p` for the termwise minorant `λ_i >= c i^p`.
    pub minorant: Option<String>,
    pub attempts: Option<usize>,
    pub n: Option<u32>,
    pub horizons: Option<Vec<f64>>,
    pub cap: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("config {} line {} column {}: {e}", path.display(), e.line(), e.column()))
        })
    }

    pub fn command(&self) -> CliResult<CommandKind> {
        self.command.ok_or_else(|| missing("command"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| missing("seed"))
    }

    pub fn rates(&self) -> CliResult<&str> {
        self.rates.as_deref().ok_or_else(|| missing("rates"))
    }
}

pub fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing required field '{field}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_name_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "{\n  \"command\": \"simulate\",\n  \"sead\": 3\n}").unwrap();
        let e = RunConfig::from_file(&p).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("sead"), "{e}");
        std::fs::write(&p, r#"{"command":"certify","cert":"iii","imax":40}"#).unwrap();
        let c = RunConfig::from_file(&p).unwrap();
        assert_eq!(c.cert, Some(CertKind::Iii));
        assert!(c.seed().is_err());
    }
}
