// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned JSON reports and atomic file output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use selfnorm_cpd::statistics::extended_real;
use selfnorm_cpd::{EstimateResult, TestReport};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the analysed series came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    pub n: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tau_hat: usize,
    /// Label of observation `tau_hat` when the input has a label column.
    pub label: Option<String>,
    #[serde(with = "extended_real")]
    pub objective: f64,
    #[serde(with = "extended_real")]
    pub runner_up_gap: f64,
}

impl EstimateReport {
    pub fn new(estimate: EstimateResult, label: Option<String>) -> Self {
        Self {
            tau_hat: estimate.tau_hat,
            label,
            objective: estimate.objective,
            runner_up_gap: estimate.runner_up_gap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliReport {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    pub input: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateReport>,
}

impl CliReport {
    pub fn new(command: &str, input: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input,
            test: None,
            estimate: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn infinite_objective_round_trips() {
        let mut report = CliReport::new(
            "estimate",
            Provenance {
                path: "x.csv".into(),
                n: 6,
                sha256: "00".into(),
            },
        );
        report.estimate = Some(EstimateReport {
            tau_hat: 3,
            label: None,
            objective: f64::INFINITY,
            runner_up_gap: f64::INFINITY,
        });
        let json = report.to_json().unwrap();
        let back: CliReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
