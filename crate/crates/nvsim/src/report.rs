//! Run artifacts: diffable CSV outputs and JSON manifests.
//!
//! Every CLI run writes its numeric outputs as CSV (header row, `.` decimal,
//! scientific notation, 9 significant digits) plus a manifest recording what
//! produced them. Identical inputs produce byte-identical CSVs regardless of
//! thread count or platform.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::error::NvError;

/// Format one value the way every CSV cell is written: scientific notation
/// with 9 significant digits.
pub fn csv_cell(v: f64) -> String {
    format!("{v:.8e}")
}

/// Write a CSV file with a header row and fixed-format numeric cells.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), NvError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        assert_eq!(
            row.len(),
            header.len(),
            "row width must match the header"
        );
        let cells: Vec<String> = row.iter().map(|&v| csv_cell(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a CSV file whose cells are preformatted strings (for tables that mix
/// labels with numbers; numeric cells should go through [`csv_cell`]).
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), NvError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        assert_eq!(
            row.len(),
            header.len(),
            "row width must match the header"
        );
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Stable 64-bit fingerprint of a configuration, as recorded in manifests.
pub fn config_hash(cfg: &Config) -> String {
    cfg.fingerprint()
}

/// Record of one CLI run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub version: String,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        cfg: &Config,
        seed: u64,
        outputs: &[PathBuf],
        wall_time_s: f64,
    ) -> RunManifest {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_hash: config_hash(cfg),
            seed,
            outputs: outputs
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect(),
            wall_time_s,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), NvError> {
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// Manifest location for a given primary output: `scan.pgm` →
/// `scan.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
