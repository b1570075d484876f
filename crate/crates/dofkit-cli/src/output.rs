//! Deterministic artifact writers: CSV with pinned float formatting and
//! LF line endings, plus the per-run record.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Every CSV row starts with this schema version; bump on column changes.
pub const CSV_SCHEMA: u32 = 1;

/// 17 significant digits, enough to round-trip any f64 byte-exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table accumulated in memory and written in one shot, so repeated
/// runs produce byte-identical files.
pub struct Csv {
    lines: Vec<String>,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut cols = vec!["schema".to_string()];
        cols.extend(header.iter().map(|s| s.to_string()));
        Csv {
            columns: cols.len(),
            lines: vec![cols.join(",")],
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len() + 1, self.columns, "csv row width mismatch");
        let mut row = vec![CSV_SCHEMA.to_string()];
        row.extend_from_slice(cells);
        self.lines.push(row.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub config_sha256: String,
    pub toolkit_version: String,
    pub wall_time_ms: u128,
    pub artifacts: Vec<String>,
}

pub fn config_hash(raw: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw);
    format!("{:x}", hasher.finalize())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn artifact(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}
