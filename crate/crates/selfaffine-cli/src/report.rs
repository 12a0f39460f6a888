//! Output conventions shared by every subcommand.
//!
//! Summaries are `key=value` lines on stdout, floats printed in Rust's
//! shortest round-trip form. Tabular results go to CSV files whose first line
//! is a comment carrying the resolved-config hash, so a result file can
//! always be traced to its exact settings. Nothing emits timestamps: running
//! the same configuration twice produces the same bytes everywhere.

use sha2::{Digest, Sha256};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use selfaffine::Result;

pub struct Reporter {
    out_dir: PathBuf,
    config_hash: String,
}

impl Reporter {
    pub fn new(out_dir: &Path, config_hash: String) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(Reporter { out_dir: out_dir.to_path_buf(), config_hash })
    }

    pub fn hash(&self) -> &str {
        &self.config_hash
    }

    /// One summary line: `key=value`.
    pub fn kv(&self, key: &str, value: impl Display) {
        println!("{key}={value}");
    }

    /// Write a CSV with the config-hash comment and a header row; returns the
    /// path written.
    pub fn csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut text = format!("# config_hash={}\n{header}\n", self.config_hash);
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = self.out_dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Write raw bytes (images); returns path and content hash.
    pub fn binary(&self, name: &str, bytes: &[u8]) -> Result<(PathBuf, String)> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes)?;
        let mut h = Sha256::new();
        h.update(bytes);
        let digest = h.finalize();
        Ok((path, digest.iter().map(|b| format!("{b:02x}")).collect()))
    }
}

/// Shortest round-trip float formatting (explicit helper for CSV rows).
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
