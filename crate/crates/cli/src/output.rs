//! Deterministic file output: fixed-width scientific notation for numbers,
//! sorted-key JSON, and a small registry of what was written so the manifest
//! can list it.

use std::path::{Path, PathBuf};

use crate::CliResult;

/// 17 significant digits: enough to round-trip any f64 exactly, so reruns of
/// a deterministic computation produce byte-identical files.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Render a numeric table column-major into CSV text.
pub fn csv_numeric(header: &str, columns: &[&[f64]]) -> String {
    let rows = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == rows));
    let mut text = String::with_capacity(rows * columns.len() * 24 + header.len() + 2);
    text.push_str(header);
    text.push('\n');
    for i in 0..rows {
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&fmt_f64(col[i]));
        }
        text.push('\n');
    }
    text
}

/// Output directory plus the list of files written into it so far.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputSet {
    /// Create the directory (and parents) on first use. Callers run their
    /// computation *before* constructing the set, so failed runs leave no
    /// half-written output tree behind.
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> CliResult<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .expect("JSON values built here are always serializable");
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
