use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

/// One CSV file's worth of rows.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Table { name: name.into(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Result of a command: tables plus the headline numbers for the manifest.
pub struct Outcome {
    pub tables: Vec<Table>,
    /// `None` for commands that verify nothing.
    pub pass: Option<bool>,
    pub summary: Value,
}

/// Cell text for a float; shortest round-trip form, so reruns are byte-identical.
pub fn f(v: f64) -> String {
    format!("{v}")
}

pub fn b(v: bool) -> String {
    v.to_string()
}

pub fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|k| format!("{prefix}{k}")).collect()
}

pub fn coords(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| f(*x)).collect()
}

fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every table and `manifest.json` into the output directory.
pub fn write_outputs(
    command: &str,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    threads: usize,
    wall_time: f64,
) -> Result<Vec<PathBuf>> {
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut written = Vec::new();
    for t in &outcome.tables {
        let path = dir.join(format!("{}.csv", t.name));
        write_csv(&path, t)?;
        written.push(path);
    }
    let manifest = json!({
        "command": command,
        "config": cfg,
        "seed": cfg.seed,
        "versions": { "sheetcap": env!("CARGO_PKG_VERSION") },
        "threads": threads,
        "wall_time_s": wall_time,
        "outputs": outcome.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
        "pass": outcome.pass,
        "summary": outcome.summary,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    written.push(path);
    Ok(written)
}
