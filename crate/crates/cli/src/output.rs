//! CSV with a commented provenance header, and JSON summaries.
//!
//! Nothing time- or host-dependent goes into either file, so reruns with the
//! same config and seed are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use entangle_core::riccati::SolverOptions;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:?}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `None` for non-finite values so JSON stays valid.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Header lines: tool identity, the resolved config, then the numerical
/// tolerances that are not part of the config file.
pub fn provenance(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let opts = cfg.solver.options();
    let defaults = SolverOptions::default();
    let mut out = vec![
        ("tool".to_string(), env!("CARGO_PKG_NAME").to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ];
    out.extend(cfg.provenance());
    out.push(("tolerance.overflow_bound".into(), fmt_f64(defaults.overflow_bound)));
    out.push(("tolerance.max_condition".into(), fmt_f64(defaults.max_condition)));
    out.push(("tolerance.psd".into(), fmt_f64(defaults.psd_tol)));
    out.push(("tolerance.periodicity".into(), fmt_f64(opts.tolerance)));
    out.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn write_csv(path: &Path, header: &[(String, String)], table: &CsvTable) -> Result<PathBuf, CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = String::new();
    for (k, v) in header {
        body.push_str(&format!("# {k}={v}\n"));
    }
    body.push_str(&table.columns.join(","));
    body.push('\n');
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    for row in &table.rows {
        w.write_all(row.join(",").as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}
