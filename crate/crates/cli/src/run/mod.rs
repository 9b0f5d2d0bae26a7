//! One runner per subcommand. Each computes in the ambient rayon pool and
//! writes its CSV and JSON files under the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Mode};
use crate::CliError;

pub mod boundary;
pub mod map;
pub mod montecarlo;
pub mod solve;
pub mod trace;

#[derive(Debug, Clone)]
pub struct Report {
    pub files: Vec<PathBuf>,
    /// One-line human summary.
    pub message: String,
}

pub fn status_counts<'a>(statuses: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut counts = BTreeMap::new();
    for s in statuses {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}

pub fn run(cfg: &ExperimentConfig, out: &Path, dump_trajectories: bool) -> Result<Report, CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    match cfg.mode {
        Mode::Map => map::run(cfg, out),
        Mode::Boundary => boundary::run(cfg, out),
        Mode::Trace => trace::run(cfg, out),
        Mode::Montecarlo => montecarlo::run(cfg, out, dump_trajectories),
        Mode::Solve => solve::run(cfg, out),
    }
}
