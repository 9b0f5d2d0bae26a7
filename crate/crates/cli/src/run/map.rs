//! Entanglement map over `(g₁, Ω)` at fixed `g₀`.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, fmt_opt, provenance, write_csv, write_json, CsvTable};
use crate::point::{evaluate, PointOutcome};
use crate::run::{status_counts, Report};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct MapPoint {
    pub g1: f64,
    pub omega_mod: f64,
    #[serde(flatten)]
    pub outcome: PointOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapResult {
    pub g1: Vec<f64>,
    pub omega_mod: Vec<f64>,
    /// Row-major with `g1` as the slow index.
    pub points: Vec<MapPoint>,
}

impl MapResult {
    pub fn at(&self, i_g1: usize, i_omega: usize) -> &MapPoint {
        &self.points[i_g1 * self.omega_mod.len() + i_omega]
    }
}

pub fn compute(cfg: &ExperimentConfig) -> Result<MapResult, CliError> {
    let map = cfg.map.as_ref().ok_or_else(|| CliError::Usage("config has no [map] section".into()))?;
    let g1 = map.g1.points();
    let omega = map.omega_mod.points();
    let opts = cfg.solver.options();
    let mode = cfg.solver.average_mode();
    let base = cfg.system_params();
    let points = (0..g1.len() * omega.len())
        .into_par_iter()
        .map(|k| {
            let (a, w) = (g1[k / omega.len()], omega[k % omega.len()]);
            let params = entangle_core::SystemParams { g1: a, omega_mod: w, ..base };
            MapPoint { g1: a, omega_mod: w, outcome: evaluate(&params, &opts, mode, map.conditional_only) }
        })
        .collect();
    Ok(MapResult { g1, omega_mod: omega, points })
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let result = compute(cfg)?;
    let mut table = CsvTable::new(&[
        "g1",
        "omega_mod",
        "status",
        "mean_c",
        "mean_u",
        "max_u",
        "closed_loop_modulus",
        "symplectic_defect",
        "periodicity_defect",
    ]);
    for p in &result.points {
        let o = &p.outcome;
        table.push(vec![
            fmt_f64(p.g1),
            fmt_f64(p.omega_mod),
            o.status.to_string(),
            fmt_opt(o.mean_c),
            fmt_opt(o.mean_u),
            fmt_opt(o.max_u),
            fmt_opt(o.closed_loop_modulus),
            fmt_opt(o.symplectic_defect),
            fmt_opt(o.periodicity_defect),
        ]);
    }
    let prefix = cfg.prefix();
    let header = provenance(cfg, &[("grid.g1.count", result.g1.len().to_string()), ("grid.omega_mod.count", result.omega_mod.len().to_string())]);
    let csv = write_csv(&out.join(format!("{prefix}.csv")), &header, &table)?;

    let counts = status_counts(result.points.iter().map(|p| p.outcome.status));
    let entangled = result.points.iter().filter(|p| p.outcome.mean_c.is_some_and(|e| e > 0.0)).count();
    #[derive(Serialize)]
    struct Summary<'a> {
        mode: &'static str,
        seed: u64,
        counts: &'a std::collections::BTreeMap<&'a str, usize>,
        conditionally_entangled: usize,
        #[serde(flatten)]
        result: &'a MapResult,
    }
    let json = write_json(
        &out.join(format!("{prefix}.json")),
        &Summary { mode: "map", seed: cfg.seed, counts: &counts, conditionally_entangled: entangled, result: &result },
    )?;
    Ok(Report {
        files: vec![csv, json],
        message: format!("{} points, {} conditionally entangled, {counts:?}", result.points.len(), entangled),
    })
}
