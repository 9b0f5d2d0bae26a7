//! Ensemble check of the excess-noise covariance `Ξ` against simulated
//! conditional-mean trajectories under feedback.

use std::path::Path;

use entangle_core::pipeline::solve_point;
use entangle_core::trajectories::{
    ensemble_stats_from_samples, simulate_trajectory, NoiseMode, SimulationOptions, Trajectory,
};
use entangle_core::{Model, PhaseSpaceVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NoiseName};
use crate::output::{fmt_f64, provenance, write_csv, write_json, CsvTable};
use crate::run::Report;
use crate::CliError;

const LABELS: [&str; 4] = ["x1", "p1", "x2", "p2"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryCheck {
    pub row: usize,
    pub col: usize,
    pub sample: f64,
    pub expected: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCheck {
    pub phase: usize,
    pub grid_index: usize,
    pub t: f64,
    pub max_abs_z: f64,
    pub entries: Vec<EntryCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub trajectories: usize,
    pub dt: f64,
    pub sample_period: usize,
    pub z_threshold: f64,
    pub max_abs_z: f64,
    pub pass: bool,
    pub phases: Vec<PhaseCheck>,
    #[serde(skip)]
    pub dumped: Vec<Trajectory>,
}

pub fn compute(cfg: &ExperimentConfig, dump: bool) -> Result<MonteCarloResult, CliError> {
    let mc = cfg.montecarlo.as_ref().ok_or_else(|| CliError::Usage("config has no [montecarlo] section".into()))?;
    let model = Model::new(cfg.system_params())?;
    let opts = cfg.solver.options();
    let point = solve_point(&model, &opts, cfg.solver.average_mode())?;
    let sol = &point.solution;
    let n = sol.n_steps;
    let h = sol.step();
    let grid: Vec<usize> = (0..mc.phases).map(|p| p * n / mc.phases).collect();
    let sim = SimulationOptions {
        n_periods: mc.burn_in_periods + 1,
        dt: h / mc.substeps as f64,
        initial: PhaseSpaceVector::zeros(),
        noise: match mc.noise {
            NoiseName::Gaussian => NoiseMode::Gaussian,
            NoiseName::Zero => NoiseMode::Zero,
        },
    };
    let keep = if dump { mc.dump_count.min(mc.trajectories) } else { 0 };

    let runs: Vec<(Vec<PhaseSpaceVector>, Option<Trajectory>)> = (0..mc.trajectories)
        .into_par_iter()
        .map(|i| {
            let traj = simulate_trajectory(&model, sol, cfg.seed, i as u64, &sim)?;
            let picks = grid
                .iter()
                .map(|&g| *traj.at(mc.burn_in_periods, g).expect("trajectory spans the sample period"))
                .collect();
            Ok((picks, (i < keep).then_some(traj)))
        })
        .collect::<Result<_, entangle_core::Error>>()?;

    let mut phases = Vec::with_capacity(grid.len());
    for (p, &g) in grid.iter().enumerate() {
        let samples: Vec<PhaseSpaceVector> = runs.iter().map(|(s, _)| s[p]).collect();
        let stats = ensemble_stats_from_samples(&samples)?;
        let xi = &point.xi.samples[g];
        let mut entries = Vec::new();
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in a..4 {
                let stderr = stats.stderr_cov[(a, b)];
                let z = (stats.cov[(a, b)] - xi[(a, b)]) / stderr.max(f64::MIN_POSITIVE);
                worst = worst.max(z.abs());
                entries.push(EntryCheck { row: a, col: b, sample: stats.cov[(a, b)], expected: xi[(a, b)], stderr, z });
            }
        }
        phases.push(PhaseCheck { phase: p, grid_index: g, t: g as f64 * h, max_abs_z: worst, entries });
    }
    let max_abs_z = phases.iter().map(|p| p.max_abs_z).fold(0.0, f64::max);
    Ok(MonteCarloResult {
        trajectories: mc.trajectories,
        dt: sim.dt,
        sample_period: mc.burn_in_periods,
        z_threshold: mc.z_threshold,
        max_abs_z,
        pass: max_abs_z < mc.z_threshold,
        phases,
        dumped: runs.into_iter().filter_map(|(_, t)| t).collect(),
    })
}

pub fn run(cfg: &ExperimentConfig, out: &Path, dump: bool) -> Result<Report, CliError> {
    let result = compute(cfg, dump)?;
    let prefix = cfg.prefix();
    let header = provenance(cfg, &[("montecarlo.dt", fmt_f64(result.dt))]);
    let mut table = CsvTable::new(&["phase", "t", "entry", "sample_cov", "xi", "stderr", "z"]);
    for p in &result.phases {
        for e in &p.entries {
            table.push(vec![
                p.phase.to_string(),
                fmt_f64(p.t),
                format!("{}{}", LABELS[e.row], LABELS[e.col]),
                fmt_f64(e.sample),
                fmt_f64(e.expected),
                fmt_f64(e.stderr),
                fmt_f64(e.z),
            ]);
        }
    }
    let mut files = vec![write_csv(&out.join(format!("{prefix}.csv")), &header, &table)?];

    if dump {
        let mut traj = CsvTable::new(&["trajectory", "t", "x1", "p1", "x2", "p2"]);
        for t in &result.dumped {
            for (k, x) in t.samples.iter().enumerate() {
                traj.push(vec![
                    t.index.to_string(),
                    fmt_f64(k as f64 * t.grid_step),
                    fmt_f64(x[0]),
                    fmt_f64(x[1]),
                    fmt_f64(x[2]),
                    fmt_f64(x[3]),
                ]);
            }
        }
        files.push(write_csv(&out.join(format!("{prefix}_trajectories.csv")), &header, &traj)?);
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        mode: &'static str,
        seed: u64,
        status: &'static str,
        #[serde(flatten)]
        result: &'a MonteCarloResult,
    }
    let status = if result.pass { "pass" } else { "fail" };
    files.push(write_json(
        &out.join(format!("{prefix}.json")),
        &Summary { mode: "montecarlo", seed: cfg.seed, status, result: &result },
    )?);
    Ok(Report {
        files,
        message: format!(
            "{} trajectories, max |z| = {:.3} (threshold {}): {status}",
            result.trajectories, result.max_abs_z, result.z_threshold
        ),
    })
}
