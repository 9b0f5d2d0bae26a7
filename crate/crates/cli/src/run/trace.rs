//! Negativity time traces over a few modulation periods, with the
//! unmodulated reference added automatically.

use std::path::Path;

use entangle_core::entanglement::NegativityTrace;
use entangle_core::pipeline::{solve_point, PointStatus};
use entangle_core::{Model, SystemParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{finite, fmt_f64, provenance, write_csv, write_json, CsvTable};
use crate::run::Report;
use crate::CliError;

/// Fundamental period of a periodic sample sequence, in samples.
///
/// Uses the circular autocorrelation: after the correlation first drops below
/// `1 − tol`, the first lag at which it climbs back above is the period.
/// Returns `None` for a constant signal.
pub fn fundamental_lag(samples: &[f64], tol: f64) -> Option<usize> {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let energy: f64 = dev.iter().map(|d| d * d).sum();
    let scale = samples.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if !(energy > 1e-24 * n as f64 * scale * scale) {
        return None;
    }
    let r = |lag: usize| (0..n).map(|i| dev[i] * dev[(i + lag) % n]).sum::<f64>() / energy;
    let mut left = false;
    for lag in 1..n {
        let c = r(lag);
        if !left {
            left = c < 1.0 - tol;
        } else if c >= 1.0 - tol {
            return Some(lag);
        }
    }
    Some(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub g1: f64,
    pub reference: bool,
    pub status: &'static str,
    pub mean_c: Option<f64>,
    pub mean_u: Option<f64>,
    pub max_u: Option<f64>,
    pub min_u: Option<f64>,
    /// Fundamental period of `E_N^u(t)` in units of the modulation period;
    /// `None` when the trace is flat.
    pub period_ratio_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Option<NegativityTrace>,
}

/// Amplitudes to trace: the reference `g₁ = 0` first, then the configured
/// values in order without duplicates.
pub fn amplitudes(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut out = vec![0.0];
    for g in cfg.trace.as_ref().map(|t| t.g1.as_slice()).unwrap_or_default() {
        if !out.contains(g) {
            out.push(*g);
        }
    }
    out
}

pub fn compute(cfg: &ExperimentConfig) -> Result<Vec<TraceSummary>, CliError> {
    cfg.trace.as_ref().ok_or_else(|| CliError::Usage("config has no [trace] section".into()))?;
    let opts = cfg.solver.options();
    let mode = cfg.solver.average_mode();
    let base = cfg.system_params();
    Ok(amplitudes(cfg)
        .par_iter()
        .map(|&g1| {
            let params = SystemParams { g1, ..base };
            let solved = Model::new(params).and_then(|m| solve_point(&m, &opts, mode));
            match solved {
                Ok(p) => {
                    let t = p.trace;
                    TraceSummary {
                        g1,
                        reference: g1 == 0.0,
                        status: PointStatus::Converged.as_str(),
                        mean_c: finite(t.mean_c),
                        mean_u: finite(t.mean_u),
                        max_u: finite(t.max_u),
                        min_u: finite(t.e_n_u.iter().copied().fold(f64::INFINITY, f64::min)),
                        period_ratio_u: fundamental_lag(&t.e_n_u, 1e-9).map(|l| l as f64 / t.e_n_u.len() as f64),
                        error: None,
                        trace: Some(t),
                    }
                }
                Err(e) => TraceSummary {
                    g1,
                    reference: g1 == 0.0,
                    status: PointStatus::from_error(&e).as_str(),
                    mean_c: None,
                    mean_u: None,
                    max_u: None,
                    min_u: None,
                    period_ratio_u: None,
                    error: Some(e.to_string()),
                    trace: None,
                },
            }
        })
        .collect())
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let traces = compute(cfg)?;
    let periods = cfg.trace.as_ref().map_or(1, |t| t.periods);
    let mut table = CsvTable::new(&["g1", "t", "t_over_period", "e_n_c", "e_n_u"]);
    for s in &traces {
        let Some(t) = &s.trace else { continue };
        let n = t.times.len();
        let period = cfg.system_params().period().unwrap_or(f64::NAN);
        for k in 0..=periods * n {
            let i = k % n;
            let time = (k / n) as f64 * period + t.times[i];
            table.push(vec![
                fmt_f64(s.g1),
                fmt_f64(time),
                fmt_f64(time / period),
                fmt_f64(t.e_n_c[i]),
                fmt_f64(t.e_n_u[i]),
            ]);
        }
    }
    let prefix = cfg.prefix();
    let csv = write_csv(&out.join(format!("{prefix}.csv")), &provenance(cfg, &[]), &table)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        mode: &'static str,
        seed: u64,
        g0: f64,
        omega_mod: f64,
        traces: &'a [TraceSummary],
    }
    let json = write_json(
        &out.join(format!("{prefix}.json")),
        &Summary { mode: "trace", seed: cfg.seed, g0: cfg.params.g0, omega_mod: cfg.params.omega_mod, traces: &traces },
    )?;
    let message = traces
        .iter()
        .map(|s| match (s.mean_u, s.max_u) {
            (Some(m), Some(x)) => format!("g1={}: mean_u={m:.4} max_u={x:.4}", s.g1),
            _ => format!("g1={}: {}", s.g1, s.status),
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Report { files: vec![csv, json], message })
}
