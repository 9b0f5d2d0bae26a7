//! Entanglement boundary in `g₀` for a family of modulation amplitudes.
//!
//! For each `(η, g₀)` the modulation frequency is scanned on log-spaced
//! windows around `Ω*` and `2Ω*`, and the largest period-averaged
//! negativity is kept. The boundary is where that maximum changes sign; it
//! is located on the grid and refined by bisection.

use std::path::Path;

use entangle_core::entanglement::resonance_frequency;
use entangle_core::SystemParams;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BoundaryConfig, ExperimentConfig};
use crate::output::{fmt_f64, fmt_opt, provenance, write_csv, write_json, CsvTable};
use crate::point::evaluate;
use crate::run::Report;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    OmegaStar,
    TwoOmegaStar,
}

impl Window {
    pub const ALL: [Window; 2] = [Window::OmegaStar, Window::TwoOmegaStar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Window::OmegaStar => "omega_star",
            Window::TwoOmegaStar => "two_omega_star",
        }
    }

    fn multiple(&self) -> f64 {
        match self {
            Window::OmegaStar => 0.5,
            Window::TwoOmegaStar => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Conditional,
    Unconditional,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Conditional => "conditional",
            Quantity::Unconditional => "unconditional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScan {
    pub window: Window,
    pub max_mean_c: Option<f64>,
    pub omega_at_max_c: Option<f64>,
    pub max_mean_u: Option<f64>,
    pub omega_at_max_u: Option<f64>,
    pub converged: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub eta: f64,
    pub g0: f64,
    pub g1: f64,
    pub status: &'static str,
    pub windows: Vec<WindowScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SurfacePoint {
    /// Maximum over both windows.
    pub fn max(&self, q: Quantity) -> Option<f64> {
        self.windows
            .iter()
            .filter_map(|w| match q {
                Quantity::Conditional => w.max_mean_c,
                Quantity::Unconditional => w.max_mean_u,
            })
            .reduce(f64::max)
    }

    pub fn window(&self, w: Window) -> Option<&WindowScan> {
        self.windows.iter().find(|s| s.window == w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub eta: f64,
    pub quantity: Quantity,
    /// Grid bracket: last non-entangled and first entangled `g₀` in order of
    /// increasing `|g₀|`.
    pub g0_lo: Option<f64>,
    pub g0_hi: Option<f64>,
    pub crossing: Option<f64>,
    pub bisection_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryResult {
    pub surface: Vec<SurfacePoint>,
    pub crossings: Vec<Crossing>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn g1_for(b: &BoundaryConfig, g0: f64) -> f64 {
    match (b.g1_ratio, b.g1) {
        (Some(r), _) => r * g0.abs(),
        (None, Some(g)) => g,
        (None, None) => 0.0,
    }
}

/// Scans both Ω windows at one `(η, g₀)`.
pub fn scan_point(cfg: &ExperimentConfig, eta: f64, g0: f64) -> SurfacePoint {
    let b = cfg.boundary.as_ref().expect("boundary section validated");
    let g1 = g1_for(b, g0);
    let base = SystemParams { eta, g0, g1, ..cfg.system_params() };
    let two_star = match resonance_frequency(g0, base.omega0) {
        Ok(w) => w,
        Err(e) => {
            return SurfacePoint { eta, g0, g1, status: "unstable", windows: Vec::new(), error: Some(e.to_string()) }
        }
    };
    let opts = cfg.solver.options();
    let mode = cfg.solver.average_mode();
    let omegas: Vec<(Window, f64)> = Window::ALL
        .iter()
        .flat_map(|w| {
            let centre = two_star * w.multiple();
            log_space(b.window[0] * centre, b.window[1] * centre, b.omega_points).into_iter().map(move |o| (*w, o))
        })
        .collect();
    let outcomes: Vec<_> = omegas
        .par_iter()
        .map(|(_, w)| evaluate(&SystemParams { omega_mod: *w, ..base }, &opts, mode, b.conditional_only))
        .collect();

    let mut first_error = None;
    let windows = Window::ALL
        .iter()
        .map(|w| {
            let mut scan = WindowScan {
                window: *w,
                max_mean_c: None,
                omega_at_max_c: None,
                max_mean_u: None,
                omega_at_max_u: None,
                converged: 0,
                total: 0,
            };
            for ((win, omega), o) in omegas.iter().zip(&outcomes) {
                if win != w {
                    continue;
                }
                scan.total += 1;
                if !o.is_converged() {
                    if first_error.is_none() {
                        first_error = o.error.clone().map(|e| (o.status, e));
                    }
                    continue;
                }
                scan.converged += 1;
                if let Some(c) = o.mean_c {
                    if scan.max_mean_c.is_none_or(|m| c > m) {
                        scan.max_mean_c = Some(c);
                        scan.omega_at_max_c = Some(*omega);
                    }
                }
                if let Some(u) = o.mean_u {
                    if scan.max_mean_u.is_none_or(|m| u > m) {
                        scan.max_mean_u = Some(u);
                        scan.omega_at_max_u = Some(*omega);
                    }
                }
            }
            scan
        })
        .collect::<Vec<_>>();
    let any_converged = windows.iter().any(|w| w.converged > 0);
    let (status, error) = match (any_converged, first_error) {
        (true, _) => ("converged", None),
        (false, Some((s, e))) => (s, Some(e)),
        (false, None) => ("failed", None),
    };
    SurfacePoint { eta, g0, g1, status, windows, error }
}

fn entangled(v: Option<f64>) -> bool {
    v.is_some_and(|x| x > 0.0)
}

fn locate_crossing(cfg: &ExperimentConfig, eta: f64, q: Quantity, column: &[&SurfacePoint]) -> Crossing {
    let b = cfg.boundary.as_ref().expect("boundary section validated");
    let mut order: Vec<&SurfacePoint> = column.to_vec();
    order.sort_by(|x, y| x.g0.abs().total_cmp(&y.g0.abs()));
    let hit = order.iter().position(|p| entangled(p.max(q)));
    let mut out = Crossing { eta, quantity: q, g0_lo: None, g0_hi: None, crossing: None, bisection_steps: 0 };
    let Some(i) = hit else { return out };
    out.g0_hi = Some(order[i].g0);
    if i == 0 {
        return out;
    }
    out.g0_lo = Some(order[i - 1].g0);
    let (mut lo, mut hi) = (order[i - 1].g0, order[i].g0);
    while (hi - lo).abs() > b.bisection_tol {
        let mid = 0.5 * (lo + hi);
        if entangled(scan_point(cfg, eta, mid).max(q)) {
            hi = mid;
        } else {
            lo = mid;
        }
        out.bisection_steps += 1;
    }
    out.crossing = Some(0.5 * (lo + hi));
    out
}

pub fn compute(cfg: &ExperimentConfig) -> Result<BoundaryResult, CliError> {
    let b = cfg.boundary.as_ref().ok_or_else(|| CliError::Usage("config has no [boundary] section".into()))?;
    let g0s = b.g0.points();
    let pairs: Vec<(f64, f64)> = b.eta.iter().flat_map(|e| g0s.iter().map(move |g| (*e, *g))).collect();
    let surface: Vec<SurfacePoint> = pairs.par_iter().map(|(e, g)| scan_point(cfg, *e, *g)).collect();
    let quantities: &[Quantity] =
        if b.conditional_only { &[Quantity::Conditional] } else { &[Quantity::Conditional, Quantity::Unconditional] };
    let tasks: Vec<(f64, Quantity)> = b.eta.iter().flat_map(|e| quantities.iter().map(move |q| (*e, *q))).collect();
    let crossings = tasks
        .par_iter()
        .map(|(eta, q)| {
            let column: Vec<&SurfacePoint> = surface.iter().filter(|p| p.eta == *eta).collect();
            locate_crossing(cfg, *eta, *q, &column)
        })
        .collect();
    Ok(BoundaryResult { surface, crossings })
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let result = compute(cfg)?;
    let b = cfg.boundary.as_ref().expect("checked by compute");
    let prefix = cfg.prefix();
    let header = provenance(cfg, &[]);

    let mut surface = CsvTable::new(&[
        "eta",
        "g0",
        "g1",
        "window",
        "omega_center",
        "status",
        "converged",
        "total",
        "max_mean_c",
        "omega_at_max_c",
        "max_mean_u",
        "omega_at_max_u",
    ]);
    for p in &result.surface {
        let two_star = resonance_frequency(p.g0, cfg.params.omega0).ok();
        for w in Window::ALL {
            let scan = p.window(w);
            surface.push(vec![
                fmt_f64(p.eta),
                fmt_f64(p.g0),
                fmt_f64(p.g1),
                w.as_str().to_string(),
                fmt_opt(two_star.map(|s| s * w.multiple())),
                p.status.to_string(),
                scan.map_or(0, |s| s.converged).to_string(),
                scan.map_or(0, |s| s.total).to_string(),
                fmt_opt(scan.and_then(|s| s.max_mean_c)),
                fmt_opt(scan.and_then(|s| s.omega_at_max_c)),
                fmt_opt(scan.and_then(|s| s.max_mean_u)),
                fmt_opt(scan.and_then(|s| s.omega_at_max_u)),
            ]);
        }
    }
    let surface_csv = write_csv(&out.join(format!("{prefix}_surface.csv")), &header, &surface)?;

    let mut crossings = CsvTable::new(&["eta", "quantity", "g0_lo", "g0_hi", "crossing", "bisection_steps"]);
    for c in &result.crossings {
        crossings.push(vec![
            fmt_f64(c.eta),
            c.quantity.as_str().to_string(),
            fmt_opt(c.g0_lo),
            fmt_opt(c.g0_hi),
            fmt_opt(c.crossing),
            c.bisection_steps.to_string(),
        ]);
    }
    let crossing_csv = write_csv(&out.join(format!("{prefix}.csv")), &header, &crossings)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        mode: &'static str,
        seed: u64,
        branch: crate::config::Branch,
        #[serde(flatten)]
        result: &'a BoundaryResult,
    }
    let json = write_json(
        &out.join(format!("{prefix}.json")),
        &Summary { mode: "boundary", seed: cfg.seed, branch: b.branch, result: &result },
    )?;
    let found: Vec<String> = result
        .crossings
        .iter()
        .map(|c| format!("eta={} {}: {}", c.eta, c.quantity.as_str(), c.crossing.map_or("none".into(), |x| format!("{x:.4}"))))
        .collect();
    Ok(Report { files: vec![crossing_csv, surface_csv, json], message: found.join("; ") })
}
