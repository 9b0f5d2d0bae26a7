//! One parameter point reduced to the scalars reported by the sweeps.

use entangle_core::entanglement::AverageMode;
use entangle_core::pipeline::{solve_conditional, solve_point, PointStatus};
use entangle_core::riccati::SolverOptions;
use entangle_core::{Model, SystemParams};
use serde::Serialize;

use crate::output::finite;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointOutcome {
    pub status: &'static str,
    pub mean_c: Option<f64>,
    pub mean_u: Option<f64>,
    pub max_u: Option<f64>,
    pub closed_loop_modulus: Option<f64>,
    pub symplectic_defect: Option<f64>,
    pub periodicity_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PointOutcome {
    fn failed(err: &entangle_core::Error) -> Self {
        Self {
            status: PointStatus::from_error(err).as_str(),
            mean_c: None,
            mean_u: None,
            max_u: None,
            closed_loop_modulus: None,
            symplectic_defect: None,
            periodicity_defect: None,
            error: Some(err.to_string()),
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == PointStatus::Converged.as_str()
    }
}

/// Full chain, or the filter alone when `conditional_only` is set.
pub fn evaluate(params: &SystemParams, opts: &SolverOptions, mode: AverageMode, conditional_only: bool) -> PointOutcome {
    let model = match Model::new(*params) {
        Ok(m) => m,
        Err(e) => return PointOutcome::failed(&e),
    };
    if conditional_only {
        return match solve_conditional(&model, opts, mode) {
            Ok(c) => PointOutcome {
                status: PointStatus::Converged.as_str(),
                mean_c: finite(c.mean_c),
                mean_u: None,
                max_u: None,
                closed_loop_modulus: None,
                symplectic_defect: c.filter.symplectic_defect.and_then(finite),
                periodicity_defect: finite(c.filter.periodicity_defect),
                error: None,
            },
            Err(e) => PointOutcome::failed(&e),
        };
    }
    match solve_point(&model, opts, mode) {
        Ok(p) => PointOutcome {
            status: PointStatus::Converged.as_str(),
            mean_c: finite(p.trace.mean_c),
            mean_u: finite(p.trace.mean_u),
            max_u: finite(p.trace.max_u),
            closed_loop_modulus: finite(p.xi.closed_loop_modulus),
            symplectic_defect: finite(p.symplectic_defect),
            periodicity_defect: finite(p.periodicity_defect),
            error: None,
        },
        Err(e) => PointOutcome::failed(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        let opts = SolverOptions { n_steps: 256, ..Default::default() };
        let ok = evaluate(&SystemParams::default(), &opts, AverageMode::Signed, false);
        assert!(ok.is_converged());
        assert!(ok.mean_c.unwrap() > 0.0 && ok.mean_u.is_some());
        let cond = evaluate(&SystemParams::default(), &opts, AverageMode::Signed, true);
        assert_eq!(cond.mean_c, ok.mean_c);
        assert!(cond.mean_u.is_none());
        let bad = SystemParams { g0: -0.3, g1: 0.0, ..Default::default() };
        let out = evaluate(&bad, &opts, AverageMode::Signed, false);
        assert_eq!(out.status, "unstable");
        assert!(out.error.is_some());
        let invalid = SystemParams { eta: 2.0, ..Default::default() };
        assert_eq!(evaluate(&invalid, &opts, AverageMode::Signed, true).status, "failed");
    }
}
