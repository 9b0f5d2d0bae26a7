//! Full chain for one parameter point: filter, controller, excess noise and
//! the negativity of the conditional and unconditional states.

use alloc::vec::Vec;

use crate::entanglement::{log_negativity, period_average, AverageMode, NegativityTrace};
use crate::model::{CovMatrix, Model};
use crate::noise::{excess_noise, unconditional_covariance, ExcessNoise};
use crate::riccati::{lqr_gain, periodic_riccati_schur, FilterSolution, PeriodicSolution, SolverOptions};
use crate::stability::{static_stability, DriftStability};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Converged,
    /// Static drift unstable, closed loop not Floquet stable, or an
    /// integration diverged.
    Unstable,
    Failed,
}

impl PointStatus {
    pub fn from_error(err: &Error) -> Self {
        match err {
            Error::UnstableDrift(_) | Error::UnstableClosedLoop { .. } | Error::Diverged { .. } => Self::Unstable,
            _ => Self::Failed,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::Unstable => "unstable",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    pub solution: PeriodicSolution,
    pub xi: ExcessNoise,
    pub sigma_u: Vec<CovMatrix>,
    pub trace: NegativityTrace,
    pub periodicity_defect: f64,
    pub symplectic_defect: f64,
}

fn check_drift(model: &Model) -> Result<()> {
    match static_stability(&model.params) {
        DriftStability::Stable => Ok(()),
        DriftStability::Unstable => Err(Error::UnstableDrift("static coupling g0 beyond the repulsive threshold")),
    }
}

pub fn solve_point(model: &Model, opts: &SolverOptions, mode: AverageMode) -> Result<PointSolution> {
    check_drift(model)?;
    let filter = periodic_riccati_schur(model, opts)?;
    let periodicity_defect = filter.periodicity_defect;
    let symplectic_defect = filter.symplectic_defect.unwrap_or(0.0);
    let control = lqr_gain(model, opts)?;
    let solution = PeriodicSolution::new(filter, control)?;
    let xi = excess_noise(model, &solution, opts)?;
    let sigma_u = unconditional_covariance(&solution.sigma_c, &xi.samples)?;
    let trace = NegativityTrace::from_covariances(solution.times(), &solution.sigma_c, &sigma_u, mode)?;
    Ok(PointSolution { solution, xi, sigma_u, trace, periodicity_defect, symplectic_defect })
}

/// Conditional state only (no controller): the filter solution with its
/// negativity samples and period average.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPoint {
    pub filter: FilterSolution,
    pub e_n_c: Vec<f64>,
    pub mean_c: f64,
}

pub fn solve_conditional(model: &Model, opts: &SolverOptions, mode: AverageMode) -> Result<ConditionalPoint> {
    check_drift(model)?;
    let filter = periodic_riccati_schur(model, opts)?;
    let e_n_c = filter.sigma_c.iter().map(log_negativity).collect::<Result<Vec<_>>>()?;
    let mean_c = period_average(&e_n_c, mode);
    Ok(ConditionalPoint { filter, e_n_c, mean_c })
}
