//! Periodic Riccati equations of the Kalman–Bucy filter and of the LQR
//! controller.
//!
//! The filter covariance obeys
//!
//! ```text
//! dΣ/dt = Ã(t)Σ + ΣÃ(t)ᵀ + Ṽ − Σ G Σ,   G = CᵀW⁻¹C,
//! ```
//!
//! with `Ã = A − MW⁻¹C` and `Ṽ = V − MW⁻¹Mᵀ` (for `M = 0` these are just `A`
//! and `V`). Writing `Σ = X₂X₁⁻¹` linearises it: `[X₁; X₂]` evolves under
//! `−ℍ(t)` with the Hamiltonian matrix `ℍ = [[Ãᵀ, −G], [−Ṽ, −Ã]]`.
//!
//! Two independent solvers are provided:
//!
//! * [`periodic_riccati_schur`] forms the period map of the `ℍ` flow, takes
//!   its stable invariant subspace from an ordered real Schur decomposition
//!   and carries that 8×4 basis through the period, re-orthonormalising after
//!   every step.
//! * [`riccati_direct`] integrates the matrix ODE with RK4 from a physical
//!   initial state until it settles on the periodic orbit.
//!
//! The controller costate `Π` solves the backward equation
//! `−dΠ/dt = AᵀΠ + ΠA + P − Π(BBᵀ/q)Π`. Reversing time, `Π̂(τ) = Π(T − τ)`
//! obeys a filter-type equation with drift `A(T − τ)ᵀ`, source `P` and
//! information `BBᵀ/q`, so both solvers apply to it unchanged.

use alloc::vec::Vec;

use nalgebra::{Matrix2x4, Matrix4, SMatrix};
#[allow(unused_imports)] // f64 inherent methods shadow these when std is linked
use num_traits::Float;

use crate::linalg::{
    condition_number, expm, stable_subspace, symmetrize, symplectic_form_2n, symplectic_inverse, Matrix8,
    Matrix8x4,
};
use crate::model::{CovMatrix, Model};
use crate::{Error, Result};

/// One-step approximation of the time-ordered exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `exp(h·ℍ(t + h/2))`, second order.
    Midpoint,
    /// Two-point Gauss–Legendre Magnus expansion with the commutator term,
    /// fourth order.
    #[default]
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Samples per modulation period; a power of two, at least 256.
    pub n_steps: usize,
    pub step_rule: StepRule,
    /// Change per period, relative to `max(‖X‖, 1)`, below which an
    /// iteration is periodic.
    pub tolerance: f64,
    /// Iteration budget in periods for the integrating solvers.
    pub max_periods: usize,
    /// Bound on `‖S‖` for the period map.
    pub overflow_bound: f64,
    /// Bound on the condition number of the `X₁` block.
    pub max_condition: f64,
    /// Slack for positive semi-definiteness checks.
    pub psd_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_steps: 1024,
            step_rule: StepRule::Magnus4,
            tolerance: 1e-8,
            max_periods: 5000,
            overflow_bound: 1e14,
            max_condition: 1e12,
            psd_tol: 1e-8,
        }
    }
}

impl SolverOptions {
    pub const MIN_STEPS: usize = 256;

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < Self::MIN_STEPS || !self.n_steps.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                reason: "must be a power of two and at least 256",
            });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter { name: "tolerance", reason: "must be > 0" });
        }
        if self.max_periods < 20 {
            return Err(Error::InvalidParameter { name: "max_periods", reason: "must be at least 20" });
        }
        Ok(())
    }
}

/// The 8×8 Hamiltonian matrix `[[Aᵀ, −CᵀW⁻¹C], [−V, −A]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMatrix(pub Matrix8);

impl HamiltonianMatrix {
    fn from_blocks(a: &Matrix4<f64>, info: &Matrix4<f64>, source: &Matrix4<f64>) -> Self {
        let mut h = Matrix8::zeros();
        h.fixed_view_mut::<4, 4>(0, 0).copy_from(&a.transpose());
        h.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-info));
        h.fixed_view_mut::<4, 4>(4, 0).copy_from(&(-source));
        h.fixed_view_mut::<4, 4>(4, 4).copy_from(&(-a));
        Self(h)
    }

    /// Largest entry of `Jℍ − (Jℍ)ᵀ` relative to `‖ℍ‖`; zero for a
    /// Hamiltonian matrix.
    pub fn hamiltonian_defect(&self) -> f64 {
        let jh = symplectic_form_2n() * self.0;
        (jh - jh.transpose()).amax() / self.0.amax().max(f64::MIN_POSITIVE)
    }
}

pub fn build_hamiltonian(
    a: &Matrix4<f64>,
    c: &Matrix2x4<f64>,
    w: &nalgebra::Matrix2<f64>,
    v: &Matrix4<f64>,
) -> Result<HamiltonianMatrix> {
    let w_inv = w.try_inverse().ok_or(Error::Singular("measurement noise W"))?;
    let info = symmetrize(&(c.transpose() * w_inv * c));
    Ok(HamiltonianMatrix::from_blocks(a, &info, v))
}

/// A periodic Riccati problem in filter form.
struct PeriodicRiccati<'a> {
    drift: &'a dyn Fn(f64) -> Matrix4<f64>,
    info: Matrix4<f64>,
    source: Matrix4<f64>,
    period: f64,
}

impl PeriodicRiccati<'_> {
    fn hamiltonian(&self, t: f64) -> Matrix8 {
        HamiltonianMatrix::from_blocks(&(self.drift)(t), &self.info, &self.source).0
    }

    fn rhs(&self, t: f64, x: &Matrix4<f64>) -> Matrix4<f64> {
        let a = (self.drift)(t);
        a * x + x * a.transpose() + self.source - x * self.info * x
    }

    /// Forward filter propagators `exp(Ωᵢ)` over each step, `Ωᵢ` the
    /// one-step Magnus generator of the `−ℍ` flow.
    fn step_propagators(&self, opts: &SolverOptions) -> Vec<Matrix8> {
        let n = opts.n_steps;
        let h = self.period / n as f64;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 * h;
            let gen = match opts.step_rule {
                StepRule::Midpoint => -self.hamiltonian(t + 0.5 * h) * h,
                StepRule::Magnus4 => {
                    let d = 3f64.sqrt() / 6.0;
                    let h1 = self.hamiltonian(t + (0.5 - d) * h);
                    let h2 = self.hamiltonian(t + (0.5 + d) * h);
                    let comm = h2 * h1 - h1 * h2;
                    -(h1 + h2) * (0.5 * h) + comm * (3f64.sqrt() / 12.0 * h * h)
                }
            };
            out.push(expm(&gen));
        }
        out
    }

    fn schur(&self, opts: &SolverOptions) -> Result<SchurOutcome> {
        opts.validate()?;
        let steps = self.step_propagators(opts);
        // Period map of the ℍ flow: the inverse of the forward filter map,
        // i.e. the product of the inverse step factors taken from t = 0 to T.
        let mut s = Matrix8::identity();
        for e in &steps {
            s *= symplectic_inverse(e);
        }
        let norm = s.norm();
        if !(norm <= opts.overflow_bound) {
            return Err(Error::Overflow { norm, bound: opts.overflow_bound });
        }
        let j = symplectic_form_2n();
        let symplectic_defect = (s.transpose() * j * s - j).norm() / j.norm();

        let mut basis = stable_subspace(&s)?;
        let read = |basis: &Matrix8x4| -> Result<Matrix4<f64>> {
            let x1: Matrix4<f64> = basis.fixed_view::<4, 4>(0, 0).into_owned();
            let x2: Matrix4<f64> = basis.fixed_view::<4, 4>(4, 0).into_owned();
            let condition = condition_number(&x1);
            if !(condition <= opts.max_condition) {
                return Err(Error::IllConditioned { condition });
            }
            let inv = x1.try_inverse().ok_or(Error::IllConditioned { condition })?;
            Ok(symmetrize(&(x2 * inv)))
        };

        let first = read(&basis)?;
        let scale = first.amax().max(1.0);
        let min_eig = first.symmetric_eigenvalues().min();
        if min_eig < -opts.psd_tol * scale {
            return Err(Error::NotPositiveSemidefinite { what: "Schur periodic solution", min_eigenvalue: min_eig });
        }

        let mut samples = Vec::with_capacity(opts.n_steps);
        samples.push(first);
        for (i, e) in steps.iter().enumerate() {
            let moved: Matrix8x4 = e * basis;
            basis = moved.qr().q();
            let x = read(&basis)?;
            if i + 1 < steps.len() {
                samples.push(x);
            } else {
                let defect = (x - first).norm() / first.norm().max(f64::MIN_POSITIVE);
                return Ok(SchurOutcome { samples, defect, symplectic_defect });
            }
        }
        unreachable!("n_steps >= 256")
    }

    /// RK4 over whole periods until the state repeats after one period.
    fn integrate(&self, start: Matrix4<f64>, opts: &SolverOptions, what: &'static str) -> Result<DirectOutcome> {
        opts.validate()?;
        let n = opts.n_steps;
        let h = self.period / n as f64;
        let mut x = symmetrize(&start);
        let mut samples = Vec::with_capacity(n);
        let mut residual = f64::INFINITY;
        for period in 0..opts.max_periods {
            let period_start = x;
            samples.clear();
            for i in 0..n {
                samples.push(x);
                let t = i as f64 * h;
                let k1 = self.rhs(t, &x);
                let k2 = self.rhs(t + 0.5 * h, &(x + k1 * (0.5 * h)));
                let k3 = self.rhs(t + 0.5 * h, &(x + k2 * (0.5 * h)));
                let k4 = self.rhs(t + h, &(x + k3 * h));
                x = symmetrize(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)));
            }
            let norm = x.norm();
            if !norm.is_finite() || norm > 1e12 {
                return Err(Error::Diverged { what });
            }
            // Relative change, measured against at least unit scale so that a
            // state contracting to zero also counts as settled.
            residual = (x - period_start).norm() / norm.max(1.0);
            if residual < opts.tolerance {
                return Ok(DirectOutcome { samples, final_state: x, periods: period + 1, residual });
            }
        }
        Err(Error::NotConverged { what, periods: opts.max_periods, residual })
    }
}

struct SchurOutcome {
    samples: Vec<Matrix4<f64>>,
    defect: f64,
    symplectic_defect: f64,
}

struct DirectOutcome {
    samples: Vec<Matrix4<f64>>,
    final_state: Matrix4<f64>,
    periods: usize,
    residual: f64,
}

/// Filter part of a periodic solution: `Σᶜ(tᵢ)`, `tᵢ = i·T/n`, `i < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSolution {
    pub period: f64,
    pub n_steps: usize,
    pub sigma_c: Vec<CovMatrix>,
    /// `‖Σᶜ(T) − Σᶜ(0)‖ / ‖Σᶜ(0)‖`.
    pub periodicity_defect: f64,
    /// `‖SᵀJS − J‖/‖J‖` of the period map (Schur solver only).
    pub symplectic_defect: Option<f64>,
    /// Periods integrated (direct solver only).
    pub periods: Option<usize>,
}

impl FilterSolution {
    pub fn times(&self) -> Vec<f64> {
        let h = self.period / self.n_steps as f64;
        (0..self.n_steps).map(|i| i as f64 * h).collect()
    }
}

/// Controller part of a periodic solution: costate `Π(tᵢ)` and gain
/// `K(tᵢ) = BᵀΠ(tᵢ)/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub period: f64,
    pub n_steps: usize,
    pub costate: Vec<CovMatrix>,
    pub gain: Vec<Matrix2x4<f64>>,
    pub periodicity_defect: f64,
    pub periods: Option<usize>,
}

/// Filter and controller solutions on a common period grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSolution {
    pub period: f64,
    pub n_steps: usize,
    pub sigma_c: Vec<CovMatrix>,
    pub gain: Vec<Matrix2x4<f64>>,
    pub costate: Vec<CovMatrix>,
}

impl PeriodicSolution {
    pub fn new(filter: FilterSolution, control: ControlSolution) -> Result<Self> {
        if filter.n_steps != control.n_steps || (filter.period - control.period).abs() > 1e-12 * filter.period {
            return Err(Error::GridMismatch("filter and controller grids differ"));
        }
        Ok(Self {
            period: filter.period,
            n_steps: filter.n_steps,
            sigma_c: filter.sigma_c,
            gain: control.gain,
            costate: control.costate,
        })
    }

    pub fn step(&self) -> f64 {
        self.period / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_steps).map(|i| i as f64 * h).collect()
    }
}

fn filter_problem<'a>(model: &Model, drift: &'a dyn Fn(f64) -> Matrix4<f64>) -> Result<PeriodicRiccati<'a>> {
    Ok(PeriodicRiccati {
        drift,
        info: model.information()?,
        source: model.filter_source()?,
        period: model.period()?,
    })
}

fn filter_drift_fn(model: &Model) -> Result<impl Fn(f64) -> Matrix4<f64> + '_> {
    let mm = model.measurement;
    let correction = mm.m * model.w_inv()? * mm.c;
    Ok(move |t| model.drift(t) - correction)
}

/// Period map `S` of the filter Hamiltonian flow: the ordered product of the
/// one-step factors `exp(∫ℍ)` from `t = 0` to `t = T`.
pub fn monodromy(model: &Model, opts: &SolverOptions) -> Result<Matrix8> {
    model.validate()?;
    opts.validate()?;
    let drift = filter_drift_fn(model)?;
    let problem = filter_problem(model, &drift)?;
    let mut s = Matrix8::identity();
    for e in problem.step_propagators(opts) {
        s *= symplectic_inverse(&e);
    }
    let norm = s.norm();
    if !(norm <= opts.overflow_bound) {
        return Err(Error::Overflow { norm, bound: opts.overflow_bound });
    }
    Ok(s)
}

/// `‖SᵀJS − J‖/‖J‖`.
pub fn symplectic_defect(s: &Matrix8) -> f64 {
    let j = symplectic_form_2n();
    (s.transpose() * j * s - j).norm() / j.norm()
}

/// Periodic filter covariance by the ordered-Schur subspace method.
pub fn periodic_riccati_schur(model: &Model, opts: &SolverOptions) -> Result<FilterSolution> {
    model.validate()?;
    let drift = filter_drift_fn(model)?;
    let problem = filter_problem(model, &drift)?;
    let out = problem.schur(opts)?;
    let sigma_c = out.samples.iter().map(CovMatrix::symmetrized).collect::<Vec<_>>();
    for s in &sigma_c {
        if !s.is_physical(opts.psd_tol) {
            return Err(Error::NotPositiveSemidefinite {
                what: "conditional covariance (symplectic spectrum)",
                min_eigenvalue: s.min_eigenvalue(),
            });
        }
    }
    Ok(FilterSolution {
        period: problem.period,
        n_steps: opts.n_steps,
        sigma_c,
        periodicity_defect: out.defect,
        symplectic_defect: Some(out.symplectic_defect),
        periods: None,
    })
}

/// Periodic filter covariance by RK4 integration from `sigma0` until the
/// per-period change drops below `opts.tolerance`; returns the last period.
pub fn riccati_direct(model: &Model, sigma0: &CovMatrix, opts: &SolverOptions) -> Result<FilterSolution> {
    model.validate()?;
    let drift = filter_drift_fn(model)?;
    let problem = filter_problem(model, &drift)?;
    let out = problem.integrate(*sigma0.as_matrix(), opts, "filter Riccati integration")?;
    let first = out.samples[0];
    Ok(FilterSolution {
        period: problem.period,
        n_steps: opts.n_steps,
        sigma_c: out.samples.iter().map(CovMatrix::symmetrized).collect(),
        periodicity_defect: (out.final_state - first).norm() / first.norm().max(f64::MIN_POSITIVE),
        symplectic_defect: None,
        periods: Some(out.periods),
    })
}

/// Maps samples of the time-reversed problem, `Π̂(τᵢ) = Π(T − τᵢ)`, back onto
/// the forward grid `tᵢ`.
fn unreverse(reversed: &[Matrix4<f64>]) -> Vec<Matrix4<f64>> {
    let n = reversed.len();
    (0..n).map(|i| reversed[(n - i) % n]).collect()
}

fn control_from_costate(model: &Model, costate: Vec<Matrix4<f64>>, period: f64, opts: &SolverOptions, defect: f64, periods: Option<usize>) -> ControlSolution {
    let q = model.params.q;
    let bt = model.b.transpose();
    let gain = costate.iter().map(|p| bt * p / q).collect();
    ControlSolution {
        period,
        n_steps: opts.n_steps,
        costate: costate.iter().map(CovMatrix::symmetrized).collect(),
        gain,
        periodicity_defect: defect,
        periods,
    }
}

/// Periodic LQR costate and gain by integrating the backward Riccati equation
/// over whole periods from `Π = 0` until it repeats.
pub fn lqr_gain(model: &Model, opts: &SolverOptions) -> Result<ControlSolution> {
    model.validate()?;
    let period = model.period()?;
    let reversed_drift = |tau: f64| model.drift(period - tau).transpose();
    let problem = PeriodicRiccati {
        drift: &reversed_drift,
        info: symmetrize(&model.control_weight()),
        source: symmetrize(&model.cost),
        period,
    };
    let out = problem.integrate(Matrix4::zeros(), opts, "backward LQR Riccati integration")?;
    let scale = out.final_state.amax().max(1.0);
    let min_eig = out.final_state.symmetric_eigenvalues().min();
    if min_eig < -opts.psd_tol * scale {
        return Err(Error::NotPositiveSemidefinite { what: "LQR costate", min_eigenvalue: min_eig });
    }
    let defect = out.residual;
    Ok(control_from_costate(model, unreverse(&out.samples), period, opts, defect, Some(out.periods)))
}

/// Periodic LQR costate by the ordered-Schur method applied to the
/// time-reversed (dual) problem.
pub fn lqr_gain_schur(model: &Model, opts: &SolverOptions) -> Result<ControlSolution> {
    model.validate()?;
    let period = model.period()?;
    let reversed_drift = |tau: f64| model.drift(period - tau).transpose();
    let problem = PeriodicRiccati {
        drift: &reversed_drift,
        info: symmetrize(&model.control_weight()),
        source: symmetrize(&model.cost),
        period,
    };
    let out = problem.schur(opts)?;
    Ok(control_from_costate(model, unreverse(&out.samples), period, opts, out.defect, None))
}

/// Largest elementwise difference of two sampled matrix sequences, relative
/// to the largest entry of `reference`.
pub fn max_relative_difference<const N: usize>(
    a: &[SMatrix<f64, N, N>],
    reference: &[SMatrix<f64, N, N>],
) -> f64 {
    let scale = reference.iter().map(|m| m.amax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(reference)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ordered_schur;
    use crate::model::SystemParams;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn reference(g1: f64, omega_mod: f64) -> Model {
        Model::new(SystemParams { g1, omega_mod, ..Default::default() }).unwrap()
    }

    fn mats(v: &[CovMatrix]) -> Vec<Matrix4<f64>> {
        v.iter().map(|c| *c.as_matrix()).collect()
    }

    /// Stabilising solution of `AᵀX + XA + Q − XRX = 0` from the Hamiltonian
    /// `[[A, −R], [−Q, −Aᵀ]]` (stable eigenvalues first).
    fn care(a: &Matrix4<f64>, r: &Matrix4<f64>, q: &Matrix4<f64>) -> Matrix4<f64> {
        let mut h = DMatrix::<f64>::zeros(8, 8);
        h.view_mut((0, 0), (4, 4)).copy_from(a);
        h.view_mut((0, 4), (4, 4)).copy_from(&(-r));
        h.view_mut((4, 0), (4, 4)).copy_from(&(-q));
        h.view_mut((4, 4), (4, 4)).copy_from(&(-a.transpose()));
        let ord = ordered_schur(h, |re, _| re < 0.0).unwrap();
        assert_eq!(ord.selected_dim, 4);
        let u1 = Matrix4::from_fn(|i, j| ord.z[(i, j)]);
        let u2 = Matrix4::from_fn(|i, j| ord.z[(i + 4, j)]);
        symmetrize(&(u2 * u1.try_inverse().unwrap()))
    }

    #[test]
    fn hamiltonian_structure() {
        let m = reference(0.17, 2.7);
        let a = m.drift(0.0);
        let h = build_hamiltonian(&a, &m.measurement.c, &m.measurement.w, &m.v).unwrap();
        assert!(h.hamiltonian_defect() < 1e-12);
        assert!(h.0.trace().abs() < 1e-15);
        let h0 = build_hamiltonian(&a, &Matrix2x4::zeros(), &m.measurement.w, &Matrix4::zeros()).unwrap();
        assert_eq!(h0.0.fixed_view::<4, 4>(0, 4).into_owned(), Matrix4::zeros());
        assert_eq!(h0.0.fixed_view::<4, 4>(4, 0).into_owned(), Matrix4::zeros());
        assert_eq!(h0.0.fixed_view::<4, 4>(0, 0).into_owned(), a.transpose());
        let singular = nalgebra::Matrix2::zeros();
        assert!(build_hamiltonian(&a, &m.measurement.c, &singular, &m.v).is_err());
    }

    #[test]
    fn monodromy_is_symplectic() {
        let opts = SolverOptions::default();
        let s = monodromy(&reference(0.17, 2.7), &opts).unwrap();
        assert!(symplectic_defect(&s) < 1e-8);
    }

    #[test]
    fn constant_monodromy_is_matrix_exponential() {
        let m = reference(0.0, 2.7);
        let period = m.period().unwrap();
        let a = m.drift(0.0);
        let h = build_hamiltonian(&a, &m.measurement.c, &m.measurement.w, &m.v).unwrap();
        let exact = (h.0 * period).exp();
        for rule in [StepRule::Midpoint, StepRule::Magnus4] {
            let s = monodromy(&m, &SolverOptions { step_rule: rule, ..Default::default() }).unwrap();
            assert!((s - exact).amax() < 1e-9 * exact.amax(), "{rule:?}");
        }
    }

    #[test]
    fn schur_matches_algebraic_riccati_without_modulation() {
        let m = reference(0.0, 2.7);
        let sol = periodic_riccati_schur(&m, &SolverOptions::default()).unwrap();
        // Filter CARE: A Σ + Σ Aᵀ + V − Σ G Σ = 0, i.e. the control form with A → Aᵀ.
        let stationary = care(&m.drift(0.0).transpose(), &m.information().unwrap(), &m.v);
        for s in &sol.sigma_c {
            assert!((s.as_matrix() - stationary).amax() < 1e-10);
        }
    }

    #[test]
    fn schur_and_direct_agree_at_strong_modulation() {
        let m = reference(0.17, 2.7);
        let opts = SolverOptions::default();
        let schur = periodic_riccati_schur(&m, &opts).unwrap();
        let direct = riccati_direct(&m, &CovMatrix::vacuum(), &SolverOptions { tolerance: 1e-12, ..opts }).unwrap();
        assert!(schur.periodicity_defect < 1e-6);
        assert!(max_relative_difference(&mats(&schur.sigma_c), &mats(&direct.sigma_c)) < 1e-6);
        for s in &schur.sigma_c {
            assert!(s.is_physical(1e-8));
        }
    }

    #[test]
    fn midpoint_rule_converges_at_second_order() {
        let m = reference(0.17, 2.7);
        let err = |n: usize| {
            let opts = SolverOptions { n_steps: n, step_rule: StepRule::Midpoint, ..Default::default() };
            let schur = periodic_riccati_schur(&m, &opts).unwrap();
            let reference =
                riccati_direct(&m, &CovMatrix::vacuum(), &SolverOptions { tolerance: 1e-12, n_steps: n, ..opts })
                    .unwrap();
            max_relative_difference(&mats(&schur.sigma_c), &mats(&reference.sigma_c))
        };
        let (e1, e2) = (err(256), err(512));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn direct_contracts_to_zero_without_noise() {
        let p = SystemParams { gamma: 0.3, eta: 0.0, g1: 0.0, ..Default::default() };
        let mut m = Model::new(p).unwrap();
        m.v = Matrix4::zeros();
        let out = riccati_direct(&m, &CovMatrix::vacuum(), &SolverOptions::default()).unwrap();
        assert!(out.sigma_c.iter().all(|s| s.amax() < 1e-7));
    }

    #[test]
    fn conditioning_reduces_uncertainty() {
        let opts = SolverOptions::default();
        let trace = |eta: f64| {
            let m = Model::new(SystemParams { eta, ..Default::default() }).unwrap();
            let sol = periodic_riccati_schur(&m, &opts).unwrap();
            sol.sigma_c.iter().map(|s| s.trace()).sum::<f64>()
        };
        let (t1, t05, t025) = (trace(1.0), trace(0.5), trace(0.25));
        assert!(t1 <= t05 && t05 <= t025, "{t1} {t05} {t025}");
    }

    #[test]
    fn costate_is_periodic() {
        let m = reference(0.17, 2.7);
        let c = lqr_gain(&m, &SolverOptions::default()).unwrap();
        assert!(c.periodicity_defect < 1e-6);
        let s = lqr_gain_schur(&m, &SolverOptions::default()).unwrap();
        assert!(s.periodicity_defect < 1e-6);
    }

    #[test]
    fn single_mode_purity_calibration() {
        let p = SystemParams { g0: 0.0, g1: 0.0, gamma: 0.0, gamma_th: 0.0, eta: 1.0, gamma_ba: 0.05, ..Default::default() };
        let m = Model::new(p).unwrap();
        let sol = periodic_riccati_schur(&m, &SolverOptions::default()).unwrap();
        let s = sol.sigma_c[0];
        let block = s.fixed_view::<2, 2>(0, 0).into_owned();
        assert_relative_eq!(block.determinant(), 0.25, epsilon = 1e-10);
        // Closed form with k = 4Γ_ba, v = Γ_ba: k b² + 2b − v = 0, a² = 2b/k,
        // c = a + k a b.
        let (k, v) = (0.2f64, 0.05f64);
        let b = (-1.0 + (1.0 + k * v).sqrt()) / k;
        let a = (2.0 * b / k).sqrt();
        assert_relative_eq!(s[(0, 0)], a, epsilon = 1e-10);
        assert_relative_eq!(s[(0, 1)], b, epsilon = 1e-10);
        assert_relative_eq!(s[(1, 1)], a + k * a * b, epsilon = 1e-10);
        // The second mode is identical and uncorrelated with the first.
        assert_relative_eq!(s[(2, 2)], a, epsilon = 1e-10);
        assert!((s[(0, 0)] - 0.4994).abs() < 1e-4);
        assert!((s[(0, 1)] - 0.0249).abs() < 1e-4);
        assert!((s[(1, 1)] - 0.5019).abs() < 1e-4);
        assert!(s.fixed_view::<2, 2>(0, 2).amax() < 1e-10);
    }

    #[test]
    fn lqr_trivial_limits() {
        let mut m = reference(0.17, 2.7);
        m.cost = Matrix4::zeros();
        let c = lqr_gain(&m, &SolverOptions::default()).unwrap();
        assert!(c.costate.iter().all(|p| p.amax() == 0.0));
        assert!(c.gain.iter().all(|k| k.amax() == 0.0));

        // Large q: the gain vanishes like 1/q.
        let damped = SystemParams { gamma: 0.2, g1: 0.0, q: 1e8, ..Default::default() };
        let m = Model::new(damped).unwrap();
        let c = lqr_gain(&m, &SolverOptions::default()).unwrap();
        assert!(c.gain.iter().all(|k| k.amax() < 1e-6));
        // And Π approaches the Lyapunov solution AᵀΠ + ΠA + P = 0.
        let lyap = care(&m.drift(0.0), &(Matrix4::zeros()), &m.cost);
        assert!((c.costate[0].as_matrix() - lyap).amax() < 1e-5 * lyap.amax());
    }

    #[test]
    fn lqr_matches_algebraic_solution_without_modulation() {
        let m = reference(0.0, 2.7);
        let c = lqr_gain(&m, &SolverOptions::default()).unwrap();
        let stationary = care(&m.drift(0.0), &m.control_weight(), &m.cost);
        for p in &c.costate {
            assert!((p.as_matrix() - stationary).amax() < 1e-6 * stationary.amax());
        }
    }

    #[test]
    fn lqr_backward_and_dual_schur_agree() {
        let m = reference(0.17, 2.7);
        let opts = SolverOptions::default();
        let direct = lqr_gain(&m, &SolverOptions { tolerance: 1e-12, ..opts }).unwrap();
        let schur = lqr_gain_schur(&m, &opts).unwrap();
        assert!(max_relative_difference(&mats(&schur.costate), &mats(&direct.costate)) < 1e-6);
        for p in &direct.costate {
            assert!(p.min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn options_are_validated() {
        let m = reference(0.17, 2.7);
        for n in [128, 1000] {
            let opts = SolverOptions { n_steps: n, ..Default::default() };
            assert!(periodic_riccati_schur(&m, &opts).is_err());
        }
    }
}
