//! System parameters and the matrices of the linear Gaussian dynamics.
//!
//! Phase-space order is `(X₁, P₁, X₂, P₂)` throughout. Rates and frequencies
//! are stored in units of the trap frequency `Ω₀`, so the drift uses `Ω₀ = 1`;
//! [`SystemParams::omega0`] is only needed to convert physical inputs such as
//! [`coupling_rate`].

use core::f64::consts::PI;
use core::ops::Deref;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector4};
#[allow(unused_imports)] // f64 inherent methods shadow these when std is linked
use num_traits::Float;

use crate::linalg::{asymmetry, symmetrize};
use crate::{Error, Result};

/// Trap frequency in scaled units.
pub const OMEGA0: f64 = 1.0;

/// Conditional mean or any other phase-space vector `(x₁, p₁, x₂, p₂)`,
/// in zero-point units.
pub type PhaseSpaceVector = Vector4<f64>;

/// Physical and control rates of the two-oscillator system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Trap frequency `Ω₀` in rad/s. Only used for unit conversion.
    pub omega0: f64,
    /// Static coupling `g₀`; positive is attractive, negative repulsive.
    pub g0: f64,
    /// Modulation amplitude `g₁` of `g(t) = g₀ + 2 g₁ cos(Ω t)`.
    pub g1: f64,
    /// Modulation frequency `Ω`.
    pub omega_mod: f64,
    /// Intrinsic damping `γ`.
    pub gamma: f64,
    /// Measurement backaction (photon recoil) rate `Γ_ba`.
    pub gamma_ba: f64,
    /// Thermal decoherence rate `Γ_th`.
    pub gamma_th: f64,
    /// Detection efficiency `η ∈ [0, 1]`.
    pub eta: f64,
    /// Control effort weight `q` (units of `1/Ω₀`).
    pub q: f64,
    /// EPR phase `φ` of the LQR cost.
    pub phi: f64,
}

impl Default for SystemParams {
    /// Attractive coupling, strong modulation near the main resonance.
    fn default() -> Self {
        Self {
            omega0: 1.0,
            g0: 0.2,
            g1: 0.17,
            omega_mod: 2.7,
            gamma: 0.0,
            gamma_ba: 0.05,
            gamma_th: 0.05 * 0.05,
            eta: 0.5,
            q: 0.1,
            phi: PI,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega0,
            self.g0,
            self.g1,
            self.omega_mod,
            self.gamma,
            self.gamma_ba,
            self.gamma_th,
            self.eta,
            self.q,
            self.phi,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter { name: "params", reason: "all parameters must be finite" });
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidParameter { name: "omega0", reason: "must be > 0" });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter { name: "eta", reason: "must lie in [0, 1]" });
        }
        if self.q <= 0.0 {
            return Err(Error::InvalidParameter { name: "q", reason: "must be > 0" });
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter { name: "gamma", reason: "must be >= 0" });
        }
        if self.gamma_ba < 0.0 {
            return Err(Error::InvalidParameter { name: "gamma_ba", reason: "must be >= 0" });
        }
        if self.gamma_th < 0.0 {
            return Err(Error::InvalidParameter { name: "gamma_th", reason: "must be >= 0" });
        }
        if self.g1 != 0.0 && self.omega_mod <= 0.0 {
            return Err(Error::InvalidParameter { name: "omega_mod", reason: "must be > 0 when g1 != 0" });
        }
        Ok(())
    }

    /// Modulation period `T = 2π/Ω`.
    pub fn period(&self) -> Result<f64> {
        if self.omega_mod > 0.0 {
            Ok(2.0 * PI / self.omega_mod)
        } else {
            Err(Error::InvalidParameter { name: "omega_mod", reason: "a period needs omega_mod > 0" })
        }
    }
}

/// Geometry of the central `k/rⁿ` interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingGeometry {
    /// Interaction constant `k` (SI).
    pub k: f64,
    /// Power-law exponent `n ≥ 1`.
    pub n: u32,
    /// Interparticle separation `R` in metres.
    pub r: f64,
    /// Particle mass in kilograms.
    pub m: f64,
}

/// Coupling rate `g = k / (2 n R^(2+n) m Ω₀)` in rad/s.
pub fn coupling_rate(geom: &CouplingGeometry, omega0: f64) -> Result<f64> {
    if geom.n < 1 {
        return Err(Error::Domain("power-law exponent n must be >= 1"));
    }
    if !(geom.r > 0.0) {
        return Err(Error::Domain("separation R must be > 0"));
    }
    if !(geom.m > 0.0) {
        return Err(Error::Domain("mass m must be > 0"));
    }
    if !(omega0 > 0.0) {
        return Err(Error::Domain("trap frequency must be > 0"));
    }
    let n = geom.n as f64;
    Ok(geom.k / (2.0 * n * geom.r.powi(geom.n as i32 + 2) * geom.m * omega0))
}

/// `g(t) = g₀ + 2 g₁ cos(Ω t)`.
pub fn coupling_modulation(params: &SystemParams, t: f64) -> f64 {
    params.g0 + 2.0 * params.g1 * (params.omega_mod * t).cos()
}

/// Time-modulated drift matrix `A(t)`.
pub fn drift_matrix(params: &SystemParams, t: f64) -> Matrix4<f64> {
    let g = coupling_modulation(params, t);
    let w = OMEGA0;
    let gam = params.gamma;
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0,            w,    0.0,            0.0,
        -w - 2.0 * g,   -gam, 2.0 * g,        0.0,
        0.0,            0.0,  0.0,            w,
        2.0 * g,        0.0,  -w - 2.0 * g,   -gam,
    );
    a
}

/// Feedback forces act on the momentum quadratures.
pub fn control_matrix() -> Matrix4x2<f64> {
    let mut b = Matrix4x2::zeros();
    b[(1, 0)] = 1.0;
    b[(3, 1)] = 1.0;
    b
}

/// Measurement matrices of continuous homodyne position detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    /// Measurement matrix (2×4).
    pub c: Matrix2x4<f64>,
    /// Measurement-noise covariance (2×2).
    pub w: Matrix2<f64>,
    /// Process/measurement noise cross-correlation (4×2).
    pub m: Matrix4x2<f64>,
}

/// Default position measurement: `C = √(4ηΓ_ba)·[[1,0,0,0],[0,0,1,0]]`,
/// `W = I`, `M = 0`.
pub fn measurement_model(params: &SystemParams) -> MeasurementModel {
    let s = (4.0 * params.eta * params.gamma_ba).sqrt();
    let mut c = Matrix2x4::zeros();
    c[(0, 0)] = s;
    c[(1, 2)] = s;
    MeasurementModel { c, w: Matrix2::identity(), m: Matrix4x2::zeros() }
}

/// Momentum diffusion `V = diag(0, Γ_ba + Γ_th, 0, Γ_ba + Γ_th)`.
pub fn process_noise(params: &SystemParams) -> Matrix4<f64> {
    let d = params.gamma_ba + params.gamma_th;
    Matrix4::from_diagonal(&Vector4::new(0.0, d, 0.0, d))
}

/// EPR cost `P = r₋r₋ᵀ + r₊r₊ᵀ` penalising `X₁ − (cos φ X₂ + sin φ P₂)`
/// and `P₁ + (−sin φ X₂ + cos φ P₂)`.
pub fn epr_cost_matrix(phi: f64) -> Matrix4<f64> {
    let (s, c) = phi.sin_cos();
    let r_minus = Vector4::new(1.0, 0.0, -c, -s);
    let r_plus = Vector4::new(0.0, 1.0, s, c);
    r_minus * r_minus.transpose() + r_plus * r_plus.transpose()
}

/// A fully specified linear-Gaussian plant: parameters plus the matrices
/// that enter the filter, the controller and the noise equations.
///
/// [`Model::new`] fills in the default conventions; the public fields may be
/// overridden afterwards (call [`Model::validate`] again when doing so).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: SystemParams,
    pub b: Matrix4x2<f64>,
    pub measurement: MeasurementModel,
    pub v: Matrix4<f64>,
    pub cost: Matrix4<f64>,
}

impl Model {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let model = Self {
            params,
            b: control_matrix(),
            measurement: measurement_model(&params),
            v: process_noise(&params),
            cost: epr_cost_matrix(params.phi),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if asymmetry(&self.v) > 1e-12 {
            return Err(Error::NotSymmetric { asymmetry: asymmetry(&self.v) });
        }
        if asymmetry(&self.cost) > 1e-12 {
            return Err(Error::NotSymmetric { asymmetry: asymmetry(&self.cost) });
        }
        if asymmetry(&self.measurement.w) > 1e-12 || self.measurement.w.cholesky().is_none() {
            return Err(Error::Singular("measurement noise W must be symmetric positive definite"));
        }
        Ok(())
    }

    pub fn period(&self) -> Result<f64> {
        self.params.period()
    }

    pub fn drift(&self, t: f64) -> Matrix4<f64> {
        drift_matrix(&self.params, t)
    }

    pub fn w_inv(&self) -> Result<Matrix2<f64>> {
        self.measurement
            .w
            .try_inverse()
            .ok_or(Error::Singular("measurement noise W"))
    }

    /// `CᵀW⁻¹C`, the conditioning strength of the filter.
    pub fn information(&self) -> Result<Matrix4<f64>> {
        let c = &self.measurement.c;
        Ok(symmetrize(&(c.transpose() * self.w_inv()? * c)))
    }

    /// Filter drift with the noise cross-correlation folded in:
    /// `A(t) − M W⁻¹ C`.
    pub fn filter_drift(&self, t: f64) -> Result<Matrix4<f64>> {
        let mm = &self.measurement;
        Ok(self.drift(t) - mm.m * self.w_inv()? * mm.c)
    }

    /// Filter diffusion with the cross-correlation removed: `V − M W⁻¹ Mᵀ`.
    pub fn filter_source(&self) -> Result<Matrix4<f64>> {
        let mm = &self.measurement;
        Ok(symmetrize(&(self.v - mm.m * self.w_inv()? * mm.m.transpose())))
    }

    /// `BBᵀ/q`, the quadratic term of the control Riccati equation.
    pub fn control_weight(&self) -> Matrix4<f64> {
        self.b * self.b.transpose() / self.params.q
    }
}

/// A 4×4 real symmetric matrix over `(X₁, P₁, X₂, P₂)`.
///
/// Used for conditional and unconditional covariances, excess noise and
/// costates. Symmetry is enforced on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMatrix(Matrix4<f64>);

impl CovMatrix {
    /// Relative asymmetry accepted by [`CovMatrix::new`].
    pub const SYMMETRY_TOL: f64 = 1e-10;

    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = asymmetry(&m);
        if !(asym <= Self::SYMMETRY_TOL * scale) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Symmetrises `(m + mᵀ)/2` without checking.
    pub fn symmetrized(m: &Matrix4<f64>) -> Self {
        Self(symmetrize(m))
    }

    pub fn vacuum() -> Self {
        Self(Matrix4::identity() * 0.5)
    }

    pub fn zeros() -> Self {
        Self(Matrix4::zeros())
    }

    pub fn as_matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix4<f64> {
        self.0
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.0.symmetric_eigenvalues().min()
    }

    /// Positive definite with both symplectic eigenvalues `≥ 1/2 − tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        match crate::entanglement::symplectic_eigenvalues(self) {
            Ok((nu1, _)) => nu1 >= 0.5 - tol,
            Err(_) => false,
        }
    }
}

impl Deref for CovMatrix {
    type Target = Matrix4<f64>;

    fn deref(&self) -> &Matrix4<f64> {
        &self.0
    }
}

impl From<CovMatrix> for Matrix4<f64> {
    fn from(c: CovMatrix) -> Self {
        c.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> SystemParams {
        SystemParams { g1: 0.0, ..SystemParams::default() }
    }

    #[test]
    fn coupling_rate_scaling() {
        let geom = CouplingGeometry { k: 1e-24, n: 1, r: 1e-6, m: 1e-18 };
        let g = coupling_rate(&geom, 1e5).unwrap();
        let g2 = coupling_rate(&CouplingGeometry { k: 2e-24, ..geom }, 1e5).unwrap();
        assert_relative_eq!(g2, 2.0 * g, max_relative = 1e-15);
        let g3 = coupling_rate(&CouplingGeometry { r: 2e-6, ..geom }, 1e5).unwrap();
        assert_relative_eq!(g3, g / 8.0, max_relative = 1e-15);
        let zero = coupling_rate(&CouplingGeometry { k: 0.0, ..geom }, 1e5).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn coupling_rate_coulomb_desk_value() {
        // Two 1e-18 kg particles carrying 100 e each, 1 µm apart, in a
        // 2π·100 kHz trap. Reference value from an independent REPL evaluation
        // of k/(2nR^(2+n)mΩ₀) with CODATA constants.
        let e = 1.602_176_634e-19;
        let eps0 = 8.854_187_812_8e-12;
        let k = (100.0 * e) * (100.0 * e) / (4.0 * PI * eps0);
        let geom = CouplingGeometry { k, n: 1, r: 1e-6, m: 1e-18 };
        let g = coupling_rate(&geom, 2.0 * PI * 1e5).unwrap();
        assert_relative_eq!(g, 1_835_913.982_757_7, max_relative = 1e-9);
    }

    #[test]
    fn coupling_rate_domain_errors() {
        let geom = CouplingGeometry { k: 1.0, n: 1, r: 1.0, m: 1.0 };
        assert!(coupling_rate(&CouplingGeometry { r: 0.0, ..geom }, 1.0).is_err());
        assert!(coupling_rate(&CouplingGeometry { m: -1.0, ..geom }, 1.0).is_err());
        assert!(coupling_rate(&CouplingGeometry { n: 0, ..geom }, 1.0).is_err());
    }

    #[test]
    fn modulation_values() {
        let p = SystemParams { g0: 0.2, g1: 0.05, omega_mod: 2.5, ..Default::default() };
        assert_relative_eq!(coupling_modulation(&p, 0.0), 0.3, epsilon = 1e-15);
        let quarter = PI / 2.0 / p.omega_mod;
        assert_relative_eq!(coupling_modulation(&p, quarter), 0.2, epsilon = 1e-15);
        let t = 0.377;
        let period = p.period().unwrap();
        assert_relative_eq!(coupling_modulation(&p, t + period), coupling_modulation(&p, t), epsilon = 1e-14);
    }

    #[test]
    fn drift_uncoupled_is_two_rotations() {
        let p = SystemParams { g0: 0.0, g1: 0.0, gamma: 0.0, ..Default::default() };
        let a = drift_matrix(&p, 0.3);
        let rot = nalgebra::Matrix2::new(0.0, 1.0, -1.0, 0.0);
        assert_eq!(a.fixed_view::<2, 2>(0, 0).into_owned(), rot);
        assert_eq!(a.fixed_view::<2, 2>(2, 2).into_owned(), rot);
        assert_eq!(a.fixed_view::<2, 2>(0, 2).into_owned(), nalgebra::Matrix2::zeros());
        assert_eq!(a.fixed_view::<2, 2>(2, 0).into_owned(), nalgebra::Matrix2::zeros());
    }

    #[test]
    fn drift_normal_mode_frequencies() {
        let a = drift_matrix(&reference(), 0.0);
        let mut freqs: alloc::vec::Vec<f64> =
            a.complex_eigenvalues().iter().map(|z| z.im.abs()).collect();
        freqs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!(a.complex_eigenvalues().iter().all(|z| z.re.abs() < 1e-12));
        assert_relative_eq!(freqs[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(freqs[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(freqs[2], 1.8f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(freqs[3], 1.8f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn drift_is_periodic() {
        let p = SystemParams::default();
        let period = p.period().unwrap();
        for &t in &[0.0, 0.4, 1.7] {
            assert!((drift_matrix(&p, t) - drift_matrix(&p, t + period)).amax() < 1e-14);
        }
    }

    #[test]
    fn coupling_acts_only_on_relative_mode() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        // Columns: COM x, COM p, REL x, REL p.
        #[rustfmt::skip]
        let u = Matrix4::new(
            s, 0.0, s, 0.0,
            0.0, s, 0.0, s,
            s, 0.0, -s, 0.0,
            0.0, s, 0.0, -s,
        );
        let p = SystemParams::default();
        let a0 = drift_matrix(&SystemParams { g0: 0.0, g1: 0.0, ..p }, 0.0);
        let dg = u.transpose() * (drift_matrix(&p, 0.1) - a0) * u;
        for i in 0..4 {
            for j in 0..4 {
                if i < 2 || j < 2 {
                    assert!(dg[(i, j)].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn control_matrix_actuates_momenta() {
        let b = control_matrix();
        let u = nalgebra::Vector2::new(0.3, -1.2);
        assert_eq!(b * u, Vector4::new(0.0, 0.3, 0.0, -1.2));
        assert_eq!(b * nalgebra::Vector2::zeros(), Vector4::zeros());
        assert_eq!(b.rank(1e-12), 2);
    }

    #[test]
    fn measurement_defaults() {
        let p = SystemParams { eta: 0.0, ..Default::default() };
        assert_eq!(measurement_model(&p).c, Matrix2x4::zeros());
        let p = SystemParams { eta: 1.0, gamma_ba: 0.05, ..Default::default() };
        let mm = measurement_model(&p);
        assert_relative_eq!(mm.c[(0, 0)], 0.2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(mm.c[(1, 2)], 0.2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(mm.w, Matrix2::identity());
        assert_eq!(mm.m, Matrix4x2::zeros());
    }

    #[test]
    fn process_noise_values() {
        let p = SystemParams { gamma_ba: 0.0, gamma_th: 0.0, ..Default::default() };
        assert_eq!(process_noise(&p), Matrix4::zeros());
        let v = process_noise(&SystemParams::default());
        assert_relative_eq!(v[(1, 1)], 0.0525, epsilon = 1e-15);
        assert_relative_eq!(v[(3, 3)], 0.0525, epsilon = 1e-15);
        assert_eq!(v[(0, 0)], 0.0);
    }

    #[test]
    fn epr_cost_at_pi_penalises_sum_and_difference() {
        let p = epr_cost_matrix(PI);
        let r_minus = Vector4::new(1.0, 0.0, 1.0, 0.0);
        let r_plus = Vector4::new(0.0, 1.0, 0.0, -1.0);
        let expected = r_minus * r_minus.transpose() + r_plus * r_plus.transpose();
        assert!((p - expected).amax() < 1e-15);
        let p0 = epr_cost_matrix(0.0);
        let r_minus = Vector4::new(1.0, 0.0, -1.0, 0.0);
        let r_plus = Vector4::new(0.0, 1.0, 0.0, 1.0);
        assert!((p0 - (r_minus * r_minus.transpose() + r_plus * r_plus.transpose())).amax() < 1e-15);
    }

    #[test]
    fn epr_cost_spectrum() {
        for k in 0..16 {
            let phi = k as f64 * 0.41;
            let p = epr_cost_matrix(phi);
            let mut ev: alloc::vec::Vec<f64> = p.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Rank two and positive semi-definite.
            assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
            assert!(ev[2] > 0.5);
            // The nonzero eigenvalues are 2 ± |r₋·r₊| = 2 ± |sin 2φ|.
            let overlap = (2.0 * phi).sin().abs();
            assert_relative_eq!(ev[2], 2.0 - overlap, epsilon = 1e-12);
            assert_relative_eq!(ev[3], 2.0 + overlap, epsilon = 1e-12);
            assert_relative_eq!(p.trace(), 4.0, epsilon = 1e-12);
            assert_eq!(p, p.transpose());
        }
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::default().validate().is_ok());
        assert!(SystemParams { eta: 1.5, ..Default::default() }.validate().is_err());
        assert!(SystemParams { q: 0.0, ..Default::default() }.validate().is_err());
        assert!(SystemParams { gamma_ba: -0.1, ..Default::default() }.validate().is_err());
        assert!(SystemParams { omega_mod: 0.0, ..Default::default() }.validate().is_err());
        assert!(SystemParams { omega_mod: 0.0, g1: 0.0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn cov_matrix_rejects_asymmetry() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 1e-3;
        assert!(CovMatrix::new(m).is_err());
        assert!(CovMatrix::vacuum().is_physical(1e-12));
    }
}
