//! The driven, dissipative two-level emitter.
//!
//! Basis ordering is {|g>, |e>} and density-like matrices are stored flat
//! as [gg, ge, eg, ee]. The rotating-frame Hamiltonian is
//! H/hbar = -Delta |e><e| + Omega(t)/2 (sigma + sigma_dag) with Delta the
//! laser detuning from the transition, and dissipation enters through the
//! collapse operators sqrt(gamma) sigma (spontaneous emission) and
//! sqrt(gamma_deph/2) sigma_z (pure dephasing).

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{self, OdeOptions, State};

pub const SQRT_8LN2: f64 = 2.354_820_045_030_949_3; // sqrt(8 ln 2)

#[derive(Debug, Error)]
pub enum TlsError {
    #[error("invalid emitter parameters: {0}")]
    InvalidEmitter(String),
    #[error("invalid pulse parameters: {0}")]
    InvalidPulse(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("integration failure: {0}")]
    IntegrationFailure(#[from] ode::OdeError),
    #[error("inconsistent timescales: T2 = {t2} exceeds 2*T1 = {max} (negative pure dephasing)")]
    InconsistentTimescales { t2: f64, max: f64 },
}

/// Physical parameters of one emitter. Rates are in inverse time units of
/// the chosen internal scale (conventionally gamma of emitter 1), detunings
/// and wandering widths are angular frequencies in the same scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    /// Radiative decay rate, > 0.
    pub gamma: f64,
    /// Pure dephasing rate, >= 0.
    pub gamma_deph: f64,
    /// Laser detuning Delta = omega_laser - omega_transition.
    pub laser_detuning: f64,
    /// FWHM of the Gaussian emission-frequency distribution (spectral
    /// wandering); 0 means a noise-free emitter.
    pub wander_fwhm: f64,
    pub label: String,
}

impl EmitterSpec {
    pub fn new(label: impl Into<String>, gamma: f64) -> Self {
        EmitterSpec {
            gamma,
            gamma_deph: 0.0,
            laser_detuning: 0.0,
            wander_fwhm: 0.0,
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<(), TlsError> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(TlsError::InvalidEmitter(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if self.gamma_deph < 0.0 || !self.gamma_deph.is_finite() {
            return Err(TlsError::InvalidEmitter(format!(
                "gamma_deph must be >= 0, got {}",
                self.gamma_deph
            )));
        }
        if self.wander_fwhm < 0.0 || !self.wander_fwhm.is_finite() {
            return Err(TlsError::InvalidEmitter(format!(
                "wander_fwhm must be >= 0, got {}",
                self.wander_fwhm
            )));
        }
        if !self.laser_detuning.is_finite() {
            return Err(TlsError::InvalidEmitter("laser_detuning must be finite".into()));
        }
        Ok(())
    }

    /// Coherence decay rate along the emission tail: gamma/2 + gamma_deph.
    pub fn coherence_rate(&self) -> f64 {
        0.5 * self.gamma + self.gamma_deph
    }
}

/// Gaussian drive pulse. The envelope is calibrated so that the integrated
/// Rabi frequency equals `area` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Intensity-envelope FWHM (the "pulse width").
    pub fwhm: f64,
    /// Pulse area in radians; pi inverts the emitter.
    pub area: f64,
    /// Center time t0 of the Gaussian.
    pub center: f64,
}

impl PulseSpec {
    /// Pulse of given width centered at 5 sigma with area pi, so the
    /// envelope is fully contained in t >= 0.
    pub fn pi_pulse(fwhm: f64) -> Self {
        let sigma = fwhm / SQRT_8LN2;
        PulseSpec {
            fwhm,
            area: std::f64::consts::PI,
            center: 5.0 * sigma,
        }
    }

    pub fn validate(&self) -> Result<(), TlsError> {
        if !(self.fwhm > 0.0) || !self.fwhm.is_finite() {
            return Err(TlsError::InvalidPulse(format!(
                "fwhm must be positive, got {}",
                self.fwhm
            )));
        }
        if !(self.area > 0.0) || !self.area.is_finite() {
            return Err(TlsError::InvalidPulse(format!(
                "area must be positive, got {}",
                self.area
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.fwhm / SQRT_8LN2
    }

    /// Start of the truncated support, t0 - 6 sigma (envelope < 1e-8 of peak).
    pub fn support_start(&self) -> f64 {
        self.center - 6.0 * self.sigma()
    }

    /// End of the truncated support, t0 + 6 sigma.
    pub fn support_end(&self) -> f64 {
        self.center + 6.0 * self.sigma()
    }

    pub fn shifted(&self, dt: f64) -> Self {
        PulseSpec {
            center: self.center + dt,
            ..*self
        }
    }
}

/// Rabi frequency Omega(t) = area/(sigma sqrt(2 pi)) exp(-(t-t0)^2/(2 sigma^2)),
/// truncated to zero outside t0 +/- 6 sigma.
pub fn rabi_envelope(pulse: &PulseSpec, t: f64) -> f64 {
    let sigma = pulse.sigma();
    let x = (t - pulse.center) / sigma;
    if x.abs() > 6.0 {
        return 0.0;
    }
    pulse.area / (sigma * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * x * x).exp()
}

/// Fixed operators of the two-level system in the {|g>, |e>} basis.
pub struct OperatorBasis;

impl OperatorBasis {
    /// Lowering operator sigma = |g><e|.
    pub fn sigma() -> Matrix2<C64> {
        Matrix2::new(
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        )
    }

    /// Raising operator sigma_dag = |e><g|.
    pub fn sigma_dag() -> Matrix2<C64> {
        Self::sigma().adjoint()
    }

    /// sigma_z = |e><e| - |g><g|.
    pub fn sigma_z() -> Matrix2<C64> {
        Matrix2::new(
            C64::new(-1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        )
    }

    /// Number operator sigma_dag sigma = |e><e|.
    pub fn number() -> Matrix2<C64> {
        Matrix2::new(
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        )
    }
}

/// Rotating-frame Hamiltonian H(t)/hbar = -Delta n + Omega(t)/2 (sigma + sigma_dag).
pub fn hamiltonian(emitter: &EmitterSpec, pulse: &PulseSpec, t: f64) -> Matrix2<C64> {
    let half_rabi = 0.5 * rabi_envelope(pulse, t);
    Matrix2::new(
        C64::new(0.0, 0.0),
        C64::new(half_rabi, 0.0),
        C64::new(half_rabi, 0.0),
        C64::new(-emitter.laser_detuning, 0.0),
    )
}

/// Collapse operators: sqrt(gamma) sigma, plus sqrt(gamma_deph/2) sigma_z
/// when pure dephasing is present.
pub fn collapse_operators(emitter: &EmitterSpec) -> Vec<Matrix2<C64>> {
    let mut ops = vec![OperatorBasis::sigma().map(|v| v * emitter.gamma.sqrt())];
    if emitter.gamma_deph > 0.0 {
        ops.push(OperatorBasis::sigma_z().map(|v| v * (0.5 * emitter.gamma_deph).sqrt()));
    }
    ops
}

/// Generic Lindblad generator applied to an arbitrary (not necessarily
/// Hermitian) 2x2 matrix: -i[H, m] + sum_mu (L m L^+ - 1/2 {L^+ L, m}).
/// Used as the reference route for testing the specialized RHS below.
pub fn lindblad_apply(h: &Matrix2<C64>, collapse: &[Matrix2<C64>], m: &Matrix2<C64>) -> Matrix2<C64> {
    let i = C64::new(0.0, 1.0);
    let mut out = (h * m - m * h).map(|v| -i * v);
    for l in collapse {
        let ld = l.adjoint();
        let ldl = ld * l;
        out += l * m * ld - (ldl * m + m * ldl).map(|v| 0.5 * v);
    }
    out
}

/// Lindblad parameters with the operator structure folded in analytically.
#[derive(Debug, Clone, Copy)]
pub struct LindbladParams {
    pub gamma: f64,
    pub gamma_deph: f64,
    pub delta: f64,
}

impl LindbladParams {
    pub fn of(emitter: &EmitterSpec) -> Self {
        LindbladParams {
            gamma: emitter.gamma,
            gamma_deph: emitter.gamma_deph,
            delta: emitter.laser_detuning,
        }
    }

    /// Generator applied to one flat matrix [gg, ge, eg, ee] with drive
    /// strength `w` = Omega(t). Identical to `lindblad_apply` on the same
    /// inputs; written out componentwise for speed on the hot path.
    #[inline]
    pub fn apply_flat(&self, w: f64, m: &[C64; 4]) -> [C64; 4] {
        let (gg, ge, eg, ee) = (m[0], m[1], m[2], m[3]);
        let i = C64::new(0.0, 1.0);
        let hw = 0.5 * w;
        let gcoh = 0.5 * self.gamma + self.gamma_deph;
        [
            -i * hw * (eg - ge) + self.gamma * ee,
            -i * (hw * (ee - gg) + self.delta * ge) - gcoh * ge,
            -i * (hw * (gg - ee) - self.delta * eg) - gcoh * eg,
            -i * hw * (ge - eg) - self.gamma * ee,
        ]
    }
}

/// RHS closure for N regression seeds evolving under the same generator.
pub fn master_rhs<const N: usize>(
    params: LindbladParams,
    pulse: PulseSpec,
) -> impl Fn(f64, &State<N>) -> State<N> {
    move |t, y| {
        let w = rabi_envelope(&pulse, t);
        let mut out = State::<N>::zeros();
        for m in 0..N {
            out.0[m] = params.apply_flat(w, &y.0[m]);
        }
        out
    }
}

/// Validated 2x2 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Matrix2<C64>);

impl DensityMatrix {
    pub fn new(m: Matrix2<C64>) -> Result<Self, TlsError> {
        let dm = DensityMatrix(m);
        dm.validate()?;
        Ok(dm)
    }

    pub fn ground() -> Self {
        DensityMatrix(Matrix2::new(
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ))
    }

    pub fn excited() -> Self {
        DensityMatrix(Matrix2::new(
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ))
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn excited_population(&self) -> f64 {
        self.0[(1, 1)].re
    }

    pub fn coherence(&self) -> C64 {
        self.0[(0, 1)]
    }

    /// Hermiticity to 1e-10, unit trace to 1e-8, eigenvalues >= -1e-8.
    pub fn validate(&self) -> Result<(), TlsError> {
        let m = &self.0;
        let herm = (m - m.adjoint()).norm();
        if herm > 1e-10 {
            return Err(TlsError::InvalidState(format!(
                "not Hermitian: |m - m^+| = {herm:.3e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(TlsError::InvalidState(format!("trace = {tr} != 1")));
        }
        // eigenvalues of a Hermitian 2x2 via trace/determinant
        let half_tr = 0.5 * tr.re;
        let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
        let disc = (half_tr * half_tr - det).max(0.0).sqrt();
        if half_tr - disc < -1e-8 {
            return Err(TlsError::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                half_tr - disc
            )));
        }
        Ok(())
    }

    fn to_flat(&self) -> [C64; 4] {
        [self.0[(0, 0)], self.0[(0, 1)], self.0[(1, 0)], self.0[(1, 1)]]
    }

    fn from_flat(f: &[C64; 4]) -> Self {
        DensityMatrix(Matrix2::new(f[0], f[1], f[2], f[3]))
    }
}

/// Solve the master equation from t0 to t1 with adaptive stepping; the
/// pulse support edges inside the interval are treated as hard breakpoints
/// so the integrator cannot step blindly across the drive window.
pub fn propagate(
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    emitter: &EmitterSpec,
    pulse: &PulseSpec,
    opts: &OdeOptions,
) -> Result<DensityMatrix, TlsError> {
    if t1 < t0 {
        return Err(TlsError::InvalidState(format!("t1 = {t1} < t0 = {t0}")));
    }
    rho0.validate()?;
    emitter.validate()?;
    pulse.validate()?;

    let rhs = master_rhs::<1>(LindbladParams::of(emitter), *pulse);
    let mut y = State([rho0.to_flat()]);
    let mut t = t0;
    for edge in [pulse.support_start(), pulse.support_end()] {
        if edge > t && edge < t1 {
            y = ode::integrate(&rhs, t, edge, y, opts)?;
            t = edge;
        }
    }
    y = ode::integrate(&rhs, t, t1, y, opts)?;
    let rho = DensityMatrix::from_flat(&y.0[0]);
    rho.validate()?;
    Ok(rho)
}

/// gamma = 1/T1, gamma_deph = 1/T2 - 1/(2 T1).
pub fn t1t2_to_rates(t1: f64, t2: f64) -> Result<(f64, f64), TlsError> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(TlsError::InvalidEmitter(format!(
            "T1 and T2 must be positive, got T1 = {t1}, T2 = {t2}"
        )));
    }
    let gamma_deph = 1.0 / t2 - 0.5 / t1;
    if gamma_deph < -1e-15 {
        return Err(TlsError::InconsistentTimescales { t2, max: 2.0 * t1 });
    }
    Ok((1.0 / t1, gamma_deph.max(0.0)))
}

/// Exact one-step propagator of the undriven generator: populations decay
/// (ee -> gg transfer) at gamma and coherences rotate/decay at
/// +/- i Delta - gamma/2 - gamma_deph. Valid only where Omega(t) = 0.
#[derive(Debug, Clone, Copy)]
pub struct FreeStep {
    pub pop_decay: f64,
    pub coh_ge: C64,
    pub coh_eg: C64,
}

impl LindbladParams {
    pub fn free_step(&self, h: f64) -> FreeStep {
        let gcoh = 0.5 * self.gamma + self.gamma_deph;
        FreeStep {
            pop_decay: (-self.gamma * h).exp(),
            coh_ge: (C64::new(-gcoh, -self.delta) * h).exp(),
            coh_eg: (C64::new(-gcoh, self.delta) * h).exp(),
        }
    }
}

impl FreeStep {
    #[inline]
    pub fn apply(&self, m: &mut [C64; 4]) {
        let ee_old = m[3];
        m[3] *= self.pop_decay;
        m[0] += ee_old - m[3]; // population conserved within the pair
        m[1] *= self.coh_ge;
        m[2] *= self.coh_eg;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operator_algebra_invariants() {
        let s = OperatorBasis::sigma();
        let sd = OperatorBasis::sigma_dag();
        let sz = OperatorBasis::sigma_z();
        assert_eq!((s * s).norm(), 0.0);
        let anti = sd * s + s * sd;
        assert_abs_diff_eq!((anti - Matrix2::identity()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((sz - sz.adjoint()).norm(), 0.0, epsilon = 1e-15);
        // eigenvalues +- 1: trace 0, det -1
        assert_abs_diff_eq!(sz.trace().re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((sz[(0, 0)] * sz[(1, 1)]).re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!((OperatorBasis::number() - sd * s).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn envelope_area_and_peak() {
        let pulse = PulseSpec::pi_pulse(0.026);
        // peak value pi/(sigma sqrt(2 pi))
        let peak = rabi_envelope(&pulse, pulse.center);
        let expect = std::f64::consts::PI / (pulse.sigma() * (2.0 * std::f64::consts::PI).sqrt());
        assert_abs_diff_eq!(peak, expect, epsilon = 1e-12);
        // numerically integrated area over the support
        let n = 20001;
        let (a, b) = (pulse.support_start(), pulse.support_end());
        let h = (b - a) / (n - 1) as f64;
        let mut area = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            area += w * h * rabi_envelope(&pulse, a + i as f64 * h);
        }
        assert_abs_diff_eq!(area, std::f64::consts::PI, epsilon = 1e-6);
        // field envelope at t0 +/- fwhm/2 is half the peak once expressed
        // through sigma = fwhm/sqrt(8 ln 2): the *intensity* FWHM convention
        let half = rabi_envelope(&pulse, pulse.center + 0.5 * pulse.fwhm);
        assert_abs_diff_eq!(half / peak, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_structure() {
        let mut e = EmitterSpec::new("e", 1.0);
        e.laser_detuning = 0.7;
        let pulse = PulseSpec::pi_pulse(0.026);
        // far outside the pulse with zero detuning: zero matrix
        let e0 = EmitterSpec::new("e0", 1.0);
        assert_eq!(hamiltonian(&e0, &pulse, -10.0).norm(), 0.0);
        // at center: off-diagonals Omega/2, real
        let h = hamiltonian(&e0, &pulse, pulse.center);
        assert_abs_diff_eq!(h[(0, 1)].re, 0.5 * rabi_envelope(&pulse, pulse.center), epsilon = 1e-14);
        assert_eq!(h[(0, 1)].im, 0.0);
        // Hermiticity over random draws
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut em = EmitterSpec::new("r", 1.0);
            em.laser_detuning = rng.gen_range(-5.0..5.0);
            let t = rng.gen_range(-0.1..0.3);
            let h = hamiltonian(&em, &pulse, t);
            assert_abs_diff_eq!((h - h.adjoint()).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn collapse_operator_shapes() {
        let e = EmitterSpec::new("e", 1.0);
        let ops = collapse_operators(&e);
        assert_eq!(ops.len(), 1);
        assert_abs_diff_eq!(ops[0][(0, 1)].re, 1.0, epsilon = 1e-15);

        let mut e2 = EmitterSpec::new("e2", 4.0);
        e2.gamma_deph = 2.0;
        let ops2 = collapse_operators(&e2);
        assert_eq!(ops2.len(), 2);
        assert_abs_diff_eq!(ops2[0][(0, 1)].re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ops2[1][(1, 1)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ops2[1][(0, 0)].re, -1.0, epsilon = 1e-15);
    }

    /// The componentwise RHS agrees with the operator-built Lindblad
    /// generator on random states, times and parameters.
    #[test]
    fn fast_rhs_matches_generic_lindblad() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pulse = PulseSpec::pi_pulse(0.026);
        for _ in 0..100 {
            let mut e = EmitterSpec::new("r", rng.gen_range(0.1..5.0));
            e.gamma_deph = rng.gen_range(0.0..3.0);
            e.laser_detuning = rng.gen_range(-4.0..4.0);
            let t = rng.gen_range(0.0..0.2);
            let m = Matrix2::new(
                C64::new(rng.gen(), rng.gen()),
                C64::new(rng.gen(), rng.gen()),
                C64::new(rng.gen(), rng.gen()),
                C64::new(rng.gen(), rng.gen()),
            );
            let h = hamiltonian(&e, &pulse, t);
            let ops = collapse_operators(&e);
            let reference = lindblad_apply(&h, &ops, &m);
            let flat = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
            let fast = LindbladParams::of(&e).apply_flat(rabi_envelope(&pulse, t), &flat);
            let fast_m = Matrix2::new(fast[0], fast[1], fast[2], fast[3]);
            assert!((reference - fast_m).norm() < 1e-12 * (1.0 + reference.norm()));
        }
    }

    #[test]
    fn free_decay_from_excited() {
        let e = EmitterSpec::new("e", 1.0);
        let pulse = PulseSpec {
            fwhm: 0.01,
            area: std::f64::consts::PI,
            center: -100.0, // long gone
        };
        let rho = propagate(
            &DensityMatrix::excited(),
            0.0,
            1.0,
            &e,
            &pulse,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(rho.excited_population(), (-1.0_f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn pi_pulse_inverts_in_small_gamma_limit() {
        let e = EmitterSpec::new("e", 1e-9);
        let pulse = PulseSpec::pi_pulse(0.026);
        let rho = propagate(
            &DensityMatrix::ground(),
            0.0,
            pulse.support_end(),
            &e,
            &pulse,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((rho.excited_population() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn pure_dephasing_decays_coherence_only() {
        let mut e = EmitterSpec::new("e", 1e-12);
        e.gamma_deph = 1.0;
        let half = C64::new(0.5, 0.0);
        let rho0 = DensityMatrix::new(Matrix2::new(half, half, half, half)).unwrap();
        let pulse = PulseSpec {
            fwhm: 0.01,
            area: std::f64::consts::PI,
            center: -100.0,
        };
        let rho = propagate(&rho0, 0.0, 1.0, &e, &pulse, &OdeOptions::default()).unwrap();
        assert_abs_diff_eq!(rho.coherence().re, 0.5 * (-1.0_f64).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(rho.excited_population(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn free_decay_closed_forms_all_components() {
        // with Omega = 0 the solution is the optical-Bloch free decay;
        // compare every component at relative 1e-7
        let mut e = EmitterSpec::new("e", 0.8);
        e.gamma_deph = 0.3;
        e.laser_detuning = 1.7;
        let pulse = PulseSpec {
            fwhm: 0.01,
            area: 1.0,
            center: -100.0,
        };
        let a = C64::new(0.6, 0.0);
        let c = C64::new(0.2, 0.1);
        let rho0 = DensityMatrix::new(Matrix2::new(a, c, c.conj(), C64::new(0.4, 0.0))).unwrap();
        let t = 1.3;
        let rho = propagate(&rho0, 0.0, t, &e, &pulse, &OdeOptions::default()).unwrap();
        let ee = 0.4 * (-e.gamma * t).exp();
        let gcoh = 0.5 * e.gamma + e.gamma_deph;
        // m_ge factor e^{(-i Delta - gcoh) t}
        let ge = c * (C64::new(-gcoh, -e.laser_detuning) * t).exp();
        assert_abs_diff_eq!(rho.excited_population(), ee, epsilon = 1e-7 * ee);
        assert!((rho.coherence() - ge).norm() < 1e-7 * ge.norm());
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 1.0 - ee, epsilon = 1e-7);
    }

    #[test]
    fn free_step_matches_integrator() {
        let mut e = EmitterSpec::new("e", 1.3);
        e.gamma_deph = 0.4;
        e.laser_detuning = -2.1;
        let params = LindbladParams::of(&e);
        let mut flat = [
            C64::new(0.3, 0.0),
            C64::new(0.2, -0.1),
            C64::new(0.2, 0.1),
            C64::new(0.7, 0.0),
        ];
        let h = 0.37;
        let rhs = move |_t: f64, y: &State<1>| State([params.apply_flat(0.0, &y.0[0])]);
        let numeric = ode::integrate(&rhs, 0.0, h, State([flat]), &OdeOptions::default()).unwrap();
        params.free_step(h).apply(&mut flat);
        for (a, b) in numeric.0[0].iter().zip(flat.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn t1t2_conversion() {
        assert_eq!(t1t2_to_rates(1.0, 2.0).unwrap(), (1.0, 0.0));
        let (g, gd) = t1t2_to_rates(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gd, 0.5, epsilon = 1e-15);
        assert!(matches!(
            t1t2_to_rates(1.0, 2.5),
            Err(TlsError::InconsistentTimescales { .. })
        ));
    }

    #[test]
    fn trace_preserved_through_pulse() {
        let e = EmitterSpec::new("e", 1.0);
        let pulse = PulseSpec::pi_pulse(0.026);
        let mut rho = DensityMatrix::ground();
        for t in [0.05, 0.1, 0.2, 1.0, 4.0] {
            rho = propagate(&rho, 0.0, t, &e, &pulse, &OdeOptions::default()).unwrap();
            let tr = rho.matrix().trace();
            assert!((tr.re - 1.0).abs() < 1e-8, "trace drift {}", tr.re - 1.0);
            rho = DensityMatrix::ground();
        }
    }
}
