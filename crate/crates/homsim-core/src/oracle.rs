//! Closed-form reference values in the instantaneous-excitation limit.
//!
//! For delta-like pulses each emitter releases exactly one photon as an
//! exponential wavepacket, and every integral of the coincidence assembly
//! can be done by hand. The resulting scalar is the independent yardstick
//! the full simulator is tested against in its ideal limit, so this module
//! derives it twice: once in closed form and once by brute-force 2-D
//! quadrature of the same integrand (the oracle's own oracle).
//!
//! With wavepackets G1_i(t, tau) = gamma_i e^{-gamma_i t}
//! e^{-(gamma_i/2 + gamma_d,i) tau} (emitter 2 delayed by delta_tau),
//! no multi-photon term, and the interference phase e^{-i dw tau}:
//!
//!   g2 = 1/2 (1 - V),
//!   V  = [2 g1 g2 / (g1+g2)] [G / (G^2 + dw^2)]
//!        e^{-g1 max(dt,0) - g2 max(-dt,0)},
//!   G  = (g1+g2)/2 + gamma_d12.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;
use crate::tls::SQRT_8LN2;

/// Parameters of the ideal-limit pair. Only the sum of the two dephasing
/// rates enters any observable, so only the sum is carried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealParams {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Spectral detuning of the bare transitions.
    pub delta_omega: f64,
    /// Arrival-time delay; positive means the emitter-2 photon is late.
    pub delta_tau: f64,
    /// gamma_d1 + gamma_d2.
    pub gamma_deph_total: f64,
}

impl Default for IdealParams {
    fn default() -> Self {
        IdealParams {
            gamma1: 1.0,
            gamma2: 1.0,
            delta_omega: 0.0,
            delta_tau: 0.0,
            gamma_deph_total: 0.0,
        }
    }
}

impl IdealParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma1 > 0.0
            && self.gamma2 > 0.0
            && self.gamma_deph_total >= 0.0
            && self.delta_omega.is_finite()
            && self.delta_tau.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("bad ideal parameters: {self:?}")))
        }
    }

    /// Coherence decay rate of the interference product.
    fn coherence_sum(&self) -> f64 {
        0.5 * (self.gamma1 + self.gamma2) + self.gamma_deph_total
    }

    /// Wavepacket overlap factor V in [0, 1].
    fn visibility(&self) -> f64 {
        let g = self.coherence_sum();
        let lorentz = g / (g * g + self.delta_omega * self.delta_omega);
        let overlap = 2.0 * self.gamma1 * self.gamma2 / (self.gamma1 + self.gamma2);
        let delay = (-self.gamma1 * self.delta_tau.max(0.0)
            - self.gamma2 * (-self.delta_tau).max(0.0))
            .exp();
        overlap * lorentz * delay
    }
}

/// Normalized coincidence value of the ideal pair, in [0, 1/2].
pub fn ideal_g2hom(params: &IdealParams) -> Result<f64> {
    params.validate()?;
    Ok(0.5 * (1.0 - params.visibility()))
}

/// Ideal value averaged over a zero-mean Gaussian spectral detuning of the
/// given total width (FWHM of the detuning distribution). Plain
/// Gauss-Hermite, refined until the value settles.
pub fn ideal_g2hom_wandering(params: &IdealParams, fwhm: f64) -> Result<f64> {
    params.validate()?;
    if !(fwhm >= 0.0) {
        return Err(Error::Config(format!("negative wandering width {fwhm}")));
    }
    if fwhm == 0.0 {
        return ideal_g2hom(params);
    }
    let sigma = fwhm / SQRT_8LN2;
    let average = |n: usize| -> f64 {
        let rule = gauss_hermite(n);
        let wsum: f64 = rule.weights.iter().sum();
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| {
                let p = IdealParams {
                    delta_omega: params.delta_omega + std::f64::consts::SQRT_2 * sigma * x,
                    ..*params
                };
                w * 0.5 * (1.0 - p.visibility())
            })
            .sum::<f64>()
            / wsum
    };
    let mut n = 41;
    let mut value = average(n);
    loop {
        let next = 2 * n + 1;
        if next > 1400 {
            break;
        }
        let refined = average(next);
        let settled = (refined - value).abs() < 1e-9;
        n = next;
        value = refined;
        if settled {
            break;
        }
    }
    Ok(value)
}

/// Mismatch axes the ideal threshold can be inverted along. All other
/// parameters stay at their ideal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleAxis {
    /// gamma2 / gamma1 >= 1.
    GammaRatio,
    DeltaOmega,
    DeltaTau,
    /// Total dephasing gamma_d1 + gamma_d2.
    GammaDeph,
    /// Combined FWHM of the wandering detuning distribution.
    WanderFwhm,
}

impl OracleAxis {
    fn name(&self) -> &'static str {
        match self {
            OracleAxis::GammaRatio => "gamma_ratio",
            OracleAxis::DeltaOmega => "delta_omega",
            OracleAxis::DeltaTau => "delta_tau",
            OracleAxis::GammaDeph => "gamma_deph",
            OracleAxis::WanderFwhm => "wander_fwhm",
        }
    }

    fn scan_range(&self) -> (f64, f64) {
        match self {
            OracleAxis::GammaRatio => (1.0, 100.0),
            OracleAxis::DeltaOmega => (0.0, 30.0),
            OracleAxis::DeltaTau => (0.0, 30.0),
            OracleAxis::GammaDeph => (0.0, 60.0),
            OracleAxis::WanderFwhm => (0.0, 60.0),
        }
    }

    fn value_at(&self, x: f64) -> Result<f64> {
        let mut p = IdealParams::default();
        match self {
            OracleAxis::GammaRatio => {
                p.gamma2 = x;
                ideal_g2hom(&p)
            }
            OracleAxis::DeltaOmega => {
                p.delta_omega = x;
                ideal_g2hom(&p)
            }
            OracleAxis::DeltaTau => {
                p.delta_tau = x;
                ideal_g2hom(&p)
            }
            OracleAxis::GammaDeph => {
                p.gamma_deph_total = x;
                ideal_g2hom(&p)
            }
            OracleAxis::WanderFwhm => ideal_g2hom_wandering(&p, x),
        }
    }
}

impl FromStr for OracleAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma_ratio" => Ok(OracleAxis::GammaRatio),
            "delta_omega" => Ok(OracleAxis::DeltaOmega),
            "delta_tau" => Ok(OracleAxis::DeltaTau),
            "gamma_deph" => Ok(OracleAxis::GammaDeph),
            "wander_fwhm" => Ok(OracleAxis::WanderFwhm),
            other => Err(Error::Config(format!(
                "unknown threshold axis '{other}' (expected gamma_ratio, delta_omega, \
                 delta_tau, gamma_deph, or wander_fwhm)"
            ))),
        }
    }
}

/// Largest axis value at which the ideal pair still reaches the target:
/// bracket on a 16-point scan, then bisect to a relative width of 1e-3.
///
/// All axes are non-decreasing away from the ideal point, so the largest
/// sign change is the only one; scanning from above keeps that true even
/// if future axes pick up non-monotone segments.
pub fn ideal_threshold(axis: OracleAxis, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::Config(format!(
            "threshold target must lie in (0, 0.5), got {target}"
        )));
    }
    let (lo, hi) = axis.scan_range();
    let n_scan = 16;
    let step = (hi - lo) / n_scan as f64;

    let mut bracket = None;
    let mut prev_x = lo;
    let mut prev_f = axis.value_at(lo)? - target;
    for i in 1..=n_scan {
        let x = lo + step * i as f64;
        let f = axis.value_at(x)? - target;
        if prev_f <= 0.0 && f > 0.0 {
            bracket = Some((prev_x, x));
        }
        prev_x = x;
        prev_f = f;
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoBracket {
        axis: axis.name().into(),
        lo,
        hi,
    })?;

    while (b - a) > 1e-3 * b.abs().max(1e-6) {
        let mid = 0.5 * (a + b);
        if axis.value_at(mid)? - target <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// The same interference integral evaluated blind: composite Gauss-Legendre
/// panels in both t and tau, with the t panels starting exactly at the
/// wavepacket kink max(0, delta_tau) and panel widths tied to the fastest
/// oscillation. Exists to certify the closed form; accurate to ~1e-10.
pub fn brute_force_g2hom(params: &IdealParams) -> Result<f64> {
    params.validate()?;
    let &IdealParams {
        gamma1,
        gamma2,
        delta_omega,
        delta_tau,
        gamma_deph_total: _,
    } = params;
    let coh = params.coherence_sum();

    // 16-point Gauss-Legendre nodes on [0, 1]
    let rule = crate::quadrature::gauss_legendre(16);
    let unit: Vec<(f64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();

    // t axis: both wavepackets alive only past the later emission
    let t_start = delta_tau.max(0.0);
    let t_span = 40.0 / (gamma1 + gamma2);
    let n_t_panels = 24;
    let t_h = t_span / n_t_panels as f64;

    // tau axis: decay at the coherence sum, oscillation at the detuning
    let tau_span = 40.0 / coh;
    let n_tau_panels = ((tau_span * (coh + delta_omega.abs()) / 2.0).ceil() as usize).max(24);
    let tau_h = tau_span / n_tau_panels as f64;

    // cache the 1-D node positions and weights of the composite rules
    let mut t_nodes = Vec::with_capacity(n_t_panels * unit.len());
    for p in 0..n_t_panels {
        let left = t_start + p as f64 * t_h;
        for &(x, w) in &unit {
            t_nodes.push((left + x * t_h, w * t_h));
        }
    }
    let mut tau_nodes = Vec::with_capacity(n_tau_panels * unit.len());
    for p in 0..n_tau_panels {
        let left = p as f64 * tau_h;
        for &(x, w) in &unit {
            tau_nodes.push((left + x * tau_h, w * tau_h));
        }
    }

    // literal double sum over the 2-D integrand
    // Re{ G1_1(t,tau)* G1_2(t - dt, tau) e^{-i dw tau} }
    let mut integral = 0.0;
    for &(tau, w_tau) in &tau_nodes {
        let tau_factor = (-coh * tau).exp() * (delta_omega * tau).cos() * w_tau;
        let mut t_sum = 0.0;
        for &(t, w_t) in &t_nodes {
            let packet1 = gamma1 * (-gamma1 * t).exp();
            let packet2 = gamma2 * (-gamma2 * (t - delta_tau)).exp();
            t_sum += w_t * packet1 * packet2;
        }
        integral += tau_factor * t_sum;
    }

    // full-axis interference term over the intensity term (= 2)
    let v = 2.0 * 2.0 * integral / 2.0;
    Ok(0.5 * (1.0 - v))
}
