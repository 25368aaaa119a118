//! Two-photon interference at a balanced beamsplitter.
//!
//! The coincidence field of two independent emitters decomposes into four
//! autocorrelation/intensity terms and one interference term,
//!
//!   G2_HOM(t, tau) = 1/4 [ G2_11 + G2_22 + N1(t) N2(t+tau) + N2(t) N1(t+tau)
//!                   - 2 cos^2(phi) Re{ G1_11(t,tau)* G1_22(t-dtau,tau)
//!                                      e^{-i (dw0 + D2 - D1) tau} } ],
//!
//! where dw0 is the spectral detuning between the bare transitions, D_i the
//! laser detunings (the sets live in frames rotating at their own laser),
//! phi the polarization angle and dtau the arrival-time delay. A delay
//! shifts only the interference product; the other four terms are
//! delay-invariant once integrated, so they are always evaluated without
//! it. Negative delays follow from the tau >= 0 data because every
//! t-integrated term is even in tau, making all full-axis integrals twice
//! their tau >= 0 half.
//!
//! All reductions exploit the stored-prefix structure of the correlator
//! sets: past the prefix each term continues as a single exponential, so
//! scalar integrals get exact analytic tails instead of truncation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlators::{self, CorrelatorSet, Grid2};
use crate::error::{Error, Result};
use crate::quadrature::{oscillatory_integral, trapezoid_weights};

/// Which denominator turns the pulse-wise coincidence integral into a
/// degree of coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Raw coincidence integral, no denominator.
    None,
    /// Cross-polarized coincidences N_p (the default used throughout).
    #[default]
    Polarization,
    /// N1 = 1/4 (<n1> + <n2>)^2 from the summed mean photon numbers.
    IntensityProduct,
    /// N2 = 1/2 (<n1>^2 + <n2>^2) from the individual mean photon numbers.
    MeanIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomConfig {
    /// Spectral detuning of the bare transitions, omega_02 - omega_01.
    pub delta_omega0: f64,
    /// Arrival-time delay; positive means the emitter-2 photon is late.
    pub delta_tau: f64,
    /// Relative linear polarization angle, folded into [0, pi/2] via cos^2.
    pub phi: f64,
    pub normalization: Normalization,
}

impl Default for HomConfig {
    fn default() -> Self {
        HomConfig {
            delta_omega0: 0.0,
            delta_tau: 0.0,
            phi: 0.0,
            normalization: Normalization::Polarization,
        }
    }
}

impl HomConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.delta_omega0.is_finite() || !self.delta_tau.is_finite() || !self.phi.is_finite() {
            return Err(Error::Config(format!(
                "non-finite interference parameters: {self:?}"
            )));
        }
        Ok(())
    }

    /// Interference weight cos^2(phi), snapped to 0 at exact cross
    /// polarization so the phi = pi/2 normalization identity is bit-exact.
    pub fn polarization_weight(&self) -> f64 {
        let c = self.phi.cos();
        let w = c * c;
        if w < 1e-30 {
            0.0
        } else {
            w
        }
    }
}

/// Signed parts of the pulse-wise integral: g2hom_pulsewise =
/// (autocorrelation + intensity - interference) / 4. Values are raw
/// (unclamped) full-axis integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub autocorrelation: f64,
    pub intensity: f64,
    pub interference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomResult {
    /// Emission-time nodes (rows of `g2hom_t_tau`).
    pub time_nodes: Vec<f64>,
    /// Delay nodes tau >= 0 (`g2hom_tau` lives on all of them).
    pub tau_nodes: Vec<f64>,
    /// Stored columns of `g2hom_t_tau` (the delay prefix).
    pub prefix_len: usize,
    /// Coincidence density over (t, tau), 1/time^2; delay prefix only.
    pub g2hom_t_tau: Grid2<f64>,
    /// Time-integrated coincidence density over tau, 1/time.
    pub g2hom_tau: Vec<f64>,
    /// Full two-sided integral of the coincidence density.
    pub g2hom_pulsewise: f64,
    pub n_p: f64,
    pub n_1: f64,
    pub n_2: f64,
    /// g2hom_pulsewise divided by the configured normalization.
    pub g2hom_normalized: f64,
    pub breakdown: Breakdown,
}

/// Everything the assembly needs from one pair of sets: per-delay-node
/// t-integrals on the prefix plus their exact exponential continuations.
struct Reductions {
    /// int dt G2_ii(t, tau_j) for each emitter, prefix nodes.
    auto1: Vec<f64>,
    auto2: Vec<f64>,
    /// int dt N1(t) N2(t + tau_j) and the mirrored order.
    cross12: Vec<f64>,
    cross21: Vec<f64>,
    /// int dt conj(G1_11(t, tau_j)) G1_22(t - dtau, tau_j), frame phases
    /// still attached.
    interf: Vec<C64>,
    /// Full-axis integrals (2x the tau >= 0 half, exact tails included).
    auto_total: f64,
    cross_total: f64,
    /// gamma_1, gamma_2, coherence-rate sum and frame-detuning difference
    /// for the tail continuations.
    gamma1: f64,
    gamma2: f64,
    coh_sum: f64,
    frame_diff: f64,
}

impl Reductions {
    /// Interference tail decay/rotation factor over `dt` past the prefix.
    fn interf_tail(&self, dt: f64) -> C64 {
        (C64::new(-self.coh_sum, self.frame_diff) * dt).exp()
    }
}

fn check_compatible(c1: &CorrelatorSet, c2: &CorrelatorSet) -> Result<()> {
    if !c1.shares_grids(c2) {
        return Err(Error::GridMismatch(
            "correlator sets were computed on different grids".into(),
        ));
    }
    Ok(())
}

/// Largest arrival delay either direction the stored grids can absorb.
fn max_delay(c1: &CorrelatorSet, c2: &CorrelatorSet) -> f64 {
    let t0 = c1.time().first();
    let tau_end = c1.delay().nodes()[c1.prefix_len() - 1];
    let support_end = c1.pulse.support_end().max(c2.pulse.support_end());
    t0 + tau_end - support_end
}

/// Recompute the sets with the delay folded into a pulse shift: a positive
/// delay retards emitter 2's pulse; a negative one retards emitter 1's
/// (the equivalent substitution on the other integration variable).
fn delayed_pair(
    c1: &CorrelatorSet,
    c2: &CorrelatorSet,
    delta_tau: f64,
) -> Result<(Option<CorrelatorSet>, Option<CorrelatorSet>)> {
    if delta_tau == 0.0 {
        return Ok((None, None));
    }
    let max = max_delay(c1, c2);
    if delta_tau.abs() > max + 1e-12 {
        return Err(Error::DelayOutOfRange {
            delta_tau,
            max,
        });
    }
    let prefix_span = c1.delay().nodes()[c1.prefix_len() - 1];
    if delta_tau > 0.0 {
        let shifted = correlators::compute(
            &c2.emitter,
            &c2.pulse.shifted(delta_tau),
            c2.time(),
            c2.delay(),
            prefix_span,
            &c2.opts,
        )?;
        Ok((None, Some(shifted)))
    } else {
        let shifted = correlators::compute(
            &c1.emitter,
            &c1.pulse.shifted(-delta_tau),
            c1.time(),
            c1.delay(),
            prefix_span,
            &c1.opts,
        )?;
        Ok((Some(shifted), None))
    }
}

/// t-integrals of every term at each stored delay node, with exact
/// exponential tails for the full-axis scalars. `i1`/`i2` are the sets
/// entering the interference product (possibly delay-shifted); the other
/// four terms always use the unshifted `c1`/`c2`.
#[allow(clippy::needless_range_loop)] // k indexes six parallel structures
fn reduce(c1: &CorrelatorSet, c2: &CorrelatorSet, i1: &CorrelatorSet, i2: &CorrelatorSet) -> Reductions {
    let prefix = c1.prefix_len();
    let tw = c1.time().weights();
    let n = c1.time().len();

    let mut auto1 = vec![0.0; prefix];
    let mut auto2 = vec![0.0; prefix];
    let mut cross12 = vec![0.0; prefix];
    let mut cross21 = vec![0.0; prefix];
    let mut interf = vec![C64::new(0.0, 0.0); prefix];

    for k in 0..n {
        let w = tw[k];
        let g2r1 = c1.g2.row(k);
        let g2r2 = c2.g2.row(k);
        let nd1 = c1.n_delayed.row(k);
        let nd2 = c2.n_delayed.row(k);
        let n1 = c1.n_of_t[k];
        let n2 = c2.n_of_t[k];
        let g1r1 = i1.g1.row(k);
        let g1r2 = i2.g1.row(k);
        for j in 0..prefix {
            auto1[j] += w * g2r1[j];
            auto2[j] += w * g2r2[j];
            cross12[j] += w * n1 * nd2[j];
            cross21[j] += w * n2 * nd1[j];
            interf[j] += w * g1r1[j].conj() * g1r2[j];
        }
    }

    let tau_nodes = &c1.delay().nodes()[..prefix];
    let tau_w = trapezoid_weights(tau_nodes);
    let g1 = c1.emitter.gamma;
    let g2 = c2.emitter.gamma;

    // prefix integrals by trapezoid, then the exact exponential tails
    let half = |v: &[f64]| -> f64 { v.iter().zip(&tau_w).map(|(x, w)| x * w).sum() };
    let auto_half = half(&auto1) + half(&auto2) + auto1[prefix - 1] / g1 + auto2[prefix - 1] / g2;
    let cross_half =
        half(&cross12) + half(&cross21) + cross12[prefix - 1] / g2 + cross21[prefix - 1] / g1;

    Reductions {
        auto1,
        auto2,
        cross12,
        cross21,
        interf,
        auto_total: 2.0 * auto_half,
        cross_total: 2.0 * cross_half,
        gamma1: g1,
        gamma2: g2,
        coh_sum: i1.emitter.coherence_rate() + i2.emitter.coherence_rate(),
        frame_diff: i2.frame_detuning - i1.frame_detuning,
    }
}

/// Full-axis interference integral 2 Re int_{tau>=0} Q(tau) e^{-i W tau},
/// where W = dw0 + D2 - D1 completes the rotating-frame phases. Filon
/// quadrature over the prefix keeps arbitrarily fast phases exact; the
/// tail is analytic because Q itself is a single complex exponential
/// there.
fn interference_total(red: &Reductions, tau_nodes: &[f64], omega: f64) -> f64 {
    let prefix = red.interf.len();
    let head = oscillatory_integral(&tau_nodes[..prefix], &red.interf, omega);
    let tau_p = tau_nodes[prefix - 1];
    let q_p = red.interf[prefix - 1];
    // int_{tau_p}^inf q_p e^{(i fd - coh)(tau - tau_p)} e^{-i W tau} dtau
    let denom = C64::new(red.coh_sum, omega - red.frame_diff);
    let tail = q_p * C64::from_polar(1.0, -omega * tau_p) / denom;
    2.0 * (head + tail).re
}

/// Two-stage assembly: the delay-node reductions are computed once, after
/// which the interference integral can be re-evaluated for any spectral
/// detuning at the cost of a 1-D quadrature. This is what makes averaging
/// over wandering detunings cheap: only the phased term moves.
pub(crate) struct Assembly<'a> {
    c1: &'a CorrelatorSet,
    c2: &'a CorrelatorSet,
    shift1: Option<CorrelatorSet>,
    shift2: Option<CorrelatorSet>,
    red: Reductions,
    pol: f64,
    normalization: Normalization,
}

impl<'a> Assembly<'a> {
    pub(crate) fn prepare(
        c1: &'a CorrelatorSet,
        c2: &'a CorrelatorSet,
        cfg: &HomConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_compatible(c1, c2)?;
        let (shift1, shift2) = delayed_pair(c1, c2, cfg.delta_tau)?;
        let red = reduce(
            c1,
            c2,
            shift1.as_ref().unwrap_or(c1),
            shift2.as_ref().unwrap_or(c2),
        );
        Ok(Assembly {
            c1,
            c2,
            shift1,
            shift2,
            red,
            pol: cfg.polarization_weight(),
            normalization: cfg.normalization,
        })
    }

    /// Difference of the rotating-frame (laser) detunings; added to the
    /// spectral detuning to complete the interference phase.
    pub(crate) fn frame_diff(&self) -> f64 {
        self.red.frame_diff
    }

    pub(crate) fn polarization_weight(&self) -> f64 {
        self.pol
    }

    /// Full-axis interference integral at total phase frequency `omega`,
    /// without the polarization factor.
    pub(crate) fn interference_total(&self, omega: f64) -> f64 {
        interference_total(&self.red, self.c1.delay().nodes(), omega)
    }

    /// Interference integral averaged over a Gaussian detuning of width
    /// `sigma` around total center frequency `omega_bar`, evaluated through
    /// the exact characteristic factor e^{-sigma^2 tau^2/2} instead of a
    /// node sum (the integration order swap is exact). Past the prefix Q is
    /// a bare exponential but the Gaussian factor still bites, and with the
    /// prefix ending just after the pulse most of the mass sits there; that
    /// product goes onto its own grid, dense against both decay scales,
    /// with the coherence phase folded into the oscillatory kernel.
    pub(crate) fn interference_averaged_exact(&self, omega_bar: f64, sigma: f64) -> f64 {
        let red = &self.red;
        let prefix = red.interf.len();
        let tau_nodes = self.c1.delay().nodes();
        let a = 0.5 * sigma * sigma;
        let damped: Vec<C64> = red
            .interf
            .iter()
            .zip(tau_nodes)
            .map(|(q, &tau)| q * (-a * tau * tau).exp())
            .collect();
        let head = oscillatory_integral(&tau_nodes[..prefix], &damped, omega_bar);

        let tau_p = tau_nodes[prefix - 1];
        let q_p = red.interf[prefix - 1];
        let coh = red.coh_sum;
        let fd = red.frame_diff;
        // cut off once the envelope has fallen by e^-40 from tau_p
        let budget = 40.0;
        let tau_end = if a > 0.0 {
            let c0 = a * tau_p * tau_p + coh * tau_p + budget;
            (-coh + (coh * coh + 4.0 * a * c0).sqrt()) / (2.0 * a)
        } else {
            tau_p + budget / coh
        };
        let scale = (1.0 / coh).min(1.0 / sigma);
        let count = (((tau_end - tau_p) / (scale / 50.0)).ceil() as usize).clamp(2, 200_000);
        let step = (tau_end - tau_p) / (count - 1) as f64;
        let phase_const = q_p * C64::from_polar(1.0, -fd * tau_p);
        let mut xs = Vec::with_capacity(count);
        let mut vals = Vec::with_capacity(count);
        for k in 0..count {
            let tau = tau_p + k as f64 * step;
            xs.push(tau);
            vals.push(phase_const * (-coh * (tau - tau_p) - a * tau * tau).exp());
        }
        let tail = oscillatory_integral(&xs, &vals, omega_bar - fd);
        2.0 * (head + tail).re
    }

    /// Normalized pulse-wise scalar for a given interference value, without
    /// building curves. Used to watch quadrature refinement converge.
    pub(crate) fn scalar_normalized(&self, interference: f64) -> Result<f64> {
        let positive_part = self.red.auto_total + self.red.cross_total;
        let pulsewise = 0.25 * (positive_part - interference);
        let denominator = match self.normalization {
            Normalization::None => 1.0,
            Normalization::Polarization => 0.5 * positive_part,
            Normalization::IntensityProduct => {
                let m = self.c1.mean_photon_number() + self.c2.mean_photon_number();
                0.25 * m * m
            }
            Normalization::MeanIntensity => {
                let m1 = self.c1.mean_photon_number();
                let m2 = self.c2.mean_photon_number();
                0.5 * (m1 * m1 + m2 * m2)
            }
        };
        if self.normalization != Normalization::None && denominator < 1e-12 {
            return Err(Error::ZeroNormalization);
        }
        Ok(pulsewise / denominator)
    }

    fn iset1(&self) -> &CorrelatorSet {
        self.shift1.as_ref().unwrap_or(self.c1)
    }

    fn iset2(&self) -> &CorrelatorSet {
        self.shift2.as_ref().unwrap_or(self.c2)
    }

    /// Build the result from a fully evaluated interference scalar and the
    /// per-delay interference factor `chi` (the expectation value of
    /// e^{-i Omega tau}; a unit phasor in the static case, Gaussian-damped
    /// under averaged detunings).
    pub(crate) fn finish(&self, interference: f64, chi: &dyn Fn(f64) -> C64) -> Result<HomResult> {
        let red = &self.red;
        let pol = self.pol;
        let prefix = self.c1.prefix_len();
        let tau_nodes = self.c1.delay().nodes();

        let positive_part = red.auto_total + red.cross_total;
        let pulsewise = 0.25 * (positive_part - interference);
        let n_p = 0.5 * positive_part;

        let mean1 = self.c1.mean_photon_number();
        let mean2 = self.c2.mean_photon_number();
        let n_1 = 0.25 * (mean1 + mean2) * (mean1 + mean2);
        let n_2 = 0.5 * (mean1 * mean1 + mean2 * mean2);

        let denominator = match self.normalization {
            Normalization::None => 1.0,
            Normalization::Polarization => n_p,
            Normalization::IntensityProduct => n_1,
            Normalization::MeanIntensity => n_2,
        };
        if self.normalization != Normalization::None && denominator < 1e-12 {
            return Err(Error::ZeroNormalization);
        }
        let normalized = pulsewise / denominator;

        // time-integrated curve: direct on the prefix, exponential
        // continuations past it; quadrature noise below zero is clamped
        // for reporting
        let tau_p = tau_nodes[prefix - 1];
        let mut g2hom_tau = Vec::with_capacity(tau_nodes.len());
        for (j, &tau) in tau_nodes.iter().enumerate() {
            let value = if j < prefix {
                0.25 * (red.auto1[j]
                    + red.auto2[j]
                    + red.cross12[j]
                    + red.cross21[j]
                    - 2.0 * pol * (red.interf[j] * chi(tau)).re)
            } else {
                let dt = tau - tau_p;
                let interf_here = red.interf[prefix - 1] * red.interf_tail(dt);
                0.25 * ((red.auto1[prefix - 1] + red.cross21[prefix - 1])
                    * (-red.gamma1 * dt).exp()
                    + (red.auto2[prefix - 1] + red.cross12[prefix - 1])
                        * (-red.gamma2 * dt).exp()
                    - 2.0 * pol * (interf_here * chi(tau)).re)
            };
            g2hom_tau.push(value.max(0.0));
        }

        // density over (t, tau) on the stored prefix, same hybrid convention
        let n_t = self.c1.time().len();
        let (i1, i2) = (self.iset1(), self.iset2());
        let mut field = Grid2::filled(n_t, prefix, 0.0);
        {
            let taus = &tau_nodes[..prefix];
            let chi_row: Vec<C64> = taus.iter().map(|&tau| chi(tau)).collect();
            for k in 0..n_t {
                let g2r1 = self.c1.g2.row(k);
                let g2r2 = self.c2.g2.row(k);
                let nd1 = self.c1.n_delayed.row(k);
                let nd2 = self.c2.n_delayed.row(k);
                let g1r1 = i1.g1.row(k);
                let g1r2 = i2.g1.row(k);
                let n1k = self.c1.n_of_t[k];
                let n2k = self.c2.n_of_t[k];
                let row = field.row_mut(k);
                for j in 0..prefix {
                    let v = 0.25
                        * (g2r1[j] + g2r2[j] + n1k * nd2[j] + n2k * nd1[j]
                            - 2.0 * pol * (g1r1[j].conj() * g1r2[j] * chi_row[j]).re);
                    row[j] = v.max(0.0);
                }
            }
        }

        Ok(HomResult {
            time_nodes: self.c1.time().nodes().to_vec(),
            tau_nodes: tau_nodes.to_vec(),
            prefix_len: prefix,
            g2hom_t_tau: field,
            g2hom_tau,
            g2hom_pulsewise: pulsewise,
            n_p,
            n_1,
            n_2,
            g2hom_normalized: normalized,
            breakdown: Breakdown {
                autocorrelation: red.auto_total,
                intensity: red.cross_total,
                interference,
            },
        })
    }
}

/// Assemble the interference observables of two emitters.
///
/// The sets must share grids. A nonzero arrival delay triggers one extra
/// correlator computation with the corresponding pulse retarded; all other
/// terms are provably delay-invariant and reuse the inputs as-is.
pub fn assemble(c1: &CorrelatorSet, c2: &CorrelatorSet, cfg: &HomConfig) -> Result<HomResult> {
    let asm = Assembly::prepare(c1, c2, cfg)?;
    let omega = cfg.delta_omega0 + asm.frame_diff();
    let interference = if asm.pol == 0.0 {
        0.0
    } else {
        2.0 * asm.pol * asm.interference_total(omega)
    };
    asm.finish(interference, &|tau| C64::from_polar(1.0, -omega * tau))
}

/// The time-integrated coincidence curve of an assembled result.
pub fn time_resolved(result: &HomResult) -> &[f64] {
    &result.g2hom_tau
}

/// Coincidence counts in consecutive delay bins centered on zero,
/// mirroring the tau >= 0 curve onto the negative axis. Returns the bin
/// centers and the per-bin integrals; their sum reproduces the full-axis
/// integral of the curve.
pub fn bin_histogram(result: &HomResult, bin_width: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(bin_width > 0.0) {
        return Err(Error::Config(format!("bin width must be > 0, got {bin_width}")));
    }
    let taus = &result.tau_nodes;
    let curve = &result.g2hom_tau;
    let tau_max = *taus.last().unwrap();
    let n_bins_half = (tau_max / bin_width - 0.5).ceil().max(0.0) as usize;

    // per-bin integrals of the tau >= 0 half, splitting grid intervals at
    // bin boundaries exactly (linear interpolation inside an interval)
    let mut half_pos = vec![0.0; n_bins_half + 1];
    let edge = |m: usize| (m as f64 + 0.5) * bin_width;
    for (seg, win) in taus.windows(2).enumerate() {
        let (x0, x1) = (win[0], win[1]);
        let (y0, y1) = (curve[seg], curve[seg + 1]);
        let slope = (y1 - y0) / (x1 - x0);
        // walk the bins this interval touches
        let mut lo = x0;
        let mut m = ((x0 / bin_width) + 0.5).floor().max(0.0) as usize;
        while lo < x1 {
            let hi = edge(m).min(x1);
            let ylo = y0 + slope * (lo - x0);
            let yhi = y0 + slope * (hi - x0);
            half_pos[m.min(n_bins_half)] += 0.5 * (ylo + yhi) * (hi - lo);
            lo = hi;
            m += 1;
        }
    }

    // mirror: bin -m equals bin +m; the central bin collects both halves of
    // [-w/2, w/2]
    let mut centers = Vec::with_capacity(2 * n_bins_half + 1);
    let mut counts = Vec::with_capacity(2 * n_bins_half + 1);
    for m in (1..=n_bins_half).rev() {
        centers.push(-(m as f64) * bin_width);
        counts.push(half_pos[m]);
    }
    centers.push(0.0);
    counts.push(2.0 * half_pos[0]);
    #[allow(clippy::needless_range_loop)] // m drives both the bin center and the lookup
    for m in 1..=n_bins_half {
        centers.push(m as f64 * bin_width);
        counts.push(half_pos[m]);
    }
    Ok((centers, counts))
}

/// The three normalization scalars without a full assembly.
pub fn normalization_terms(c1: &CorrelatorSet, c2: &CorrelatorSet) -> Result<(f64, f64, f64)> {
    check_compatible(c1, c2)?;
    let red = reduce(c1, c2, c1, c2);
    let n_p = 0.5 * (red.auto_total + red.cross_total);
    if n_p < 1e-12 {
        return Err(Error::ZeroNormalization);
    }
    let mean1 = c1.mean_photon_number();
    let mean2 = c2.mean_photon_number();
    let n_1 = 0.25 * (mean1 + mean2) * (mean1 + mean2);
    let n_2 = 0.5 * (mean1 * mean1 + mean2 * mean2);
    Ok((n_p, n_1, n_2))
}
