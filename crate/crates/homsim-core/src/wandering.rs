//! Averaging interference observables over slow spectral wandering.
//!
//! Each emitter's transition frequency is drawn once per emission event
//! from a Gaussian (noise slow against the lifetime, uncorrelated between
//! emitters). Only the detuning difference enters the observables, so the
//! two distributions collapse into one Gaussian whose variance is the sum
//! of the individual variances. Within one assembly the detuning appears
//! in a single place, the interference phase, which keeps the average
//! cheap: the correlators are computed once and only the phased integral
//! is re-evaluated per quadrature node.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlators::CorrelatorSet;
use crate::error::{Error, Result};
use crate::hom::{assemble, Assembly, HomConfig, HomResult};
use crate::quadrature::gauss_hermite;
use crate::tls::SQRT_8LN2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WanderingModel {
    /// Center of the wandering spectral detuning. During averaging this
    /// supersedes the static `delta_omega0` of the interference config.
    pub center_detuning: f64,
    /// Standard deviation of each emitter's frequency excursions.
    pub sigma1: f64,
    pub sigma2: f64,
    /// Quadrature nodes for the average; odd so the center is sampled.
    pub node_count: usize,
}

impl Default for WanderingModel {
    fn default() -> Self {
        WanderingModel {
            center_detuning: 0.0,
            sigma1: 0.0,
            sigma2: 0.0,
            node_count: 41,
        }
    }
}

impl WanderingModel {
    /// Build from linewidth FWHM values, FWHM = sqrt(8 ln 2) sigma.
    pub fn from_fwhm(center_detuning: f64, fwhm1: f64, fwhm2: f64) -> Self {
        WanderingModel {
            center_detuning,
            sigma1: fwhm1 / SQRT_8LN2,
            sigma2: fwhm2 / SQRT_8LN2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center_detuning.is_finite()
            || !(self.sigma1 >= 0.0 && self.sigma1.is_finite())
            || !(self.sigma2 >= 0.0 && self.sigma2.is_finite())
        {
            return Err(Error::Config(format!("bad wandering model: {self:?}")));
        }
        if self.node_count < 3 || self.node_count.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "node count must be odd and >= 3, got {}",
                self.node_count
            )));
        }
        Ok(())
    }

    /// Standard deviation of the detuning difference (variance addition).
    pub fn sigma_total(&self) -> f64 {
        self.sigma1.hypot(self.sigma2)
    }

    pub fn fwhm_total(&self) -> f64 {
        SQRT_8LN2 * self.sigma_total()
    }
}

/// Gaussian distribution of the spectral detuning between the two lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningPdf {
    pub mean: f64,
    pub sigma: f64,
}

impl DetuningPdf {
    pub fn density(&self, delta_omega: f64) -> f64 {
        let z = (delta_omega - self.mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    pub fn fwhm(&self) -> f64 {
        SQRT_8LN2 * self.sigma
    }
}

/// The distribution both wandering lines induce on their detuning: mean at
/// the center detuning, variance sigma1^2 + sigma2^2.
pub fn detuning_pdf(model: &WanderingModel) -> Result<DetuningPdf> {
    model.validate()?;
    let sigma = model.sigma_total();
    if sigma == 0.0 {
        return Err(Error::DegenerateDistribution(
            "both wandering widths are zero; the detuning is deterministic".into(),
        ));
    }
    Ok(DetuningPdf {
        mean: model.center_detuning,
        sigma,
    })
}

/// Node count past which refinement gives up; eigendecompositions for the
/// quadrature rules grow cubically beyond this.
const MAX_NODES: usize = 1400;

/// One Gauss-Hermite node sum of the interference integral at `n` nodes.
fn node_sum(asm: &Assembly, omega_bar: f64, sigma: f64, n: usize) -> f64 {
    let rule = gauss_hermite(n);
    let weight_sum: f64 = rule.weights.iter().sum();
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let omega = omega_bar + std::f64::consts::SQRT_2 * sigma * x;
            w * asm.interference_total(omega)
        })
        .sum::<f64>()
        / weight_sum
}

/// Interference observables averaged over the wandering detuning.
///
/// The pulse-wise scalar is the Gauss-Hermite weighted mean of the static
/// result over detuning nodes; by linearity only the interference integral
/// is re-evaluated per node. The node count refines (n -> 2n+1) until the
/// averaged scalar settles below 1e-7; should the integrand be wider than
/// refinement can track (widths far beyond the emission linewidth), the
/// scalar falls back to the exact characteristic-function integral, which
/// is also what the tau-resolved outputs always use: the factor
/// E[e^{-i dw tau}] = e^{-i dw0 tau} e^{-sigma^2 tau^2 / 2}, immune to the
/// node aliasing a finite sum suffers at large sigma tau. With both widths
/// zero this degenerates to the static assembly at the center detuning.
pub fn averaged_g2(
    c1: &CorrelatorSet,
    c2: &CorrelatorSet,
    cfg: &HomConfig,
    model: &WanderingModel,
) -> Result<HomResult> {
    model.validate()?;
    let centered = HomConfig {
        delta_omega0: model.center_detuning,
        ..*cfg
    };
    let sigma = model.sigma_total();
    if sigma == 0.0 {
        return assemble(c1, c2, &centered);
    }

    let asm = Assembly::prepare(c1, c2, &centered)?;
    let pol = asm.polarization_weight();
    let omega_bar = model.center_detuning + asm.frame_diff();

    let interference = if pol == 0.0 {
        0.0
    } else {
        let mut n = model.node_count;
        let mut mean = node_sum(&asm, omega_bar, sigma, n);
        let mut scalar = asm.scalar_normalized(2.0 * pol * mean)?;
        loop {
            let next = 2 * n + 1;
            if next > MAX_NODES {
                // refinement exhausted: trust the exact route instead
                mean = asm.interference_averaged_exact(omega_bar, sigma);
                break;
            }
            let refined = node_sum(&asm, omega_bar, sigma, next);
            let refined_scalar = asm.scalar_normalized(2.0 * pol * refined)?;
            let settled = (refined_scalar - scalar).abs() < 1e-7;
            n = next;
            mean = refined;
            scalar = refined_scalar;
            if settled {
                break;
            }
        }
        2.0 * pol * mean
    };

    let damp = 0.5 * sigma * sigma;
    asm.finish(interference, &|tau| {
        C64::from_polar((-damp * tau * tau).exp(), -omega_bar * tau)
    })
}

/// Detuning-averaged coincidence curve over tau, for watching the beats of
/// a strongly detuned pair wash out as the wandering width grows.
///
/// The beats oscillate at the center detuning, so the stored delay grid
/// must sample at least ten points per beat period.
pub fn beat_washing_curve(
    c1: &CorrelatorSet,
    c2: &CorrelatorSet,
    cfg: &HomConfig,
    model: &WanderingModel,
) -> Result<Vec<f64>> {
    model.validate()?;
    if model.center_detuning != 0.0 {
        let period = std::f64::consts::TAU / model.center_detuning.abs();
        let step = c1
            .delay()
            .nodes()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        if step > period / 10.0 {
            return Err(Error::BeatsUnresolved { period, step });
        }
    }
    Ok(averaged_g2(c1, c2, cfg, model)?.g2hom_tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::{self, CorrelatorSet};
    use crate::grid::{delay_grid, emission_grid, GridSettings};
    use crate::ode::OdeOptions;
    use crate::tls::{EmitterSpec, PulseSpec};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn identical_pair(fwhm: f64, max_freq: f64) -> (CorrelatorSet, CorrelatorSet) {
        let e = EmitterSpec::new("e", 1.0);
        let pulse = PulseSpec::pi_pulse(fwhm);
        let s = GridSettings::default();
        let time = Arc::new(emission_grid(&[pulse], 1.0, 1.0, max_freq, &s).unwrap());
        let span = pulse.support_end() - time.first();
        let delay = Arc::new(delay_grid(span, pulse.sigma(), 1.0, 1.0, max_freq, &s).unwrap());
        let c1 =
            correlators::compute(&e, &pulse, &time, &delay, span, &OdeOptions::default()).unwrap();
        let c2 = c1.clone();
        (c1, c2)
    }

    #[test]
    fn pdf_adds_variances_and_normalizes() {
        let model = WanderingModel {
            center_detuning: 1.5,
            sigma1: 0.6,
            sigma2: 0.8,
            ..Default::default()
        };
        let pdf = detuning_pdf(&model).unwrap();
        assert_abs_diff_eq!(pdf.sigma, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pdf.mean, 1.5, epsilon = 1e-15);

        // equal widths: variance doubles, FWHM grows by sqrt(2)
        let eq = WanderingModel {
            sigma1: 0.7,
            sigma2: 0.7,
            ..Default::default()
        };
        let pdf_eq = detuning_pdf(&eq).unwrap();
        assert_abs_diff_eq!(pdf_eq.sigma, 0.7 * 2f64.sqrt(), epsilon = 1e-15);

        // one silent emitter: the pair pdf is the loud one's own line
        let single = WanderingModel {
            center_detuning: 2.0,
            sigma1: 0.9,
            sigma2: 0.0,
            ..Default::default()
        };
        let pdf_s = detuning_pdf(&single).unwrap();
        assert_abs_diff_eq!(pdf_s.sigma, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(pdf_s.fwhm(), 0.9 * SQRT_8LN2, epsilon = 1e-14);

        // unit mass: uniform trapezoid over +-12 sigma converges far past
        // the tolerance for a smooth Gaussian
        let n = 4000;
        let lo = pdf.mean - 12.0 * pdf.sigma;
        let h = 24.0 * pdf.sigma / n as f64;
        let mass: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * h * pdf.density(lo + i as f64 * h)
            })
            .sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_model_has_no_pdf_but_still_averages() {
        let model = WanderingModel::default();
        assert!(matches!(
            detuning_pdf(&model),
            Err(Error::DegenerateDistribution(_))
        ));

        let (c1, c2) = identical_pair(0.026, 0.0);
        let model = WanderingModel {
            center_detuning: 0.7,
            ..Default::default()
        };
        let avg = averaged_g2(&c1, &c2, &HomConfig::default(), &model).unwrap();
        let plain = assemble(
            &c1,
            &c2,
            &HomConfig {
                delta_omega0: 0.7,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(avg.g2hom_pulsewise, plain.g2hom_pulsewise);
        assert_eq!(avg.g2hom_tau, plain.g2hom_tau);
    }

    #[test]
    fn invalid_node_counts_are_rejected() {
        for bad in [0usize, 1, 2, 40] {
            let model = WanderingModel {
                sigma1: 0.3,
                node_count: bad,
                ..Default::default()
            };
            assert!(averaged_g2_err(&model));
        }

        fn averaged_g2_err(model: &WanderingModel) -> bool {
            model.validate().is_err()
        }
    }

    #[test]
    fn scalar_is_weighted_mean_of_node_values() {
        let (c1, c2) = identical_pair(0.026, 0.0);
        // widths narrow enough that the first refinement step already
        // settles, making the final node count deterministic (2n+1)
        let model = WanderingModel {
            center_detuning: 0.5,
            sigma1: 0.03,
            sigma2: 0.04,
            node_count: 5,
        };
        let cfg = HomConfig::default();
        let avg = averaged_g2(&c1, &c2, &cfg, &model).unwrap();

        // same nodes by hand through the static assembly
        let rule = gauss_hermite(11);
        let wsum: f64 = rule.weights.iter().sum();
        let sigma = model.sigma_total();
        let mut mean = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let node_cfg = HomConfig {
                delta_omega0: model.center_detuning + std::f64::consts::SQRT_2 * sigma * x,
                ..cfg
            };
            mean += w / wsum * assemble(&c1, &c2, &node_cfg).unwrap().g2hom_normalized;
        }
        assert_abs_diff_eq!(avg.g2hom_normalized, mean, epsilon = 1e-12);
    }

    #[test]
    fn node_count_is_converged_at_default() {
        let (c1, c2) = identical_pair(0.026, 0.0);
        let cfg = HomConfig::default();
        // widest case quoted for the default node count
        let model41 = WanderingModel::from_fwhm(0.0, 10.0 / 2f64.sqrt(), 10.0 / 2f64.sqrt());
        let model81 = WanderingModel {
            node_count: 81,
            ..model41
        };
        let a = averaged_g2(&c1, &c2, &cfg, &model41).unwrap();
        let b = averaged_g2(&c1, &c2, &cfg, &model81).unwrap();
        assert!(
            (a.g2hom_normalized - b.g2hom_normalized).abs() < 1e-4,
            "41 nodes {}, 81 nodes {}",
            a.g2hom_normalized,
            b.g2hom_normalized
        );
    }

    #[test]
    fn wandering_degrades_resonant_pair() {
        let (c1, c2) = identical_pair(0.026, 0.0);
        let cfg = HomConfig::default();
        let narrow = averaged_g2(
            &c1,
            &c2,
            &cfg,
            &WanderingModel::from_fwhm(0.0, 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()),
        )
        .unwrap();
        let wide = averaged_g2(
            &c1,
            &c2,
            &cfg,
            &WanderingModel::from_fwhm(0.0, 5.0 / 2f64.sqrt(), 5.0 / 2f64.sqrt()),
        )
        .unwrap();
        assert!(
            (narrow.g2hom_normalized - 0.07).abs() < 0.015,
            "combined FWHM 1: {}",
            narrow.g2hom_normalized
        );
        assert!(
            (wide.g2hom_normalized - 0.30).abs() < 0.03,
            "combined FWHM 5: {}",
            wide.g2hom_normalized
        );
    }

    #[test]
    fn wandering_can_improve_a_detuned_pair() {
        let (c1, c2) = identical_pair(0.026, 0.0);
        let cfg = HomConfig::default();
        let center = 3.0;
        let still = averaged_g2(
            &c1,
            &c2,
            &cfg,
            &WanderingModel {
                center_detuning: center,
                ..Default::default()
            },
        )
        .unwrap()
        .g2hom_normalized;
        let best = (1..=6)
            .map(|i| {
                let f = i as f64;
                averaged_g2(
                    &c1,
                    &c2,
                    &cfg,
                    &WanderingModel::from_fwhm(center, f / 2f64.sqrt(), f / 2f64.sqrt()),
                )
                .unwrap()
                .g2hom_normalized
            })
            .fold(f64::MAX, f64::min);
        assert!(
            best < still - 1e-3,
            "no width beats the static value: best {best}, static {still}"
        );
    }

    #[test]
    fn exact_average_matches_brute_force_at_any_width() {
        // the characteristic-function route must agree with averaging the
        // per-detuning integral directly, including widths far beyond what
        // node refinement can track (the tail past the tabulated delay
        // prefix carries most of the mass and is easy to get wrong)
        let (c1, c2) = identical_pair(0.026, 0.0);
        let cfg = HomConfig::default();
        let asm = Assembly::prepare(&c1, &c2, &cfg).unwrap();
        for fwhm in [2.0, 5.0, 9.0, 12.0, 20.0] {
            let sigma = fwhm / SQRT_8LN2;
            let exact = asm.interference_averaged_exact(0.0, sigma);
            let n = 20001;
            let lo = -8.0 * sigma;
            let h = 16.0 * sigma / (n - 1) as f64;
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for i in 0..n {
                let w = (-0.5 * ((lo + i as f64 * h) / sigma).powi(2)).exp();
                acc += w * asm.interference_total(lo + i as f64 * h);
                wsum += w;
            }
            let brute = acc / wsum;
            assert!(
                (exact - brute).abs() < 2e-3 * brute.abs(),
                "fwhm {fwhm}: exact {exact} vs brute force {brute}"
            );
        }
    }

    #[test]
    fn scalar_rises_monotonically_through_the_fallback_switch() {
        // around fwhm 9 the refinement ladder gives up and the exact route
        // takes over; the averaged floor must not jump at the seam
        let (c1, c2) = identical_pair(0.026, 0.0);
        let cfg = HomConfig::default();
        let g2 = |fwhm: f64| {
            let per = fwhm / 2f64.sqrt();
            averaged_g2(&c1, &c2, &cfg, &WanderingModel::from_fwhm(0.0, per, per))
                .unwrap()
                .g2hom_normalized
        };
        let mut prev = g2(7.0);
        for fwhm in [8.0, 9.0, 10.0, 12.0, 16.0, 20.0] {
            let next = g2(fwhm);
            assert!(
                next > prev,
                "averaged floor fell from {prev} to {next} at fwhm {fwhm}"
            );
            prev = next;
        }
    }

    #[test]
    fn beats_appear_then_wash_out() {
        let (c1, c2) = identical_pair(0.026, 20.0);
        let cfg = HomConfig::default();
        let taus = c1.delay().nodes().to_vec();

        let still = beat_washing_curve(
            &c1,
            &c2,
            &cfg,
            &WanderingModel {
                center_detuning: 20.0,
                ..Default::default()
            },
        )
        .unwrap();
        // beat period from successive maxima of the undamped curve
        let peaks: Vec<f64> = (1..still.len() - 1)
            .filter(|&i| {
                still[i] > still[i - 1] && still[i] > still[i + 1] && taus[i] < 2.0
            })
            .map(|i| taus[i])
            .collect();
        assert!(peaks.len() >= 4, "found {} beat maxima", peaks.len());
        let period = (peaks[3] - peaks[0]) / 3.0;
        let expected = std::f64::consts::TAU / 20.0;
        assert!(
            (period - expected).abs() < 0.05 * expected,
            "beat period {period} vs {expected}"
        );

        // with wandering far wider than the detuning the beats disappear
        let washed = beat_washing_curve(
            &c1,
            &c2,
            &cfg,
            &WanderingModel::from_fwhm(20.0, 200.0 / 2f64.sqrt(), 200.0 / 2f64.sqrt()),
        )
        .unwrap();
        let first_period_end = taus.partition_point(|&t| t <= expected);
        let amp = |curve: &[f64]| {
            let mut max_dev: f64 = 0.0;
            for i in first_period_end..curve.len() - 1 {
                if curve[i] > curve[i - 1] && curve[i] > curve[i + 1] {
                    // local maximum height over the following minimum
                    let after_min = curve[i..]
                        .iter()
                        .cloned()
                        .fold(f64::MAX, f64::min);
                    max_dev = max_dev.max(curve[i] - after_min);
                }
            }
            max_dev
        };
        let still_amp = amp(&still);
        let washed_amp = amp(&washed);
        assert!(still_amp > 0.0);
        assert!(
            washed_amp < 0.05 * still_amp,
            "residual oscillation {washed_amp} vs undamped {still_amp}"
        );
    }

    #[test]
    fn unresolved_beats_are_rejected() {
        // grid built with no oscillation hint cannot hold a 20 gamma beat
        let (c1, c2) = identical_pair(0.026, 0.0);
        let err = beat_washing_curve(
            &c1,
            &c2,
            &HomConfig::default(),
            &WanderingModel {
                center_detuning: 20.0,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::BeatsUnresolved { .. })));
    }
}
