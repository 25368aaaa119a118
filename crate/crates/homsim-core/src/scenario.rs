//! One fully specified experiment: two emitters, their shared drive pulse,
//! the interference settings, and how much numerical effort to spend.
//!
//! `Scenario` is the unit everything downstream consumes: sweeps mutate
//! copies of it, the command line deserializes it from a config file, and
//! figures are bundles of them. Its job here is grid planning. Both
//! emitters must live on the same emission and delay grids for the
//! assembly to pair their correlators, so the plan derives one grid pair
//! from the union of the decay rates, detunings, and the arrival-time
//! delay. For a delayed pair the correlator rows cross a pulse in two
//! separate delay windows; sampling finely only inside those windows keeps
//! the stored rows small no matter how large the delay is.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::correlators::{self, CorrelatorSet};
use crate::grid::{self, GridMeta, GridSettings, TimeGrid};
use crate::hom::{self, HomConfig, HomResult};
use crate::ode::OdeOptions;
use crate::tls::{EmitterSpec, PulseSpec};
use crate::wandering::{self, WanderingModel};
use crate::{Error, Result};

/// Numerical effort profile, bundling grid densities and integrator
/// tolerances. `Fast` is for interactive scans, `High` for final numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Fast,
    #[default]
    Default,
    High,
}

impl Precision {
    pub fn grid_settings(self) -> GridSettings {
        match self {
            Precision::Fast => GridSettings {
                pulse_step_divisor: 6.0,
                tail_step: 0.1,
                stretch_ratio: 1.12,
                tail_extent: 9.0,
                oscillation_points: 6.0,
            },
            Precision::Default => GridSettings::default(),
            Precision::High => GridSettings {
                pulse_step_divisor: 12.0,
                tail_step: 0.025,
                stretch_ratio: 1.05,
                tail_extent: 15.0,
                oscillation_points: 14.0,
            },
        }
    }

    pub fn ode_options(self) -> OdeOptions {
        let mut opts = OdeOptions::default();
        match self {
            Precision::Fast => {
                opts.rtol = 1e-7;
                opts.atol = 1e-10;
            }
            Precision::Default => {}
            Precision::High => {
                opts.rtol = 1e-10;
                opts.atol = 1e-13;
            }
        }
        opts
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Precision::Fast),
            "default" => Ok(Precision::Default),
            "high" => Ok(Precision::High),
            other => Err(Error::Config(format!(
                "unknown precision {other:?}, expected fast, default or high"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Fast => "fast",
            Precision::Default => "default",
            Precision::High => "high",
        })
    }
}

/// A complete two-emitter interference experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub emitter1: EmitterSpec,
    pub emitter2: EmitterSpec,
    /// Shared drive pulse; the arrival-time delay in `hom` shifts the
    /// second emitter's copy.
    pub pulse: PulseSpec,
    #[serde(default)]
    pub hom: HomConfig,
    #[serde(default)]
    pub precision: Precision,
}

impl Default for Scenario {
    /// Two identical unit-rate emitters under the short reference pulse.
    fn default() -> Self {
        Scenario {
            emitter1: EmitterSpec::new("emitter1", 1.0),
            emitter2: EmitterSpec::new("emitter2", 1.0),
            pulse: PulseSpec::pi_pulse(0.026),
            hom: HomConfig::default(),
            precision: Precision::Default,
        }
    }
}

/// A scenario's outputs plus the grid shape they were computed on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub result: HomResult,
    pub grid: GridMeta,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.emitter1.validate()?;
        self.emitter2.validate()?;
        self.pulse.validate()?;
        self.hom.validate()?;
        if let Some(model) = self.wandering() {
            model.validate()?;
        }
        Ok(())
    }

    /// Spectral-wandering model implied by the emitters, if either has a
    /// nonzero noise width. The distribution is centered on the pair's
    /// frequency difference.
    pub fn wandering(&self) -> Option<WanderingModel> {
        if self.emitter1.wander_fwhm > 0.0 || self.emitter2.wander_fwhm > 0.0 {
            Some(WanderingModel::from_fwhm(
                self.hom.delta_omega0,
                self.emitter1.wander_fwhm,
                self.emitter2.wander_fwhm,
            ))
        } else {
            None
        }
    }

    fn gamma_range(&self) -> (f64, f64) {
        let (g1, g2) = (self.emitter1.gamma, self.emitter2.gamma);
        (g1.min(g2), g1.max(g2))
    }

    /// Fastest oscillation of the stored rows along emission time: the
    /// coherences precess at the laser detunings while the pulse drives.
    fn emission_frequency(&self) -> f64 {
        self.emitter1
            .laser_detuning
            .abs()
            .max(self.emitter2.laser_detuning.abs())
    }

    /// Fastest oscillation along the delay axis: each emitter's rotating
    /// frame, their difference, and the full beat of the assembled curve.
    fn delay_frequency(&self) -> f64 {
        let d1 = self.emitter1.laser_detuning;
        let d2 = self.emitter2.laser_detuning;
        let beat = self.hom.delta_omega0 + d2 - d1;
        d1.abs().max(d2.abs()).max((d2 - d1).abs()).max(beat.abs())
    }

    /// Plan the shared emission and delay grids and the stored-row span.
    pub fn grids(&self) -> Result<(Arc<TimeGrid>, Arc<TimeGrid>, f64)> {
        let s = self.precision.grid_settings();
        let (gmin, gmax) = self.gamma_range();
        let shift = self.hom.delta_tau.abs();
        let mut pulses = vec![self.pulse];
        if shift > 0.0 {
            pulses.push(self.pulse.shifted(shift));
        }
        let time = grid::emission_grid(&pulses, gmin, gmax, self.emission_frequency(), &s)?;

        // a row started inside pulse a crosses pulse b for delays within
        // (start_b - end_a, end_b - start_a); sample those windows finely
        let mut windows: Vec<(f64, f64)> = Vec::new();
        let mut prefix_span = 0.0f64;
        for pa in &pulses {
            for pb in &pulses {
                let lo = (pb.support_start() - pa.support_end()).max(0.0);
                let hi = pb.support_end() - pa.support_start();
                if hi > 0.0 {
                    windows.push((lo, hi));
                    prefix_span = prefix_span.max(hi);
                }
            }
        }
        let delay = grid::delay_grid_windows(
            &windows,
            prefix_span,
            self.pulse.sigma(),
            gmin,
            gmax,
            self.delay_frequency(),
            &s,
        )?;
        Ok((Arc::new(time), Arc::new(delay), prefix_span))
    }

    /// Solve both emitters' correlator sets on the shared grids.
    pub fn correlators(&self) -> Result<(CorrelatorSet, CorrelatorSet)> {
        let (time, delay, prefix_span) = self.grids()?;
        let opts = self.precision.ode_options();
        let c1 = correlators::compute(&self.emitter1, &self.pulse, &time, &delay, prefix_span, &opts)?;
        let c2 = correlators::compute(&self.emitter2, &self.pulse, &time, &delay, prefix_span, &opts)?;
        Ok((c1, c2))
    }

    pub fn evaluate(&self) -> Result<Evaluation> {
        self.validate()?;
        let (c1, c2) = self.correlators()?;
        self.evaluate_with(&c1, &c2)
    }

    /// Assemble precomputed correlator sets under this scenario's
    /// interference settings. Parameter scans that move only assembly
    /// inputs (frequency difference, delay within the grids' coverage,
    /// polarization, wandering widths) can reuse the expensive sets
    /// across points through this entry.
    pub fn evaluate_with(&self, c1: &CorrelatorSet, c2: &CorrelatorSet) -> Result<Evaluation> {
        let result = match self.wandering() {
            Some(model) => wandering::averaged_g2(c1, c2, &self.hom, &model)?,
            None => hom::assemble(c1, c2, &self.hom)?,
        };
        Ok(Evaluation {
            result,
            grid: GridMeta::of(c1.time(), c1.delay()),
        })
    }
}
