//! Predicted interference quality for real emitter platforms.
//!
//! Everything else in the crate works in scaled units where the first
//! emitter's decay rate is 1. This module is the bridge back to the lab:
//! fix a reference emitter by its physical lifetime, sweep the partner's
//! lifetime over a logarithmic grid at a set of fixed physical frequency
//! differences, and pin named systems from the literature onto the
//! resulting curves. The table of presets ships inside the binary but can
//! be replaced by a user file with the same layout.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{Precision, Scenario};
use crate::tls::PulseSpec;
use crate::units::parse_time_s;
use crate::{Error, Result};

/// Partner-lifetime span of the report grid, in seconds. Preset systems
/// outside the span still get marks; they are evaluated directly rather
/// than read off the curves.
pub const LIFETIME_SPAN_S: (f64, f64) = (50e-12, 20e-9);

/// A named emitter platform with its literature lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSystem {
    pub name: String,
    /// Excited-state lifetime as written in the source, e.g. "2.0 ns".
    pub lifetime: String,
    pub reference: String,
}

impl RealSystem {
    pub fn lifetime_s(&self) -> Result<f64> {
        let tau = parse_time_s(&self.lifetime)?;
        if tau <= 0.0 {
            return Err(Error::Config(format!(
                "system {:?} has nonpositive lifetime {:?}",
                self.name, self.lifetime
            )));
        }
        Ok(tau)
    }
}

#[derive(Debug, Deserialize)]
struct SystemsFile {
    system: Vec<RealSystem>,
}

pub fn parse_systems(text: &str) -> Result<Vec<RealSystem>> {
    let file: SystemsFile = toml::from_str(text)?;
    if file.system.is_empty() {
        return Err(Error::Config("system table lists no entries".into()));
    }
    for sys in &file.system {
        sys.lifetime_s()?;
    }
    Ok(file.system)
}

/// The bundled platform table.
pub fn builtin_systems() -> Vec<RealSystem> {
    parse_systems(include_str!("../data/real_systems.toml"))
        .expect("bundled system table is valid")
}

pub fn load_systems(path: &Path) -> Result<Vec<RealSystem>> {
    parse_systems(&std::fs::read_to_string(path)?)
}

/// Interference floor versus partner lifetime at one fixed physical
/// frequency difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LifetimeCurve {
    pub detuning_rad_s: f64,
    pub g2: Vec<f64>,
}

/// A preset system pinned at its own lifetime, one value per report
/// detuning in curve order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemMark {
    pub name: String,
    pub lifetime_s: f64,
    pub g2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemsReport {
    pub lifetime1_s: f64,
    pub pulse_fwhm_s: f64,
    pub lifetimes2_s: Vec<f64>,
    pub curves: Vec<LifetimeCurve>,
    pub marks: Vec<SystemMark>,
}

/// Sweep the partner lifetime against a fixed reference emitter.
///
/// `detunings_rad_s` are physical frequency differences between the
/// emitters; each produces one curve over the logarithmic lifetime grid.
/// Both emitters are driven by the same physical pulse, so its scaled
/// width follows the reference lifetime.
pub fn real_systems_report(
    lifetime1_s: f64,
    detunings_rad_s: &[f64],
    pulse_fwhm_s: f64,
    count: usize,
    systems: &[RealSystem],
    precision: Precision,
) -> Result<SystemsReport> {
    if !lifetime1_s.is_finite() || lifetime1_s <= 0.0 {
        return Err(Error::Config(format!(
            "reference lifetime must be positive, got {lifetime1_s} s"
        )));
    }
    if !pulse_fwhm_s.is_finite() || pulse_fwhm_s <= 0.0 {
        return Err(Error::Config(format!(
            "pulse width must be positive, got {pulse_fwhm_s} s"
        )));
    }
    if detunings_rad_s.is_empty() {
        return Err(Error::Config("no detunings requested".into()));
    }
    if count < 2 {
        return Err(Error::Config(format!(
            "lifetime grid needs at least 2 points, got {count}"
        )));
    }

    let (lo, hi) = LIFETIME_SPAN_S;
    let ratio = hi / lo;
    let lifetimes2_s: Vec<f64> = (0..count)
        .map(|i| lo * ratio.powf(i as f64 / (count - 1) as f64))
        .collect();
    let mark_taus: Vec<f64> = systems
        .iter()
        .map(|sys| sys.lifetime_s())
        .collect::<Result<_>>()?;

    let mut all_taus = lifetimes2_s.clone();
    all_taus.extend(&mark_taus);
    let rows = evaluate_lifetimes(
        lifetime1_s,
        detunings_rad_s,
        pulse_fwhm_s,
        &all_taus,
        precision,
    )?;
    let (grid_rows, mark_rows) = rows.split_at(count);

    let curves = detunings_rad_s
        .iter()
        .enumerate()
        .map(|(j, &dw)| LifetimeCurve {
            detuning_rad_s: dw,
            g2: grid_rows.iter().map(|row| row[j]).collect(),
        })
        .collect();
    let marks = systems
        .iter()
        .zip(mark_taus)
        .zip(mark_rows)
        .map(|((sys, tau), row)| SystemMark {
            name: sys.name.clone(),
            lifetime_s: tau,
            g2: row.clone(),
        })
        .collect();

    Ok(SystemsReport {
        lifetime1_s,
        pulse_fwhm_s,
        lifetimes2_s,
        curves,
        marks,
    })
}

/// One row per lifetime, one column per detuning. The correlator sets for
/// a lifetime are solved once with grids planned at the largest requested
/// detuning; the frequency difference itself only enters the assembly, so
/// the remaining detunings reuse the sets.
fn evaluate_lifetimes(
    lifetime1_s: f64,
    detunings_rad_s: &[f64],
    pulse_fwhm_s: f64,
    lifetimes2_s: &[f64],
    precision: Precision,
) -> Result<Vec<Vec<f64>>> {
    let fwhm = pulse_fwhm_s / lifetime1_s;
    let detunings: Vec<f64> = detunings_rad_s
        .iter()
        .map(|dw| dw * lifetime1_s)
        .collect();
    let worst = detunings
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);

    lifetimes2_s
        .par_iter()
        .map(|&tau2| {
            let mut sc = Scenario {
                precision,
                ..Scenario::default()
            };
            sc.pulse = PulseSpec::pi_pulse(fwhm);
            sc.emitter2.gamma = lifetime1_s / tau2;
            sc.hom.delta_omega0 = worst;
            sc.validate()?;
            let (c1, c2) = sc.correlators()?;
            detunings
                .iter()
                .map(|&dw| {
                    let mut point = sc.clone();
                    point.hom.delta_omega0 = dw;
                    Ok(point.evaluate_with(&c1, &c2)?.result.g2hom_normalized)
                })
                .collect()
        })
        .collect()
}
