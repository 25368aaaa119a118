//! TOML run configuration with physical units.
//!
//! The solver works in scaled units where emitter 1 decays at rate 1.
//! Config files may state quantities either as plain numbers, taken to be
//! already scaled, or as strings with an SI unit ("250 ps", "4 GHz").
//! Using unit strings requires an anchor: emitter 1's lifetime or decay
//! rate given in physical units, which fixes the time scale and makes
//! emitter 1's scaled rate exactly 1. Mixing is allowed; each quantity is
//! interpreted independently.
//!
//! Frequency strings follow the angular convention by default ("4 GHz"
//! means 4e9 rad/s, matching a 250 ps lifetime at rate 1); the
//! `hz_convention = "cycles"` key or the equivalent command-line flag
//! multiplies them by 2 pi instead.
//!
//! Unknown keys anywhere are errors, as is a schema version this build
//! does not understand.

use std::path::Path;

use serde::Deserialize;

use crate::hom::Normalization;
use crate::scenario::{Precision, Scenario};
use crate::sweep::{AxisScale, ParamPath, SweepAxis};
use crate::tls::{t1t2_to_rates, EmitterSpec, PulseSpec};
use crate::units::{parse_angular_s, parse_time_s, HzConvention, UnitScale};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A quantity that is either already in scaled units or carries an SI
/// unit suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Qty {
    Number(f64),
    Text(String),
}

/// Command-line switches that win over file keys.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConfigOverrides {
    pub precision: Option<Precision>,
    pub hz_convention: Option<HzConvention>,
}

/// Threshold search request: bracket on one parameter, target floor.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdSpec {
    pub path: ParamPath,
    pub min: f64,
    pub max: f64,
    pub target: f64,
}

/// Everything a run needs, in scaled units.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub scenario: Scenario,
    pub sweep_axes: Option<Vec<SweepAxis>>,
    pub threshold: Option<ThresholdSpec>,
    /// Present when the file anchored physical units; converts scaled
    /// results back to seconds.
    pub scale: Option<UnitScale>,
    pub hz_convention: HzConvention,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    hz_convention: Option<HzConvention>,
    scenario: RawScenario,
    sweep: Option<RawSweep>,
    threshold: Option<RawThreshold>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    emitter1: RawEmitter,
    emitter2: RawEmitter,
    pulse: RawPulse,
    hom: Option<RawHom>,
    precision: Option<Precision>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    gamma: Option<Qty>,
    lifetime: Option<Qty>,
    gamma_deph: Option<Qty>,
    t2: Option<Qty>,
    laser_detuning: Option<Qty>,
    wander_fwhm: Option<Qty>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    fwhm: Qty,
    area_in_pi: Option<f64>,
    center: Option<Qty>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHom {
    delta_omega0: Option<Qty>,
    delta_tau: Option<Qty>,
    phi: Option<f64>,
    normalization: Option<Normalization>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axes: Vec<RawAxis>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    path: String,
    min: Qty,
    max: Qty,
    count: usize,
    scale: Option<AxisScale>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThreshold {
    path: String,
    min: Qty,
    max: Qty,
    target: f64,
}

/// Converts quantities into scaled units, complaining when a unit string
/// appears without an anchored scale.
struct Resolver {
    scale: Option<UnitScale>,
    hz: HzConvention,
}

impl Resolver {
    fn anchored(&self, key: &str, text: &str) -> Result<&UnitScale> {
        self.scale.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "{key} = {text:?} carries physical units, but no scale is anchored; \
                 give emitter1.lifetime or emitter1.gamma in physical units"
            ))
        })
    }

    fn time(&self, qty: &Qty, key: &str) -> Result<f64> {
        match qty {
            Qty::Number(v) => Ok(*v),
            Qty::Text(s) => Ok(self.anchored(key, s)?.time_in(parse_time_s(s)?)),
        }
    }

    fn rate(&self, qty: &Qty, key: &str) -> Result<f64> {
        match qty {
            Qty::Number(v) => Ok(*v),
            Qty::Text(s) => Ok(self
                .anchored(key, s)?
                .rate_in(parse_angular_s(s, self.hz)?)),
        }
    }

    fn bare(&self, qty: &Qty, key: &str) -> Result<f64> {
        match qty {
            Qty::Number(v) => Ok(*v),
            Qty::Text(s) => Err(Error::Config(format!(
                "{key} is dimensionless, got {s:?}"
            ))),
        }
    }

    /// Min/max of a sweep or threshold bracket, in the dimension the swept
    /// parameter expects.
    fn by_path(&self, path: ParamPath, qty: &Qty, key: &str) -> Result<f64> {
        match dimension(path) {
            Dimension::Time => self.time(qty, key),
            Dimension::Bare => self.bare(qty, key),
            Dimension::Frequency => self.rate(qty, key),
        }
    }
}

/// Physical dimension a swept parameter carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    /// Rates and angular frequencies; they scale identically.
    Frequency,
    Bare,
}

pub fn dimension(path: ParamPath) -> Dimension {
    match path {
        ParamPath::DeltaTau | ParamPath::PulseFwhm | ParamPath::Emitter2Lifetime => Dimension::Time,
        ParamPath::GammaRatio | ParamPath::Phi => Dimension::Bare,
        _ => Dimension::Frequency,
    }
}

/// Emitter 1 sets the scale. A physical lifetime or rate anchors it and
/// pins the scaled rate to exactly 1; a plain number is used as is.
fn anchor(raw: &RawEmitter, hz: HzConvention) -> Result<(f64, Option<UnitScale>)> {
    match (&raw.gamma, &raw.lifetime) {
        (Some(_), Some(_)) => Err(Error::Config(
            "emitter1: give gamma or lifetime, not both".into(),
        )),
        (None, None) => Err(Error::Config(
            "emitter1 needs a gamma or lifetime key".into(),
        )),
        (Some(Qty::Number(v)), None) => Ok((*v, None)),
        (None, Some(Qty::Number(v))) => Ok((1.0 / v, None)),
        (Some(Qty::Text(s)), None) => {
            let g = parse_angular_s(s, hz)?;
            Ok((1.0, Some(UnitScale::from_lifetime_s(1.0 / g)?)))
        }
        (None, Some(Qty::Text(s))) => {
            Ok((1.0, Some(UnitScale::from_lifetime_s(parse_time_s(s)?)?)))
        }
    }
}

fn partner_gamma(raw: &RawEmitter, res: &Resolver) -> Result<f64> {
    match (&raw.gamma, &raw.lifetime) {
        (Some(_), Some(_)) => Err(Error::Config(
            "emitter2: give gamma or lifetime, not both".into(),
        )),
        (None, None) => Err(Error::Config(
            "emitter2 needs a gamma or lifetime key".into(),
        )),
        (Some(q), None) => res.rate(q, "emitter2.gamma"),
        (None, Some(q)) => Ok(1.0 / res.time(q, "emitter2.lifetime")?),
    }
}

fn build_emitter(label: &str, raw: &RawEmitter, res: &Resolver, gamma: f64) -> Result<EmitterSpec> {
    let mut e = EmitterSpec::new(label, gamma);
    match (&raw.gamma_deph, &raw.t2) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(format!(
                "{label}: give gamma_deph or t2, not both"
            )))
        }
        (Some(q), None) => e.gamma_deph = res.rate(q, &format!("{label}.gamma_deph"))?,
        (None, Some(q)) => {
            let t2 = res.time(q, &format!("{label}.t2"))?;
            let (_, deph) = t1t2_to_rates(1.0 / gamma, t2)?;
            e.gamma_deph = deph;
        }
        (None, None) => {}
    }
    if let Some(q) = &raw.laser_detuning {
        e.laser_detuning = res.rate(q, &format!("{label}.laser_detuning"))?;
    }
    if let Some(q) = &raw.wander_fwhm {
        e.wander_fwhm = res.rate(q, &format!("{label}.wander_fwhm"))?;
    }
    Ok(e)
}

pub fn parse_config(text: &str, overrides: &ConfigOverrides) -> Result<LoadedConfig> {
    let raw: RawConfig = toml::from_str(text)?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} not supported, this build reads version {SCHEMA_VERSION}",
            raw.schema_version
        )));
    }
    let hz = overrides
        .hz_convention
        .or(raw.hz_convention)
        .unwrap_or_default();

    let (gamma1, scale) = anchor(&raw.scenario.emitter1, hz)?;
    let res = Resolver { scale, hz };

    let emitter1 = build_emitter("emitter1", &raw.scenario.emitter1, &res, gamma1)?;
    let gamma2 = partner_gamma(&raw.scenario.emitter2, &res)?;
    let emitter2 = build_emitter("emitter2", &raw.scenario.emitter2, &res, gamma2)?;

    let fwhm = res.time(&raw.scenario.pulse.fwhm, "pulse.fwhm")?;
    let mut pulse = PulseSpec::pi_pulse(fwhm);
    if let Some(area) = raw.scenario.pulse.area_in_pi {
        pulse.area = area * std::f64::consts::PI;
    }
    if let Some(q) = &raw.scenario.pulse.center {
        pulse.center = res.time(q, "pulse.center")?;
    }

    let mut scenario = Scenario {
        emitter1,
        emitter2,
        pulse,
        ..Scenario::default()
    };
    if let Some(hom) = &raw.scenario.hom {
        if let Some(q) = &hom.delta_omega0 {
            scenario.hom.delta_omega0 = res.rate(q, "hom.delta_omega0")?;
        }
        if let Some(q) = &hom.delta_tau {
            scenario.hom.delta_tau = res.time(q, "hom.delta_tau")?;
        }
        if let Some(phi) = hom.phi {
            scenario.hom.phi = phi;
        }
        if let Some(norm) = hom.normalization {
            scenario.hom.normalization = norm;
        }
    }
    scenario.precision = overrides
        .precision
        .or(raw.scenario.precision)
        .unwrap_or_default();
    scenario.validate()?;

    let sweep_axes = raw
        .sweep
        .map(|sweep| {
            sweep
                .axes
                .iter()
                .map(|ax| {
                    let path: ParamPath = ax.path.parse()?;
                    let axis = SweepAxis {
                        path,
                        min: res.by_path(path, &ax.min, "axis.min")?,
                        max: res.by_path(path, &ax.max, "axis.max")?,
                        count: ax.count,
                        scale: ax.scale.unwrap_or_default(),
                    };
                    axis.validate()?;
                    Ok(axis)
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    let threshold = raw
        .threshold
        .map(|th| -> Result<ThresholdSpec> {
            let path: ParamPath = th.path.parse()?;
            Ok(ThresholdSpec {
                path,
                min: res.by_path(path, &th.min, "threshold.min")?,
                max: res.by_path(path, &th.max, "threshold.max")?,
                target: th.target,
            })
        })
        .transpose()?;

    Ok(LoadedConfig {
        scenario,
        sweep_axes,
        threshold,
        scale: res.scale,
        hz_convention: hz,
    })
}

pub fn load_config(path: &Path, overrides: &ConfigOverrides) -> Result<LoadedConfig> {
    parse_config(&std::fs::read_to_string(path)?, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PHYSICAL: &str = r#"
        schema_version = 1

        [scenario.emitter1]
        lifetime = "250 ps"
        gamma_deph = "0 GHz"

        [scenario.emitter2]
        lifetime = "500 ps"
        laser_detuning = "-2 GHz"

        [scenario.pulse]
        fwhm = "10 ps"

        [scenario.hom]
        delta_omega0 = "4 GHz"
        delta_tau = "-25 ps"

        [sweep]
        [[sweep.axes]]
        path = "delta_omega0"
        min = "0 GHz"
        max = "6 GHz"
        count = 31

        [threshold]
        path = "gamma_ratio"
        min = 1.0
        max = 100.0
        target = 0.1
    "#;

    #[test]
    fn physical_quantities_land_in_scaled_units() {
        let cfg = parse_config(PHYSICAL, &ConfigOverrides::default()).unwrap();
        let sc = &cfg.scenario;
        assert_eq!(sc.emitter1.gamma, 1.0);
        assert_abs_diff_eq!(sc.emitter2.gamma, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.emitter2.laser_detuning, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.pulse.fwhm, 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.hom.delta_omega0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.hom.delta_tau, -0.1, epsilon = 1e-12);

        let axes = cfg.sweep_axes.unwrap();
        assert_eq!(axes.len(), 1);
        assert_eq!(axes[0].min, 0.0);
        assert_abs_diff_eq!(axes[0].max, 1.5, epsilon = 1e-12);

        let th = cfg.threshold.unwrap();
        assert_eq!(th.path, ParamPath::GammaRatio);
        assert_eq!(th.target, 0.1);

        let scale = cfg.scale.unwrap();
        assert_abs_diff_eq!(scale.seconds_per_unit(), 250e-12, epsilon = 1e-24);
    }

    #[test]
    fn plain_numbers_work_without_an_anchor() {
        let text = r#"
            schema_version = 1
            [scenario.emitter1]
            gamma = 1.0
            [scenario.emitter2]
            gamma = 2
            [scenario.pulse]
            fwhm = 0.026
        "#;
        let cfg = parse_config(text, &ConfigOverrides::default()).unwrap();
        assert!(cfg.scale.is_none());
        assert_eq!(cfg.scenario.emitter2.gamma, 2.0);
        assert_eq!(cfg.scenario.hom.phi, 0.0);
        assert!(cfg.sweep_axes.is_none());

        let mixed = text.replace("fwhm = 0.026", "fwhm = \"10 ps\"");
        let err = parse_config(&mixed, &ConfigOverrides::default()).unwrap_err();
        assert!(err.to_string().contains("anchored"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn coherence_time_converts_to_pure_dephasing() {
        let text = r#"
            schema_version = 1
            [scenario.emitter1]
            lifetime = "250 ps"
            t2 = "250 ps"
            [scenario.emitter2]
            gamma = 1.0
            [scenario.pulse]
            fwhm = "10 ps"
        "#;
        let cfg = parse_config(text, &ConfigOverrides::default()).unwrap();
        // 1/T2 = gamma/2 + gamma_deph
        assert_abs_diff_eq!(cfg.scenario.emitter1.gamma_deph, 0.5, epsilon = 1e-12);

        let relaxed = text.replace("t2 = \"250 ps\"", "t2 = \"500 ps\"");
        let cfg = parse_config(&relaxed, &ConfigOverrides::default()).unwrap();
        assert_abs_diff_eq!(cfg.scenario.emitter1.gamma_deph, 0.0, epsilon = 1e-12);

        let broken = text.replace("t2 = \"250 ps\"", "t2 = \"600 ps\"");
        let err = parse_config(&broken, &ConfigOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_schemas_and_stray_keys_are_rejected() {
        let v2 = PHYSICAL.replace("schema_version = 1", "schema_version = 2");
        assert!(parse_config(&v2, &ConfigOverrides::default())
            .unwrap_err()
            .to_string()
            .contains("schema_version"));

        let stray = format!("{PHYSICAL}\n[scenario.detector]\nefficiency = 0.3\n");
        assert!(parse_config(&stray, &ConfigOverrides::default()).is_err());

        let both = PHYSICAL.replace(
            "lifetime = \"500 ps\"",
            "lifetime = \"500 ps\"\ngamma = 0.5",
        );
        assert!(parse_config(&both, &ConfigOverrides::default())
            .unwrap_err()
            .to_string()
            .contains("not both"));

        let dimless = PHYSICAL.replace("min = 1.0", "min = \"1 GHz\"");
        assert!(parse_config(&dimless, &ConfigOverrides::default())
            .unwrap_err()
            .to_string()
            .contains("dimensionless"));
    }

    #[test]
    fn command_line_switches_override_file_keys() {
        let text = PHYSICAL.replace(
            "schema_version = 1",
            "schema_version = 1\n[scenario]\nprecision = \"fast\"",
        );
        let cfg = parse_config(&text, &ConfigOverrides::default()).unwrap();
        assert_eq!(cfg.scenario.precision, Precision::Fast);

        let over = ConfigOverrides {
            precision: Some(Precision::High),
            hz_convention: Some(HzConvention::Cycles),
        };
        let cfg = parse_config(&text, &over).unwrap();
        assert_eq!(cfg.scenario.precision, Precision::High);
        // cycles: 4 GHz becomes 2 pi * 4e9 rad/s, i.e. 2 pi in scaled units
        assert_abs_diff_eq!(
            cfg.scenario.hom.delta_omega0,
            std::f64::consts::TAU,
            epsilon = 1e-9
        );
    }
}
