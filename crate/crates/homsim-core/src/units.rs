//! Physical units at the boundary. The solver itself is unit-free: rates
//! are measured in the first emitter's decay rate, times in its lifetime,
//! angular frequencies in the same rate. SI quantities enter as
//! "<number> <unit>" strings and are converted against that anchor.
//!
//! Frequency units name angular frequencies: "4 GHz" means 4e9 rad/s, so
//! a 250 ps lifetime corresponds to a 4 GHz natural linewidth exactly.
//! The per-cycle reading (multiply by 2 pi) is available as an explicit
//! convention switch for data quoted the other way.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How frequency-unit strings are interpreted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HzConvention {
    /// "GHz" = 1e9 rad/s.
    #[default]
    Angular,
    /// "GHz" = 2 pi * 1e9 rad/s.
    Cycles,
}

impl FromStr for HzConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angular" => Ok(HzConvention::Angular),
            "cycles" => Ok(HzConvention::Cycles),
            other => Err(Error::Config(format!(
                "unknown frequency convention {other:?}, expected angular or cycles"
            ))),
        }
    }
}

impl fmt::Display for HzConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HzConvention::Angular => "angular",
            HzConvention::Cycles => "cycles",
        })
    }
}

const TIME_UNITS: [(&str, f64); 6] = [
    ("fs", 1e-15),
    ("ps", 1e-12),
    ("ns", 1e-9),
    ("us", 1e-6),
    ("ms", 1e-3),
    ("s", 1.0),
];

const FREQ_UNITS: [(&str, f64); 5] = [
    ("THz", 1e12),
    ("GHz", 1e9),
    ("MHz", 1e6),
    ("kHz", 1e3),
    ("Hz", 1.0),
];

fn split_unit<'a>(text: &'a str, units: &[(&'a str, f64)], kind: &str) -> Result<(f64, f64)> {
    let text = text.trim();
    for &(suffix, mult) in units {
        if let Some(number) = text.strip_suffix(suffix) {
            let number = number.trim();
            let value: f64 = number.parse().map_err(|_| {
                Error::Config(format!("cannot read the number in {kind} quantity {text:?}"))
            })?;
            if !value.is_finite() {
                return Err(Error::Config(format!("non-finite {kind} quantity {text:?}")));
            }
            return Ok((value, mult));
        }
    }
    Err(Error::Config(format!(
        "{kind} quantity {text:?} needs a unit suffix, e.g. {:?}",
        units[units.len() / 2].0
    )))
}

/// Parse a time quantity like "250 ps" or "2.5e-10 s" into seconds.
pub fn parse_time_s(text: &str) -> Result<f64> {
    let (value, mult) = split_unit(text, &TIME_UNITS, "time")?;
    Ok(value * mult)
}

/// Parse a frequency or rate quantity like "4 GHz" into rad/s (or 1/s)
/// under the given convention.
pub fn parse_angular_s(text: &str, convention: HzConvention) -> Result<f64> {
    let (value, mult) = split_unit(text, &FREQ_UNITS, "frequency")?;
    let factor = match convention {
        HzConvention::Angular => 1.0,
        HzConvention::Cycles => std::f64::consts::TAU,
    };
    Ok(value * mult * factor)
}

/// Converter between SI and the internal unit system, anchored on the
/// first emitter's lifetime (one internal time unit = `seconds_per_unit`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    seconds_per_unit: f64,
}

impl UnitScale {
    pub fn from_lifetime_s(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!(
                "the anchoring lifetime must be a positive time, got {tau} s"
            )));
        }
        Ok(UnitScale { seconds_per_unit: tau })
    }

    pub fn seconds_per_unit(&self) -> f64 {
        self.seconds_per_unit
    }

    pub fn time_in(&self, seconds: f64) -> f64 {
        seconds / self.seconds_per_unit
    }

    pub fn time_out(&self, internal: f64) -> f64 {
        internal * self.seconds_per_unit
    }

    /// Rates (1/s) and angular frequencies (rad/s) scale the same way.
    pub fn rate_in(&self, per_second: f64) -> f64 {
        per_second * self.seconds_per_unit
    }

    pub fn rate_out(&self, internal: f64) -> f64 {
        internal / self.seconds_per_unit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // value * scale may land one ulp off the decimal literal
    fn close(parsed: f64, expected: f64) -> bool {
        (parsed - expected).abs() <= 1e-15 * expected
    }

    #[test]
    fn time_strings_parse_in_all_spellings() {
        assert!(close(parse_time_s("250 ps").unwrap(), 250e-12));
        assert!(close(parse_time_s("250ps").unwrap(), 250e-12));
        assert_eq!(parse_time_s(" 2.5e-10 s ").unwrap(), 2.5e-10);
        assert!(close(parse_time_s("10 ns").unwrap(), 1e-8));
        assert!(close(parse_time_s("3 fs").unwrap(), 3e-15));
        assert!(close(parse_time_s("1.5 us").unwrap(), 1.5e-6));
        assert!(parse_time_s("250").is_err());
        assert!(parse_time_s("ps").is_err());
        assert!(parse_time_s("250 parsec").is_err());
        assert!(parse_time_s("inf s").is_err());
    }

    #[test]
    fn frequency_strings_follow_the_convention() {
        assert!(close(parse_angular_s("4 GHz", HzConvention::Angular).unwrap(), 4e9));
        assert!(close(
            parse_angular_s("4 GHz", HzConvention::Cycles).unwrap(),
            4e9 * std::f64::consts::TAU
        ));
        assert!(close(parse_angular_s("2 MHz", HzConvention::Angular).unwrap(), 2e6));
        assert_eq!(parse_angular_s("7Hz", HzConvention::Angular).unwrap(), 7.0);
        assert!(parse_angular_s("4", HzConvention::Angular).is_err());
        assert!("angular".parse::<HzConvention>().unwrap() == HzConvention::Angular);
        assert!("weekly".parse::<HzConvention>().is_err());
    }

    #[test]
    fn lifetime_anchor_makes_linewidth_one() {
        // 250 ps lifetime <=> 4 GHz angular linewidth
        let scale = UnitScale::from_lifetime_s(parse_time_s("250 ps").unwrap()).unwrap();
        let gamma = scale.rate_in(parse_angular_s("4 GHz", HzConvention::Angular).unwrap());
        assert!((gamma - 1.0).abs() < 1e-15);
        assert!(UnitScale::from_lifetime_s(0.0).is_err());
        assert!(UnitScale::from_lifetime_s(f64::NAN).is_err());
    }

    #[test]
    fn conversions_round_trip_to_twelve_digits() {
        let scale = UnitScale::from_lifetime_s(250e-12).unwrap();
        for value in [1e-13, 3.7e-10, 2e-9, 5e-8] {
            let back = scale.time_out(scale.time_in(value));
            assert!((back - value).abs() <= 1e-12 * value);
        }
        for rate in [4e9, 1.7e8, 2.5e12] {
            let back = scale.rate_out(scale.rate_in(rate));
            assert!((back - rate).abs() <= 1e-12 * rate);
        }
    }
}
