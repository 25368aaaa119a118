//! Parameter sweeps and threshold searches on the full simulator.
//!
//! A sweep takes a base scenario and up to two axes, evaluates every grid
//! point, and returns the records in row-major axis order no matter how
//! the work was scheduled. A point that fails keeps its slot with the
//! error message in place of numbers, so one sick corner never costs the
//! rest of a map. Axes that move only assembly inputs share the correlator
//! sets of their group, which is what makes dense maps over the frequency
//! difference affordable: the sets are the expensive part, the assembly is
//! cheap.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::GridMeta;
use crate::hom::{Breakdown, HomResult};
use crate::scenario::Scenario;
use crate::tls::PulseSpec;
use crate::{Error, Result};

/// A swept scenario parameter, named by a dotted path.
///
/// Besides the direct fields there are a few composite paths: the decay
/// ratio and the second lifetime move `emitter2.gamma` relative to the
/// first emitter, the dephasing sum puts everything on the first emitter
/// (only the sum of both rates enters any observable), and the combined
/// wandering width splits evenly between the emitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamPath {
    Emitter1Gamma,
    Emitter2Gamma,
    Emitter1GammaDeph,
    Emitter2GammaDeph,
    Emitter1LaserDetuning,
    Emitter2LaserDetuning,
    Emitter1WanderFwhm,
    Emitter2WanderFwhm,
    GammaRatio,
    GammaDephSum,
    DeltaOmega0,
    DeltaTau,
    Phi,
    PulseFwhm,
    WanderFwhmCombined,
    Emitter2Lifetime,
}

const PARAM_NAMES: [(ParamPath, &str); 16] = [
    (ParamPath::Emitter1Gamma, "emitter1.gamma"),
    (ParamPath::Emitter2Gamma, "emitter2.gamma"),
    (ParamPath::Emitter1GammaDeph, "emitter1.gamma_deph"),
    (ParamPath::Emitter2GammaDeph, "emitter2.gamma_deph"),
    (ParamPath::Emitter1LaserDetuning, "emitter1.laser_detuning"),
    (ParamPath::Emitter2LaserDetuning, "emitter2.laser_detuning"),
    (ParamPath::Emitter1WanderFwhm, "emitter1.wander_fwhm"),
    (ParamPath::Emitter2WanderFwhm, "emitter2.wander_fwhm"),
    (ParamPath::GammaRatio, "gamma_ratio"),
    (ParamPath::GammaDephSum, "gamma_deph_sum"),
    (ParamPath::DeltaOmega0, "delta_omega0"),
    (ParamPath::DeltaTau, "delta_tau"),
    (ParamPath::Phi, "phi"),
    (ParamPath::PulseFwhm, "pulse.fwhm"),
    (ParamPath::WanderFwhmCombined, "wandering.fwhm_combined"),
    (ParamPath::Emitter2Lifetime, "emitter2.lifetime"),
];

impl ParamPath {
    pub fn name(self) -> &'static str {
        PARAM_NAMES.iter().find(|(p, _)| *p == self).unwrap().1
    }

    /// Write `value` into the scenario. Validation happens when the
    /// scenario is evaluated, so out-of-range values become per-point
    /// errors rather than panics.
    pub fn apply(self, sc: &mut Scenario, value: f64) {
        match self {
            ParamPath::Emitter1Gamma => sc.emitter1.gamma = value,
            ParamPath::Emitter2Gamma => sc.emitter2.gamma = value,
            ParamPath::Emitter1GammaDeph => sc.emitter1.gamma_deph = value,
            ParamPath::Emitter2GammaDeph => sc.emitter2.gamma_deph = value,
            ParamPath::Emitter1LaserDetuning => sc.emitter1.laser_detuning = value,
            ParamPath::Emitter2LaserDetuning => sc.emitter2.laser_detuning = value,
            ParamPath::Emitter1WanderFwhm => sc.emitter1.wander_fwhm = value,
            ParamPath::Emitter2WanderFwhm => sc.emitter2.wander_fwhm = value,
            ParamPath::GammaRatio => sc.emitter2.gamma = value * sc.emitter1.gamma,
            ParamPath::GammaDephSum => {
                sc.emitter1.gamma_deph = value;
                sc.emitter2.gamma_deph = 0.0;
            }
            ParamPath::DeltaOmega0 => sc.hom.delta_omega0 = value,
            ParamPath::DeltaTau => sc.hom.delta_tau = value,
            ParamPath::Phi => sc.hom.phi = value,
            ParamPath::PulseFwhm => {
                let mut p = PulseSpec::pi_pulse(value);
                p.area = sc.pulse.area;
                sc.pulse = p;
            }
            ParamPath::WanderFwhmCombined => {
                let each = value / std::f64::consts::SQRT_2;
                sc.emitter1.wander_fwhm = each;
                sc.emitter2.wander_fwhm = each;
            }
            ParamPath::Emitter2Lifetime => sc.emitter2.gamma = 1.0 / value,
        }
    }

    /// Whether changing this parameter invalidates the correlator sets.
    /// The frequency difference, polarization, and wandering widths enter
    /// only in the assembly; everything else reshapes the solved dynamics
    /// or the grids.
    pub fn affects_sets(self) -> bool {
        !matches!(
            self,
            ParamPath::DeltaOmega0
                | ParamPath::Phi
                | ParamPath::Emitter1WanderFwhm
                | ParamPath::Emitter2WanderFwhm
                | ParamPath::WanderFwhmCombined
        )
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PARAM_NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(p, _)| *p)
            .ok_or_else(|| {
                let known: Vec<&str> = PARAM_NAMES.iter().map(|(_, n)| *n).collect();
                Error::Config(format!(
                    "unknown parameter path {s:?}, expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for ParamPath {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ParamPath> for String {
    fn from(p: ParamPath) -> String {
        p.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

/// One swept axis: `count` values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub path: ParamPath,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

impl SweepAxis {
    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() || self.min >= self.max {
            return Err(Error::Config(format!(
                "axis {} needs finite min < max, got {}..{}",
                self.path, self.min, self.max
            )));
        }
        if self.count < 2 {
            return Err(Error::Config(format!(
                "axis {} needs at least two points, got {}",
                self.path, self.count
            )));
        }
        if self.scale == AxisScale::Log && self.min <= 0.0 {
            return Err(Error::Config(format!(
                "axis {} is logarithmic, needs min > 0, got {}",
                self.path, self.min
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * f,
                    AxisScale::Log => self.min * (self.max / self.min).powf(f),
                }
            })
            .collect()
    }
}

/// A base scenario and up to two axes to sweep it over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub scenario: Scenario,
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Config(format!(
                "a sweep takes one or two axes, got {}",
                self.axes.len()
            )));
        }
        for axis in &self.axes {
            axis.validate()?;
        }
        Ok(())
    }
}

/// The scalar observables of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    pub g2hom_pulsewise: f64,
    pub n_p: f64,
    pub n_1: f64,
    pub n_2: f64,
    pub g2hom_normalized: f64,
    pub breakdown: Breakdown,
}

impl From<&HomResult> for Scalars {
    fn from(r: &HomResult) -> Self {
        Scalars {
            g2hom_pulsewise: r.g2hom_pulsewise,
            n_p: r.n_p,
            n_1: r.n_1,
            n_2: r.n_2,
            g2hom_normalized: r.g2hom_normalized,
            breakdown: r.breakdown,
        }
    }
}

/// One evaluated sweep point: the axis values in axis order, then either
/// the observables or the error that replaced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: Vec<(String, f64)>,
    pub scalars: Option<Scalars>,
    pub grid: Option<GridMeta>,
    pub error: Option<String>,
}

/// All records of a sweep in row-major axis order, with the spec echoed
/// back and the failure count. Wall time is informational only and stays
/// out of the serialized output so identical runs produce identical files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub version: String,
    pub spec: SweepSpec,
    pub records: Vec<RunRecord>,
    pub failed: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

fn cartesian(lens: &[usize]) -> Vec<Vec<usize>> {
    let mut combos = vec![Vec::new()];
    for &n in lens {
        combos = combos
            .into_iter()
            .flat_map(|base| {
                (0..n).map(move |i| {
                    let mut c = base.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    combos
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let started = Instant::now();
    spec.validate()?;
    let values: Vec<Vec<f64>> = spec.axes.iter().map(SweepAxis::values).collect();
    let shape: Vec<usize> = values.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();

    let set_axes: Vec<usize> = (0..spec.axes.len())
        .filter(|&i| spec.axes[i].path.affects_sets())
        .collect();
    let free_axes: Vec<usize> = (0..spec.axes.len())
        .filter(|&i| !spec.axes[i].path.affects_sets())
        .collect();
    let outers = cartesian(&set_axes.iter().map(|&i| shape[i]).collect::<Vec<_>>());
    let inners = cartesian(&free_axes.iter().map(|&i| shape[i]).collect::<Vec<_>>());

    let groups: Vec<Vec<(usize, RunRecord)>> = outers
        .par_iter()
        .map(|outer| {
            let mut base = spec.scenario.clone();
            for (k, &ax) in set_axes.iter().enumerate() {
                spec.axes[ax].path.apply(&mut base, values[ax][outer[k]]);
            }
            // plan the shared grids for the worst of the assembly-only
            // values, so every inner point is resolved
            let mut grid_sc = base.clone();
            for &ax in &free_axes {
                let a = &spec.axes[ax];
                let worst = if a.min.abs() >= a.max.abs() { a.min } else { a.max };
                a.path.apply(&mut grid_sc, worst);
            }
            let sets = grid_sc.validate().and_then(|()| grid_sc.correlators());

            inners
                .iter()
                .map(|inner| {
                    let mut sc = base.clone();
                    let mut index = vec![0usize; spec.axes.len()];
                    for (k, &ax) in set_axes.iter().enumerate() {
                        index[ax] = outer[k];
                    }
                    for (k, &ax) in free_axes.iter().enumerate() {
                        index[ax] = inner[k];
                        spec.axes[ax].path.apply(&mut sc, values[ax][inner[k]]);
                    }
                    let flat = index
                        .iter()
                        .zip(&shape)
                        .fold(0usize, |acc, (&i, &n)| acc * n + i);
                    let params = index
                        .iter()
                        .enumerate()
                        .map(|(ax, &i)| (spec.axes[ax].path.name().to_string(), values[ax][i]))
                        .collect();

                    let evaluated = match &sets {
                        Ok((c1, c2)) => sc.validate().and_then(|()| sc.evaluate_with(c1, c2)),
                        Err(e) => Err(Error::Config(e.to_string())),
                    };
                    let record = match evaluated {
                        Ok(eval) => RunRecord {
                            params,
                            scalars: Some(Scalars::from(&eval.result)),
                            grid: Some(eval.grid),
                            error: None,
                        },
                        Err(e) => RunRecord {
                            params,
                            scalars: None,
                            grid: None,
                            error: Some(e.to_string()),
                        },
                    };
                    (flat, record)
                })
                .collect()
        })
        .collect();

    let mut slots: Vec<Option<RunRecord>> = vec![None; total];
    for (flat, record) in groups.into_iter().flatten() {
        slots[flat] = Some(record);
    }
    let records: Vec<RunRecord> = slots.into_iter().map(Option::unwrap).collect();
    let failed = records.iter().filter(|r| r.error.is_some()).count();

    Ok(SweepResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        records,
        failed,
        elapsed: started.elapsed(),
    })
}

/// Largest parameter value on `path` at which the normalized coincidence
/// still stays at or below `target`, located on the full simulator.
///
/// A 16-point scan over the span brackets the crossings; the last upward
/// crossing is refined by bisection to a relative width of 1e-3. Taking
/// the last crossing makes non-monotone axes (wandering width around a
/// static detuning) report the boundary of the entire acceptable region.
pub fn find_threshold(
    scenario: &Scenario,
    path: ParamPath,
    span: (f64, f64),
    target: f64,
) -> Result<f64> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::Config(format!(
            "threshold target must lie in (0, 0.5), got {target}"
        )));
    }
    let (lo, hi) = span;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Config(format!(
            "threshold span needs finite lo < hi, got {lo}..{hi}"
        )));
    }
    scenario.validate()?;

    let sets = if path.affects_sets() {
        None
    } else {
        let mut grid_sc = scenario.clone();
        path.apply(&mut grid_sc, if lo.abs() >= hi.abs() { lo } else { hi });
        grid_sc.validate()?;
        Some(grid_sc.correlators()?)
    };
    let eval = |x: f64| -> Result<f64> {
        let mut sc = scenario.clone();
        path.apply(&mut sc, x);
        sc.validate()?;
        let eval = match &sets {
            Some((c1, c2)) => sc.evaluate_with(c1, c2)?,
            None => sc.evaluate()?,
        };
        Ok(eval.result.g2hom_normalized)
    };

    const SCAN: usize = 16;
    let mut bracket = None;
    let mut prev = (lo, eval(lo)?);
    for i in 1..SCAN {
        let x = lo + (hi - lo) * i as f64 / (SCAN - 1) as f64;
        let g = eval(x)?;
        if prev.1 <= target && g > target {
            bracket = Some((prev.0, x));
        }
        prev = (x, g);
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoBracket {
        axis: path.name().to_string(),
        lo,
        hi,
    })?;
    while b - a > 1e-3 * b.abs().max(1e-6) {
        let mid = 0.5 * (a + b);
        if eval(mid)? <= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Precision;
    use approx::assert_abs_diff_eq;

    fn fast_baseline() -> Scenario {
        Scenario {
            precision: Precision::Fast,
            ..Scenario::default()
        }
    }

    #[test]
    fn axis_values_hit_endpoints_on_both_scales() {
        let lin = SweepAxis {
            path: ParamPath::DeltaOmega0,
            min: -3.0,
            max: 3.0,
            count: 7,
            scale: AxisScale::Linear,
        };
        let v = lin.values();
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], -3.0);
        assert_eq!(v[6], 3.0);
        assert_abs_diff_eq!(v[3], 0.0, epsilon = 1e-15);

        let log = SweepAxis {
            path: ParamPath::GammaRatio,
            min: 0.2,
            max: 10.0,
            count: 5,
            scale: AxisScale::Log,
        };
        let v = log.values();
        assert_eq!(v[0], 0.2);
        assert_eq!(v[4], 10.0);
        for w in v.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], (50.0f64).powf(0.25), epsilon = 1e-12);
        }

        let bad = SweepAxis { count: 1, ..lin };
        assert!(bad.validate().is_err());
        let bad = SweepAxis {
            min: 0.0,
            scale: AxisScale::Log,
            ..log
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn param_paths_round_trip_and_mutate_the_right_fields() {
        for (path, name) in PARAM_NAMES {
            assert_eq!(name.parse::<ParamPath>().unwrap(), path);
            assert_eq!(path.to_string(), name);
            let json = serde_json::to_string(&path).unwrap();
            assert_eq!(serde_json::from_str::<ParamPath>(&json).unwrap(), path);
        }
        assert!("emitter3.gamma".parse::<ParamPath>().is_err());

        let mut sc = Scenario::default();
        sc.emitter1.gamma = 2.0;
        ParamPath::GammaRatio.apply(&mut sc, 3.0);
        assert_eq!(sc.emitter2.gamma, 6.0);
        ParamPath::Emitter2Lifetime.apply(&mut sc, 4.0);
        assert_eq!(sc.emitter2.gamma, 0.25);
        ParamPath::GammaDephSum.apply(&mut sc, 1.2);
        assert_eq!((sc.emitter1.gamma_deph, sc.emitter2.gamma_deph), (1.2, 0.0));
        ParamPath::WanderFwhmCombined.apply(&mut sc, 2.0);
        let model = sc.wandering().unwrap();
        assert_abs_diff_eq!(model.fwhm_total(), 2.0, epsilon = 1e-12);
        ParamPath::PulseFwhm.apply(&mut sc, 0.05);
        assert_eq!(sc.pulse.fwhm, 0.05);
        assert_abs_diff_eq!(sc.pulse.center, 5.0 * sc.pulse.sigma(), epsilon = 1e-15);
    }

    #[test]
    fn two_axis_sweep_is_row_major_and_monotone_in_mismatch() {
        let spec = SweepSpec {
            scenario: fast_baseline(),
            axes: vec![
                SweepAxis {
                    path: ParamPath::GammaRatio,
                    min: 1.0,
                    max: 2.0,
                    count: 3,
                    scale: AxisScale::Linear,
                },
                SweepAxis {
                    path: ParamPath::DeltaOmega0,
                    min: 0.0,
                    max: 2.0,
                    count: 2,
                    scale: AxisScale::Linear,
                },
            ],
        };
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.records.len(), 6);
        assert_eq!(out.failed, 0);
        let ratios = [1.0, 1.0, 1.5, 1.5, 2.0, 2.0];
        let omegas = [0.0, 2.0, 0.0, 2.0, 0.0, 2.0];
        for (i, r) in out.records.iter().enumerate() {
            assert_eq!(r.params[0], ("gamma_ratio".to_string(), ratios[i]));
            assert_eq!(r.params[1], ("delta_omega0".to_string(), omegas[i]));
            assert!(r.scalars.is_some(), "point {i} failed: {:?}", r.error);
        }
        let g = |i: usize| out.records[i].scalars.unwrap().g2hom_normalized;
        // both mismatches push the coincidence floor up
        assert!(g(0) < g(1) && g(0) < g(4));
        assert!(g(4) < g(5));
        // identical pair at zero detuning sits at the re-excitation floor
        assert_abs_diff_eq!(g(0), 0.008, epsilon = 3e-3);
    }

    #[test]
    fn reused_sets_agree_with_fresh_evaluations() {
        let spec = SweepSpec {
            scenario: fast_baseline(),
            axes: vec![SweepAxis {
                path: ParamPath::DeltaOmega0,
                min: 0.0,
                max: 2.0,
                count: 3,
                scale: AxisScale::Linear,
            }],
        };
        let out = run_sweep(&spec).unwrap();
        for (record, omega) in out.records.iter().zip([0.0, 1.0, 2.0]) {
            let mut sc = fast_baseline();
            sc.hom.delta_omega0 = omega;
            let direct = sc.evaluate().unwrap();
            // the sweep plans its grids for the worst point of the axis,
            // so the two routes agree only to quadrature accuracy
            assert_abs_diff_eq!(
                record.scalars.unwrap().g2hom_normalized,
                direct.result.g2hom_normalized,
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn failed_points_keep_their_slot() {
        let spec = SweepSpec {
            scenario: fast_baseline(),
            axes: vec![SweepAxis {
                path: ParamPath::Emitter2Gamma,
                min: -1.0,
                max: 1.0,
                count: 3,
                scale: AxisScale::Linear,
            }],
        };
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.failed, 2);
        assert!(out.records[0].error.is_some() && out.records[0].scalars.is_none());
        assert!(out.records[1].error.is_some());
        let good = &out.records[2];
        assert!(good.error.is_none());
        assert_abs_diff_eq!(
            good.scalars.unwrap().g2hom_normalized,
            0.008,
            epsilon = 3e-3
        );
    }

    #[test]
    fn sweep_results_round_trip_through_json() {
        let spec = SweepSpec {
            scenario: fast_baseline(),
            axes: vec![SweepAxis {
                path: ParamPath::Phi,
                min: 0.0,
                max: std::f64::consts::FRAC_PI_2,
                count: 2,
                scale: AxisScale::Linear,
            }],
        };
        let out = run_sweep(&spec).unwrap();
        let json = serde_json::to_string(&out).unwrap();
        let back: SweepResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.records, out.records);
        assert_eq!(back.spec, out.spec);
        // crossed polarization turns interference off exactly
        assert_eq!(out.records[1].scalars.unwrap().g2hom_normalized, 0.5);
    }

    #[test]
    fn simulated_detuning_threshold_matches_the_ideal_inversion() {
        // ideal emitters cross g2 = 0.25 at a frequency difference equal
        // to the mean decay rate; re-excitation barely moves it
        let thr = find_threshold(
            &fast_baseline(),
            ParamPath::DeltaOmega0,
            (0.0, 30.0),
            0.25,
        )
        .unwrap();
        assert_abs_diff_eq!(thr, 1.0, epsilon = 0.05);
    }

    #[test]
    fn unreachable_threshold_reports_the_span() {
        let err = find_threshold(
            &fast_baseline(),
            ParamPath::GammaRatio,
            (1.0, 100.0),
            0.49,
        )
        .unwrap_err();
        match err {
            Error::NoBracket { axis, lo, hi } => {
                assert_eq!(axis, "gamma_ratio");
                assert_eq!((lo, hi), (1.0, 100.0));
            }
            other => panic!("expected NoBracket, got {other:?}"),
        }
        assert!(find_threshold(&fast_baseline(), ParamPath::Phi, (0.0, 1.0), 0.6).is_err());
    }
}
