//! Preset studies behind the `figure`, `table1` and `oracle` subcommands.
//!
//! Each preset fixes every parameter of a published-style study and emits
//! plot-ready files: two-column CSV per curve, a JSON bundle of all
//! curves, and for sweep-based studies the full record table. The presets
//! work in scaled units (emitter 1 decays at rate 1) except where a study
//! is defined by physical numbers, in which case the axis labels carry
//! the SI unit.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use homsim_core::hom;
use homsim_core::oracle::{self, IdealParams, OracleAxis};
use homsim_core::output::{self, OutputFormat, PlotCurve};
use homsim_core::scenario::{Precision, Scenario};
use homsim_core::sweep::{self, AxisScale, ParamPath, RunRecord, SweepAxis, SweepSpec};
use homsim_core::systems::{RealSystem, SystemsReport};
use homsim_core::tls::PulseSpec;
use homsim_core::{systems, Error, Result};

/// What a preset produced and how many of its points failed.
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub failed: usize,
}

impl Artifacts {
    fn ok(files: Vec<PathBuf>) -> Self {
        Artifacts { files, failed: 0 }
    }
}

fn base(precision: Precision) -> Scenario {
    Scenario {
        precision,
        ..Scenario::default()
    }
}

/// Write curves as CSV files and/or one JSON bundle under a shared stem.
fn emit(
    out: &Path,
    stem: &str,
    curves: &[PlotCurve],
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    if format.wants_csv() {
        files.extend(output::write_curves(out, stem, curves)?);
    }
    if format.wants_json() {
        fs::create_dir_all(out)?;
        let path = out.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(curves)?;
        text.push('\n');
        output::write_atomic(&path, text.as_bytes())?;
        files.push(path);
    }
    Ok(files)
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    output::write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Reflect a tau >= 0 curve onto the negative axis (detector exchange
/// makes the full curve symmetric).
fn mirrored(taus: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = taus.len();
    let mut x = Vec::with_capacity(2 * n - 1);
    let mut y = Vec::with_capacity(2 * n - 1);
    for i in (1..n).rev() {
        x.push(-taus[i]);
        y.push(values[i]);
    }
    x.extend_from_slice(taus);
    y.extend_from_slice(values);
    (x, y)
}

fn scalar_of(rec: &RunRecord) -> f64 {
    rec.scalars
        .as_ref()
        .map(|s| s.g2hom_normalized)
        .unwrap_or(f64::NAN)
}

/// For a row-major two-axis sweep, the outer-axis value minimizing the
/// observable in inner column `j`.
fn column_argmin(records: &[RunRecord], n_inner: usize, j: usize, outer: &[f64]) -> (f64, f64) {
    let mut best = (outer[0], f64::INFINITY);
    for (i, &x) in outer.iter().enumerate() {
        let g = scalar_of(&records[i * n_inner + j]);
        if g < best.1 {
            best = (x, g);
        }
    }
    best
}

/// Time-resolved coincidence histograms for identical emitters of several
/// lifetimes under a fixed 5 ps pulse, both raw and binned the way a
/// detector with finite timing resolution would record them.
pub fn fig2(
    out: &Path,
    format: OutputFormat,
    precision: Precision,
    bin_width_s: f64,
) -> Result<Artifacts> {
    const LIFETIMES_PS: [f64; 4] = [50.0, 100.0, 200.0, 400.0];
    const PULSE_S: f64 = 5e-12;

    let mut curves = Vec::new();
    for life_ps in LIFETIMES_PS {
        let tau_s = life_ps * 1e-12;
        let mut sc = base(precision);
        sc.pulse = PulseSpec::pi_pulse(PULSE_S / tau_s);
        let result = sc.evaluate()?.result;

        let (x, y) = mirrored(&result.tau_nodes, &result.g2hom_tau);
        curves.push(PlotCurve::new(
            format!("lifetime {life_ps:.0} ps"),
            "tau (ps)",
            "G2HOM(tau) (1/ps)",
            x.iter().map(|v| v * life_ps).collect(),
            y.iter().map(|v| v / life_ps).collect(),
        ));

        let (centers, counts) = hom::bin_histogram(&result, bin_width_s / tau_s)?;
        curves.push(PlotCurve::new(
            format!("lifetime {life_ps:.0} ps binned"),
            "tau (ps)",
            "coincidences per bin",
            centers.iter().map(|v| v * life_ps).collect(),
            counts,
        ));
    }
    Ok(Artifacts::ok(emit(out, "fig2", &curves, format)?))
}

/// Decay-ratio times detuning map of the pulse-wise coincidence floor,
/// plus the ridge of ratios that minimize it at each detuning.
pub fn fig3(out: &Path, format: OutputFormat, precision: Precision) -> Result<Artifacts> {
    let spec = SweepSpec {
        scenario: base(precision),
        axes: vec![
            SweepAxis {
                path: ParamPath::GammaRatio,
                min: 0.2,
                max: 10.0,
                count: 25,
                scale: AxisScale::Log,
            },
            SweepAxis {
                path: ParamPath::DeltaOmega0,
                min: -3.0,
                max: 3.0,
                count: 31,
                scale: AxisScale::Linear,
            },
        ],
    };
    let result = sweep::run_sweep(&spec)?;
    let mut files = output::write_sweep(out, "fig3", &result, format)?;

    let ratios = spec.axes[0].values();
    let dets = spec.axes[1].values();
    let mut x = Vec::with_capacity(dets.len());
    let mut y = Vec::with_capacity(dets.len());
    for (j, &d) in dets.iter().enumerate() {
        let (ratio, _) = column_argmin(&result.records, dets.len(), j, &ratios);
        x.push(d);
        y.push(ratio);
    }
    let ridge = PlotCurve::new(
        "optimal ratio",
        "detuning (gamma1)",
        "gamma2/gamma1 at minimum",
        x,
        y,
    );
    files.extend(emit(out, "fig3-ridge", &[ridge], format)?);
    Ok(Artifacts {
        files,
        failed: result.failed,
    })
}

/// Pulse-wise coincidence floor versus arrival-time delay for four
/// emitter pairings: identical, lifetime-mismatched, detuned, and both.
pub fn fig4(out: &Path, format: OutputFormat, precision: Precision) -> Result<Artifacts> {
    const CASES: [(&str, f64, f64); 4] = [
        ("identical", 1.0, 0.0),
        ("lifetime mismatch", 0.5, 0.0),
        ("detuned", 1.0, 1.0),
        ("both", 0.5, 1.0),
    ];
    let axis = SweepAxis {
        path: ParamPath::DeltaTau,
        min: -5.0,
        max: 5.0,
        count: 41,
        scale: AxisScale::Linear,
    };

    let mut curves = Vec::new();
    let mut failed = 0;
    for (name, ratio, det) in CASES {
        let mut sc = base(precision);
        sc.emitter2.gamma = ratio;
        sc.hom.delta_omega0 = det;
        let spec = SweepSpec {
            scenario: sc,
            axes: vec![axis],
        };
        let result = sweep::run_sweep(&spec)?;
        failed += result.failed;
        curves.push(PlotCurve::new(
            name,
            "delay (1/gamma1)",
            "g2HOM(0)",
            axis.values(),
            result.records.iter().map(scalar_of).collect(),
        ));
    }
    let files = emit(out, "fig4", &curves, format)?;
    Ok(Artifacts { files, failed })
}

/// Pure dephasing in emitter 1: one dataset over decay-rate ratios at zero
/// detuning, one over detunings at equal rates, and the locus of dephasing
/// rates that minimize the floor at each detuning.
pub fn fig5(out: &Path, format: OutputFormat, precision: Precision) -> Result<Artifacts> {
    let deph_axis = SweepAxis {
        path: ParamPath::Emitter1GammaDeph,
        min: 0.0,
        max: 8.0,
        count: 33,
        scale: AxisScale::Linear,
    };
    let mut files = Vec::new();
    let mut failed = 0;

    let mut curves_a = Vec::new();
    for ratio in [1.0, 2.0, 5.0, 10.0] {
        let mut sc = base(precision);
        sc.emitter2.gamma = ratio;
        let spec = SweepSpec {
            scenario: sc,
            axes: vec![deph_axis],
        };
        let result = sweep::run_sweep(&spec)?;
        failed += result.failed;
        curves_a.push(PlotCurve::new(
            format!("ratio {ratio}"),
            "gamma_deph1 (gamma1)",
            "g2HOM(0)",
            deph_axis.values(),
            result.records.iter().map(scalar_of).collect(),
        ));
    }
    files.extend(emit(out, "fig5a", &curves_a, format)?);

    let spec = SweepSpec {
        scenario: base(precision),
        axes: vec![
            deph_axis,
            SweepAxis {
                path: ParamPath::DeltaOmega0,
                min: 0.0,
                max: 3.0,
                count: 7,
                scale: AxisScale::Linear,
            },
        ],
    };
    let result = sweep::run_sweep(&spec)?;
    failed += result.failed;
    let dephs = spec.axes[0].values();
    let dets = spec.axes[1].values();

    let mut curves_b = Vec::new();
    for (j, &d) in dets.iter().enumerate() {
        curves_b.push(PlotCurve::new(
            format!("detuning {d}"),
            "gamma_deph1 (gamma1)",
            "g2HOM(0)",
            dephs.clone(),
            (0..dephs.len())
                .map(|i| scalar_of(&result.records[i * dets.len() + j]))
                .collect(),
        ));
    }
    let mut opt = Vec::with_capacity(dets.len());
    for (j, &d) in dets.iter().enumerate() {
        let (deph, _) = column_argmin(&result.records, dets.len(), j, &dephs);
        opt.push((d, deph));
    }
    curves_b.push(PlotCurve::new(
        "optimal dephasing",
        "detuning (gamma1)",
        "gamma_deph1 at minimum",
        opt.iter().map(|p| p.0).collect(),
        opt.iter().map(|p| p.1).collect(),
    ));
    files.extend(emit(out, "fig5b", &curves_b, format)?);
    Ok(Artifacts { files, failed })
}

/// Quantum beats of a strongly detuned pair washing out as one emitter's
/// frequency wanders with growing width.
pub fn fig6a(out: &Path, format: OutputFormat, precision: Precision) -> Result<Artifacts> {
    let mut sc = base(precision);
    sc.hom.delta_omega0 = 20.0;
    sc.validate()?;
    let (c1, c2) = sc.correlators()?;

    let mut curves = Vec::new();
    for fwhm in [0.0, 1.0, 5.0, 20.0] {
        let mut point = sc.clone();
        point.emitter1.wander_fwhm = fwhm;
        let result = point.evaluate_with(&c1, &c2)?.result;
        let (x, y) = mirrored(&result.tau_nodes, &result.g2hom_tau);
        curves.push(PlotCurve::new(
            format!("wander fwhm {fwhm} gamma"),
            "tau (1/gamma)",
            "G2HOM(tau) (gamma)",
            x,
            y,
        ));
    }
    Ok(Artifacts::ok(emit(out, "fig6a", &curves, format)?))
}

/// Pulse-wise floor versus the wandering width of emitter 2 at several
/// detunings, with the width that minimizes the floor at each detuning.
pub fn fig6b(out: &Path, format: OutputFormat, precision: Precision) -> Result<Artifacts> {
    let spec = SweepSpec {
        scenario: base(precision),
        axes: vec![
            SweepAxis {
                path: ParamPath::Emitter2WanderFwhm,
                min: 0.0,
                max: 10.0,
                count: 41,
                scale: AxisScale::Linear,
            },
            SweepAxis {
                path: ParamPath::DeltaOmega0,
                min: 0.0,
                max: 3.0,
                count: 7,
                scale: AxisScale::Linear,
            },
        ],
    };
    let result = sweep::run_sweep(&spec)?;
    let fwhms = spec.axes[0].values();
    let dets = spec.axes[1].values();

    let mut curves = Vec::new();
    for (j, &d) in dets.iter().enumerate() {
        curves.push(PlotCurve::new(
            format!("detuning {d}"),
            "wander fwhm (gamma)",
            "g2HOM(0)",
            fwhms.clone(),
            (0..fwhms.len())
                .map(|i| scalar_of(&result.records[i * dets.len() + j]))
                .collect(),
        ));
    }
    let mut opt = Vec::with_capacity(dets.len());
    for (j, &d) in dets.iter().enumerate() {
        let (fwhm, _) = column_argmin(&result.records, dets.len(), j, &fwhms);
        opt.push((d, fwhm));
    }
    curves.push(PlotCurve::new(
        "optimal width",
        "detuning (gamma)",
        "wander fwhm at minimum",
        opt.iter().map(|p| p.0).collect(),
        opt.iter().map(|p| p.1).collect(),
    ));
    let files = emit(out, "fig6b", &curves, format)?;
    Ok(Artifacts {
        files,
        failed: result.failed,
    })
}

/// Hybrid pairings of real platforms: the floor versus the partner's
/// lifetime for two reference emitters, with preset systems marked.
pub fn fig7(
    out: &Path,
    format: OutputFormat,
    precision: Precision,
    systems: &[RealSystem],
) -> Result<Artifacts> {
    const COUNT: usize = 41;
    const PULSE_S: f64 = 10e-12;
    let report_a =
        systems::real_systems_report(250e-12, &[0.0, 2e9, 4e9, 6e9], PULSE_S, COUNT, systems, precision)?;
    let report_b = systems::real_systems_report(2e-9, &[0.0], PULSE_S, COUNT, systems, precision)?;

    let mut files = Vec::new();
    let mut curves = Vec::new();
    for (report, anchor) in [(&report_a, "250 ps"), (&report_b, "2 ns")] {
        let x: Vec<f64> = report.lifetimes2_s.iter().map(|s| s * 1e9).collect();
        for curve in &report.curves {
            curves.push(PlotCurve::new(
                format!("anchor {anchor} detuning {} GHz", curve.detuning_rad_s / 1e9),
                "lifetime2 (ns)",
                "g2HOM(0)",
                x.clone(),
                curve.g2.clone(),
            ));
        }
    }
    files.extend(emit(out, "fig7", &curves, format)?);
    if format.wants_csv() {
        files.push(write_marks(out, "fig7-marks-250ps.csv", &report_a)?);
        files.push(write_marks(out, "fig7-marks-2ns.csv", &report_b)?);
    }
    if format.wants_json() {
        files.push(write_json(out, "fig7-report-250ps.json", &report_a)?);
        files.push(write_json(out, "fig7-report-2ns.json", &report_b)?);
    }
    Ok(Artifacts::ok(files))
}

fn write_marks(out: &Path, name: &str, report: &SystemsReport) -> Result<PathBuf> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["system".to_string(), "lifetime_ns".to_string()];
    header.extend(
        report
            .curves
            .iter()
            .map(|c| format!("g2_at_{}_GHz", c.detuning_rad_s / 1e9)),
    );
    wtr.write_record(&header)?;
    for mark in &report.marks {
        let mut row = vec![mark.name.clone(), format!("{:.6e}", mark.lifetime_s * 1e9)];
        row.extend(mark.g2.iter().map(|g| format!("{g:.6e}")));
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    fs::create_dir_all(out)?;
    let path = out.join(name);
    output::write_atomic(&path, &bytes)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCell {
    pub axis: String,
    pub target: f64,
    pub value: Option<f64>,
    pub error: Option<String>,
}

pub const TABLE1_TARGETS: [f64; 3] = [0.1, 0.2, 0.3];
pub const TABLE1_AXES: [(ParamPath, f64, f64); 5] = [
    (ParamPath::GammaRatio, 1.0, 50.0),
    (ParamPath::DeltaOmega0, 0.0, 5.0),
    (ParamPath::DeltaTau, 0.0, 5.0),
    (ParamPath::GammaDephSum, 0.0, 10.0),
    (ParamPath::WanderFwhmCombined, 0.0, 20.0),
];

/// Largest mismatch on each axis that still keeps the pulse-wise floor
/// under each target, searched on the full simulator.
pub fn table1(out: &Path, format: OutputFormat, precision: Precision) -> Result<Artifacts> {
    let sc = base(precision);
    let cells: Vec<ThresholdCell> = TABLE1_AXES
        .par_iter()
        .flat_map(|&(path, lo, hi)| {
            TABLE1_TARGETS
                .par_iter()
                .map(move |&target| (path, lo, hi, target))
        })
        .map(|(path, lo, hi, target)| {
            match sweep::find_threshold(&sc, path, (lo, hi), target) {
                Ok(value) => ThresholdCell {
                    axis: path.name().into(),
                    target,
                    value: Some(value),
                    error: None,
                },
                Err(e) => ThresholdCell {
                    axis: path.name().into(),
                    target,
                    value: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    print_threshold_table(&cells);
    let files = write_threshold_cells(out, "table1", &cells, format)?;
    let failed = cells.iter().filter(|c| c.value.is_none()).count();
    Ok(Artifacts { files, failed })
}

/// The same table in the zero-re-excitation single-photon limit, from the
/// closed-form overlap integrals. Instant; useful as a cross-check.
pub fn oracle_table(out: &Path, format: OutputFormat) -> Result<Artifacts> {
    const AXES: [(OracleAxis, &str); 5] = [
        (OracleAxis::GammaRatio, "gamma_ratio"),
        (OracleAxis::DeltaOmega, "delta_omega0"),
        (OracleAxis::DeltaTau, "delta_tau"),
        (OracleAxis::GammaDeph, "gamma_deph_sum"),
        (OracleAxis::WanderFwhm, "wandering.fwhm_combined"),
    ];
    let mut cells = Vec::new();
    for (axis, name) in AXES {
        for target in TABLE1_TARGETS {
            let cell = match oracle::ideal_threshold(axis, target) {
                Ok(value) => ThresholdCell {
                    axis: name.into(),
                    target,
                    value: Some(value),
                    error: None,
                },
                Err(e) => ThresholdCell {
                    axis: name.into(),
                    target,
                    value: None,
                    error: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
    }
    print_threshold_table(&cells);
    let files = write_threshold_cells(out, "oracle", &cells, format)?;
    let failed = cells.iter().filter(|c| c.value.is_none()).count();
    Ok(Artifacts { files, failed })
}

/// Ideal-limit floor for a configured scenario, for comparison against a
/// `point` run.
pub fn oracle_point(sc: &Scenario) -> Result<f64> {
    let params = IdealParams {
        gamma1: sc.emitter1.gamma,
        gamma2: sc.emitter2.gamma,
        delta_omega: sc.hom.delta_omega0 + sc.emitter2.laser_detuning
            - sc.emitter1.laser_detuning,
        delta_tau: sc.hom.delta_tau,
        gamma_deph_total: sc.emitter1.gamma_deph + sc.emitter2.gamma_deph,
    };
    let fwhm = sc
        .emitter1
        .wander_fwhm
        .hypot(sc.emitter2.wander_fwhm);
    if fwhm > 0.0 {
        oracle::ideal_g2hom_wandering(&params, fwhm)
    } else {
        oracle::ideal_g2hom(&params)
    }
}

fn print_threshold_table(cells: &[ThresholdCell]) {
    let targets: Vec<f64> = {
        let mut t: Vec<f64> = cells.iter().map(|c| c.target).collect();
        t.dedup();
        t.truncate(TABLE1_TARGETS.len());
        t
    };
    print!("{:<24}", "axis");
    for t in &targets {
        print!("  g2 < {t:<6}");
    }
    println!();
    let mut i = 0;
    while i < cells.len() {
        print!("{:<24}", cells[i].axis);
        for _ in 0..targets.len() {
            match cells[i].value {
                Some(v) => print!("  {v:<11.4}"),
                None => print!("  {:<11}", "n/a"),
            }
            i += 1;
        }
        println!();
    }
}

pub fn write_threshold_cells(
    out: &Path,
    stem: &str,
    cells: &[ThresholdCell],
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    fs::create_dir_all(out)?;
    if format.wants_csv() {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["axis", "target", "value", "error"])?;
        for c in cells {
            wtr.write_record([
                c.axis.clone(),
                format!("{}", c.target),
                c.value.map(|v| format!("{v:.12e}")).unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let path = out.join(format!("{stem}.csv"));
        output::write_atomic(&path, &bytes)?;
        files.push(path);
    }
    if format.wants_json() {
        files.push(write_json(out, &format!("{stem}.json"), &cells)?);
    }
    Ok(files)
}
