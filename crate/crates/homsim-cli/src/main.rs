//! Command-line front end for the two-emitter interference simulator.
//!
//! Exit codes: 0 success, 2 invalid configuration or arguments, 3
//! numerical failure, 4 output failure or a run whose points partially
//! failed (the partial results are still written).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use homsim_core::config::{self, ConfigOverrides, Dimension, LoadedConfig};
use homsim_core::output::{self, OutputFormat, PlotCurve};
use homsim_core::scenario::{Evaluation, Precision, Scenario};
use homsim_core::sweep::{self, SweepSpec};
use homsim_core::units::{parse_time_s, HzConvention, UnitScale};
use homsim_core::{hom, systems, Error, Result};

mod figures;

#[derive(Parser)]
#[command(
    name = "homsim",
    version,
    about = "Two-photon interference observables for a pair of dissimilar pulsed emitters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML; see README for the schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// File formats to write: csv, json or both.
    #[arg(long, global = true, default_value = "both")]
    format: String,

    /// Numerical effort: fast, default or high. Overrides the config.
    #[arg(long, global = true)]
    precision: Option<String>,

    /// Worker threads; defaults to all cores. Points of a sweep run in
    /// parallel, one task per point.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Histogram bin width for binned time-resolved output. A plain
    /// number is in scaled units; "16 ps" style needs physical units in
    /// play (always the case for fig2, which defaults to 16 ps).
    #[arg(long = "bin-width", global = true)]
    bin_width: Option<String>,

    /// How to read frequency strings: "angular" (rad/s; 4 GHz matches a
    /// 250 ps lifetime) or "cycles" (multiplied by 2 pi).
    #[arg(long = "hz-convention", global = true)]
    hz_convention: Option<String>,

    /// Replacement table of real-system lifetimes for fig7 (TOML, same
    /// layout as the bundled one).
    #[arg(long, global = true)]
    systems: Option<PathBuf>,

    /// Reserved. The model has no stochastic components; every run is
    /// deterministic with or without this flag.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one scenario and write its observables and curves.
    Point,
    /// Run the parameter sweep from the config's [sweep] section.
    Sweep,
    /// Find where the pulse-wise floor crosses a target along one
    /// parameter, from the config's [threshold] section.
    Threshold,
    /// Reproduce a preset study end to end.
    Figure {
        /// One of fig2, fig3, fig4, fig5, fig6a, fig6b, fig7.
        id: String,
    },
    /// Largest tolerated mismatch per axis and target, on the full
    /// simulator.
    Table1,
    /// The same table in the analytic single-photon limit; with --config,
    /// also the ideal floor of that scenario. Instant.
    Oracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("could not size the worker pool: {e}")))?;
    }
    let format: OutputFormat = cli.format.parse()?;
    let overrides = ConfigOverrides {
        precision: cli
            .precision
            .as_deref()
            .map(Precision::from_str)
            .transpose()?,
        hz_convention: cli
            .hz_convention
            .as_deref()
            .map(HzConvention::from_str)
            .transpose()?,
    };

    match &cli.command {
        Command::Point => cmd_point(&cli, format, &overrides),
        Command::Sweep => cmd_sweep(&cli, format, &overrides),
        Command::Threshold => cmd_threshold(&cli, format, &overrides),
        Command::Figure { id } => cmd_figure(&cli, id, format, &overrides),
        Command::Table1 => {
            let precision = overrides.precision.unwrap_or_default();
            finish(figures::table1(&cli.out, format, precision)?)
        }
        Command::Oracle => cmd_oracle(&cli, format, &overrides),
    }
}

fn load(cli: &Cli, overrides: &ConfigOverrides) -> Result<LoadedConfig> {
    match &cli.config {
        Some(path) => config::load_config(path, overrides),
        None => Ok(LoadedConfig {
            scenario: Scenario {
                precision: overrides.precision.unwrap_or_default(),
                ..Scenario::default()
            },
            sweep_axes: None,
            threshold: None,
            scale: None,
            hz_convention: overrides.hz_convention.unwrap_or_default(),
        }),
    }
}

fn finish(art: figures::Artifacts) -> Result<u8> {
    for f in &art.files {
        println!("wrote {}", f.display());
    }
    if art.failed > 0 {
        eprintln!("{} point(s) failed; partial results written", art.failed);
        Ok(4)
    } else {
        Ok(0)
    }
}

/// Bin width in scaled units: plain numbers pass through, unit strings
/// need an anchored scale.
fn bin_width_scaled(text: &str, scale: Option<&UnitScale>) -> Result<f64> {
    if let Ok(v) = text.parse::<f64>() {
        return Ok(v);
    }
    let seconds = parse_time_s(text)?;
    scale
        .map(|sc| sc.time_in(seconds))
        .ok_or_else(|| {
            Error::Config(format!(
                "bin width {text:?} carries physical units, but the config has no \
                 physical anchor; give a plain number in scaled units"
            ))
        })
}

fn cmd_point(cli: &Cli, format: OutputFormat, overrides: &ConfigOverrides) -> Result<u8> {
    let cfg = load(cli, overrides)?;
    let eval = cfg.scenario.evaluate()?;
    print_point(&eval);

    let mut files = Vec::new();
    if format.wants_json() {
        std::fs::create_dir_all(&cli.out)?;
        let path = cli.out.join("point.json");
        let mut text = serde_json::to_string_pretty(&eval)?;
        text.push('\n');
        output::write_atomic(&path, text.as_bytes())?;
        files.push(path);
    }
    if format.wants_csv() {
        let r = &eval.result;
        let mut x = Vec::with_capacity(2 * r.tau_nodes.len() - 1);
        let mut y = Vec::with_capacity(x.capacity());
        for i in (1..r.tau_nodes.len()).rev() {
            x.push(-r.tau_nodes[i]);
            y.push(r.g2hom_tau[i]);
        }
        x.extend_from_slice(&r.tau_nodes);
        y.extend_from_slice(&r.g2hom_tau);
        let mut curves = vec![PlotCurve::new(
            "tau",
            "tau (1/gamma1)",
            "G2HOM(tau) (gamma1)",
            x,
            y,
        )];
        if let Some(text) = &cli.bin_width {
            let width = bin_width_scaled(text, cfg.scale.as_ref())?;
            let (centers, counts) = hom::bin_histogram(r, width)?;
            curves.push(PlotCurve::new(
                "binned",
                "tau (1/gamma1)",
                "coincidences per bin",
                centers,
                counts,
            ));
        }
        files.extend(output::write_curves(&cli.out, "point", &curves)?);
    }
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(0)
}

fn print_point(eval: &Evaluation) {
    let r = &eval.result;
    println!("g2hom_pulsewise   = {:.6e}", r.g2hom_pulsewise);
    println!("g2hom_normalized  = {:.6e}", r.g2hom_normalized);
    println!("n_p               = {:.6e}", r.n_p);
    println!("n_1               = {:.6e}", r.n_1);
    println!("n_2               = {:.6e}", r.n_2);
    println!("autocorrelation   = {:.6e}", r.breakdown.autocorrelation);
    println!("intensity         = {:.6e}", r.breakdown.intensity);
    println!("interference      = {:.6e}", r.breakdown.interference);
    println!(
        "grid              = {} x {} nodes",
        eval.grid.n_time, eval.grid.n_delay
    );
}

fn cmd_sweep(cli: &Cli, format: OutputFormat, overrides: &ConfigOverrides) -> Result<u8> {
    let cfg = load(cli, overrides)?;
    let axes = cfg.sweep_axes.ok_or_else(|| {
        Error::Config("sweep needs a config with a [sweep] section".into())
    })?;
    let spec = SweepSpec {
        scenario: cfg.scenario,
        axes,
    };
    let result = sweep::run_sweep(&spec)?;
    println!(
        "{} points, {} failed, {:.1} s",
        result.records.len(),
        result.failed,
        result.elapsed.as_secs_f64()
    );
    let files = output::write_sweep(&cli.out, "sweep", &result, format)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    if result.failed > 0 {
        eprintln!("{} point(s) failed; partial results written", result.failed);
        Ok(4)
    } else {
        Ok(0)
    }
}

fn cmd_threshold(cli: &Cli, format: OutputFormat, overrides: &ConfigOverrides) -> Result<u8> {
    let cfg = load(cli, overrides)?;
    let th = cfg.threshold.ok_or_else(|| {
        Error::Config("threshold needs a config with a [threshold] section".into())
    })?;
    let value = sweep::find_threshold(&cfg.scenario, th.path, (th.min, th.max), th.target)?;
    println!(
        "{} crosses g2HOM(0) = {} at {value:.6}",
        th.path, th.target
    );
    if let Some(scale) = &cfg.scale {
        match config::dimension(th.path) {
            Dimension::Time => println!("                  = {:.6e} s", scale.time_out(value)),
            Dimension::Frequency => {
                println!("                  = {:.6e} rad/s", scale.rate_out(value))
            }
            Dimension::Bare => {}
        }
    }
    let cell = figures::ThresholdCell {
        axis: th.path.name().into(),
        target: th.target,
        value: Some(value),
        error: None,
    };
    let files = figures::write_threshold_cells(&cli.out, "threshold", &[cell], format)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(0)
}

fn cmd_figure(
    cli: &Cli,
    id: &str,
    format: OutputFormat,
    overrides: &ConfigOverrides,
) -> Result<u8> {
    let precision = overrides.precision.unwrap_or_default();
    let art = match id {
        "fig2" => {
            let width_s = match &cli.bin_width {
                Some(text) => parse_time_s(text)?,
                None => 16e-12,
            };
            figures::fig2(&cli.out, format, precision, width_s)?
        }
        "fig3" => figures::fig3(&cli.out, format, precision)?,
        "fig4" => figures::fig4(&cli.out, format, precision)?,
        "fig5" => figures::fig5(&cli.out, format, precision)?,
        "fig6a" => figures::fig6a(&cli.out, format, precision)?,
        "fig6b" => figures::fig6b(&cli.out, format, precision)?,
        "fig7" => {
            let table = match &cli.systems {
                Some(path) => systems::load_systems(path)?,
                None => systems::builtin_systems(),
            };
            figures::fig7(&cli.out, format, precision, &table)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown figure {other:?}, expected one of fig2, fig3, fig4, fig5, fig6a, fig6b, fig7"
            )))
        }
    };
    finish(art)
}

fn cmd_oracle(cli: &Cli, format: OutputFormat, overrides: &ConfigOverrides) -> Result<u8> {
    if cli.config.is_some() {
        let cfg = load(cli, overrides)?;
        let ideal = figures::oracle_point(&cfg.scenario)?;
        println!("ideal g2HOM(0)    = {ideal:.6e}");
        println!();
    }
    finish(figures::oracle_table(&cli.out, format)?)
}
