//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::{evaluate_surface, EstimatorParams, PrecompContext, Variant};
use crate::harness::{
    default_exclusion_radius, extract_minima, parse_range, run_sweep, write_surface_csv, SweepAxis,
    DEFAULT_TRIALS,
};
use crate::scenario::{default_scenario, ScenarioConfig};
use crate::selftest::run_selftest;
use crate::synth::{read_batch, simulate, write_batch, ReceivedBatch};

#[derive(Debug, Parser)]
#[command(
    name = "ccdpd",
    version,
    about = "Direct position determination of wideband emitters"
)]
pub struct Cli {
    /// Worker threads for grid evaluation and trials.
    #[arg(long, global = true, env = "CCDP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a received batch and write it as a CCDP file.
    Synth(SynthArgs),
    /// Evaluate estimator cost surfaces and write them as CSV.
    Costmap(CostmapArgs),
    /// Monte Carlo RMSE sweep over SNR or bandwidth.
    Sweep(SweepArgs),
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON; missing keys fall back to the built-in scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the scenario's own.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// dpd, lost, target, ccdpd or all.
    #[arg(long)]
    pub estimator: Option<String>,
    /// ccDPD projector order.
    #[arg(long)]
    pub projector_order: Option<usize>,
    /// Run LOST with the full 35-tap stack.
    #[arg(long)]
    pub lost_full_scale: bool,
}

#[derive(Debug, Args)]
pub struct CostmapArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub estimators: EstimatorArgs,
    /// CCDP batch to process instead of simulating one.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output CSV; with `--estimator all` one file per estimator is written
    /// as `<stem>_<estimator>.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub estimators: EstimatorArgs,
    /// snr or bandwidth.
    #[arg(long)]
    pub axis: String,
    /// Inclusive range `start:stop:step` or a single value.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Write zeros in the wall-time column so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parse scenario JSON text. Keys absent from the text are taken from the
/// built-in scenario unless `"use_defaults": false` is given.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let mut doc: Value = if text.trim().is_empty() {
        Value::Object(Default::default())
    } else {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?
    };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("top level must be a JSON object".into()))?;
    let use_defaults = match obj.remove("use_defaults") {
        None => true,
        Some(Value::Bool(b)) => b,
        Some(_) => return Err(Error::Config("use_defaults: expected a boolean".into())),
    };
    let full = if use_defaults {
        let mut base = serde_json::to_value(default_scenario())?;
        merge(&mut base, doc);
        base
    } else {
        doc
    };
    let sc: ScenarioConfig = serde_path_to_error::deserialize(full)
        .map_err(|e| Error::Config(format!("key {}: {}", e.path(), e.inner())))?;
    sc.validate()?;
    Ok(sc)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn load_scenario(args: &ScenarioArgs) -> Result<(ScenarioConfig, u64)> {
    let sc = match &args.config {
        Some(p) => parse_config(p)?,
        None => default_scenario(),
    };
    let seed = args.seed.unwrap_or(sc.seed);
    Ok((sc, seed))
}

fn select_variants(flag: Option<&str>, default_all: bool) -> Result<Vec<Variant>> {
    match flag {
        None if default_all => Ok(Variant::ALL.to_vec()),
        None => Ok(vec![Variant::Ccdpd]),
        Some("all") => Ok(Variant::ALL.to_vec()),
        Some(name) => Ok(vec![name.parse()?]),
    }
}

fn build_params(
    sc: &ScenarioConfig,
    variants: &[Variant],
    args: &EstimatorArgs,
) -> Vec<EstimatorParams> {
    variants
        .iter()
        .map(|&v| {
            let mut p = if v == Variant::Lost && args.lost_full_scale {
                EstimatorParams::full_scale_lost(sc)
            } else {
                EstimatorParams::for_scenario(v, sc)
            };
            if let Some(n) = args.projector_order {
                p.projector_order = n;
            }
            p
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn per_estimator_path(out: &Path, v: Variant) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("costmap");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_{v}.{ext}"))
}

fn load_batch(sc: &ScenarioConfig, seed: u64, input: Option<&Path>) -> Result<ReceivedBatch> {
    match input {
        Some(path) => {
            let b = read_batch(BufReader::new(File::open(path)?))?;
            let geom = sc.geometry();
            if b.num_stations() != geom.num_stations() || b.num_elements() != geom.num_elements() {
                return Err(Error::validation(
                    "input",
                    format!(
                        "batch has {} stations × {} elements, scenario has {} × {}",
                        b.num_stations(),
                        b.num_elements(),
                        geom.num_stations(),
                        geom.num_elements()
                    ),
                ));
            }
            if b.f_s_hz != sc.f_s_hz || b.f_o_hz != sc.f_o_hz {
                return Err(Error::validation(
                    "input",
                    "sample rate or carrier differs from the scenario",
                ));
            }
            Ok(b)
        }
        // same precision as a batch that went through a file
        None => Ok(simulate(sc, seed)?.quantized()),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (sc, seed) = load_scenario(&args.scenario)?;
    let batch = simulate(&sc, seed)?;
    let mut w = create(&args.out)?;
    write_batch(&batch, &mut w)?;
    w.flush()?;
    println!(
        "wrote {} stations × {} elements × {} samples to {}",
        batch.num_stations(),
        batch.num_elements(),
        batch.num_samples(),
        args.out.display()
    );
    Ok(())
}

fn cmd_costmap(args: &CostmapArgs) -> Result<()> {
    let (sc, seed) = load_scenario(&args.scenario)?;
    let variants = select_variants(args.estimators.estimator.as_deref(), false)?;
    let params = build_params(&sc, &variants, &args.estimators);
    let batch = load_batch(&sc, seed, args.input.as_deref())?;
    let geom = sc.geometry();
    let radius = default_exclusion_radius(&sc);
    for p in &params {
        let ctx = PrecompContext::build(p, &batch, &geom)?;
        let surface = evaluate_surface(&ctx, &sc.grid)?;
        let path = if variants.len() == 1 {
            args.out.clone()
        } else {
            per_estimator_path(&args.out, p.variant)
        };
        let mut w = create(&path)?;
        write_surface_csv(&surface, &mut w)?;
        w.flush()?;
        println!(
            "{}: {} points to {}",
            p.variant,
            surface.len(),
            path.display()
        );
        if let Ok(peaks) = extract_minima(&surface, sc.sources.len(), radius) {
            for q in peaks {
                println!("  {} {}", q.x, q.y);
            }
        }
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let (sc, seed) = load_scenario(&args.scenario)?;
    let axis: SweepAxis = args.axis.parse()?;
    let values = parse_range(&args.values)?;
    let variants = select_variants(args.estimators.estimator.as_deref(), true)?;
    let params = build_params(&sc, &variants, &args.estimators);
    let table = run_sweep(&sc, axis, &values, args.trials, &params, seed)?;
    let mut w = create(&args.out)?;
    table.write_csv(&mut w, !args.no_timing)?;
    w.flush()?;
    println!(
        "{:<8} {:>14} {:>10} {:>10}",
        "est",
        axis.name(),
        "rmse_m",
        "median_m"
    );
    for r in &table.rows {
        println!(
            "{:<8} {:>14} {:>10.3} {:>10.3}",
            r.estimator, r.axis_value, r.rmse_m, r.median_m
        );
    }
    Ok(())
}

fn cmd_selftest() -> Result<bool> {
    let mut all = true;
    for c in run_selftest() {
        match &c.error {
            None => println!("PASS {}", c.name),
            Some(e) => {
                all = false;
                println!("FAIL {}: {e}", c.name);
            }
        }
    }
    Ok(all)
}

fn report(e: &Error) -> i32 {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("ERROR[{}]: {msg}", e.category());
    e.exit_code()
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("ERROR[usage]: {first}");
            return 1;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return report(&Error::validation("threads", "must be at least 1"));
        }
        // a pool may already exist when called in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let outcome = match &cli.command {
        Command::Synth(a) => cmd_synth(a).map(|_| true),
        Command::Costmap(a) => cmd_costmap(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => report(&e),
    }
}
