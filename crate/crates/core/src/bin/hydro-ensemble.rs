use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hydro_ensemble::experiment::runner::{discover_catchments, load_catchment};
use hydro_ensemble::experiment::synthetic::batch_specs;
use hydro_ensemble::experiment::{
    emit_reports, generate_synthetic, reaggregate, run_experiment, ExperimentConfig, SyntheticSpec,
};
use hydro_ensemble::timeseries::validate_series;
use hydro_ensemble::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_NO_CATCHMENTS: u8 = 2;

#[derive(Parser)]
#[command(
    name = "hydro-ensemble",
    version,
    about = "Ensemble post-processing of monthly streamflow predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that catchment files parse and aggregate cleanly.
    Ingest(ExperimentArgs),
    /// Write synthetic catchments with known parameters.
    Synth(SynthArgs),
    /// Run the full experiment and write reports.
    Run(ExperimentArgs),
    /// Rebuild summary.json and rankings.csv from a metrics.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding one <id>.csv per catchment.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override any configuration key, e.g. --set m=100 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value = "synth")]
    prefix: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 600)]
    months: usize,
    #[arg(long, default_value_t = 1950)]
    start_year: i32,
    #[arg(long, default_value_t = 400.0)]
    theta1: f64,
    #[arg(long, default_value_t = 0.9)]
    theta2: f64,
    /// Noise standard deviation as a fraction of flow.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Additive noise standard deviation, mm/month.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    metrics: PathBuf,
    /// Output directory (defaults to the directory of the metrics file).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut problems = Vec::new();
    for o in &args.overrides {
        match o.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = cfg.set(k, v) {
                    problems.push(format!("--set {o}: {e}"));
                }
            }
            None => problems.push(format!("--set {o}: expected KEY=VALUE")),
        }
    }
    if let Some(p) = &args.input {
        cfg.input_dir = p.clone();
    }
    if let Some(p) = &args.out {
        cfg.output_dir = p.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Err(Error::Config(more)) = cfg.validate() {
        problems.extend(more);
    }
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(problems))
    }
}

fn report_error(e: &Error) -> ExitCode {
    match e {
        Error::Config(problems) => {
            eprintln!("configuration error:");
            for p in problems {
                eprintln!("  {p}");
            }
        }
        other => eprintln!("error: {other}"),
    }
    ExitCode::from(EXIT_CONFIG)
}

fn ingest(args: &ExperimentArgs) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    let catchments = match discover_catchments(&cfg) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    let mut valid = 0;
    for (id, path) in &catchments {
        match load_catchment(path) {
            Ok(series) => {
                let r = validate_series(&series);
                valid += 1;
                println!(
                    "{id}: ok, {} months from {}-{:02}, zero-flow months {}",
                    series.len(),
                    series.origin.year,
                    series.origin.month,
                    r.streamflow.zeros
                );
            }
            Err(e) => println!("{id}: rejected: {e}"),
        }
    }
    println!("{valid} of {} catchments valid", catchments.len());
    if valid == 0 {
        ExitCode::from(EXIT_NO_CATCHMENTS)
    } else {
        ExitCode::SUCCESS
    }
}

fn synth(args: &SynthArgs) -> ExitCode {
    let base = SyntheticSpec {
        theta1: args.theta1,
        theta2: args.theta2,
        start_year: args.start_year,
        months: args.months,
        seed: args.seed,
        noise_relative: args.noise,
        noise_floor: args.floor,
        ..SyntheticSpec::default()
    };
    for spec in batch_specs(&base, &args.prefix, args.count) {
        match generate_synthetic(&spec, &args.out) {
            Ok(path) => println!("wrote {}", path.display()),
            Err(e) => return report_error(&e),
        }
    }
    ExitCode::SUCCESS
}

fn run(args: &ExperimentArgs) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    for f in &outcome.failures {
        eprintln!("{}: failed during {}: {}", f.catchment, f.stage, f.message);
    }
    if outcome.results.is_empty() {
        eprintln!("no catchment could be processed");
        return ExitCode::from(EXIT_NO_CATCHMENTS);
    }
    if let Err(e) = emit_reports(&outcome, &cfg.output_dir).and_then(|_| cfg.save(&cfg.output_dir.join("config.txt"))) {
        return report_error(&e);
    }
    println!(
        "{} catchments scored, {} failed; reports in {}",
        outcome.results.len(),
        outcome.failures.len(),
        cfg.output_dir.display()
    );
    ExitCode::SUCCESS
}

fn report(args: &ReportArgs) -> ExitCode {
    let out = args
        .out
        .clone()
        .or_else(|| args.metrics.parent().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match reaggregate(&args.metrics, &out) {
        Ok(summary) => {
            println!(
                "{} summary rows for {} catchments written to {}",
                summary.rows.len(),
                summary.catchments.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    }
}
