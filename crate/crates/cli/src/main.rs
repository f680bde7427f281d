use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distrl_core::config::{ExperimentConfig, KEYS};
use distrl_core::experiment;
use distrl_core::{Error, PathState};

/// Distributional quantile-TD pricing of capped arithmetic Asian calls.
///
/// Every configuration key can also be passed as a long flag of the same
/// name, e.g. `--market.s0 110` or `--train.payoff_cap=none`.
#[derive(Debug, Parser)]
#[command(name = "distrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo benchmark price and payoff sample.
    Benchmark(RunArgs),
    /// Train quantile heads and write the model and per-epoch diagnostics.
    Train(RunArgs),
    /// Price and quantiles of a saved model.
    Price(PriceArgs),
    /// Benchmark + training for every (s0, cap) cell of `table.grid`.
    Table(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file with `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides run.output_dir).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Base seed (overrides train.base_seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PriceArgs {
    /// Model file written by `train`.
    model: PathBuf,
    /// Spot of the queried state (defaults to the model's initial state).
    #[arg(long, requires_all = ["avg", "step"])]
    spot: Option<f64>,
    /// Running average of the queried state.
    #[arg(long, requires_all = ["spot", "step"])]
    avg: Option<f64>,
    /// Step index of the queried state.
    #[arg(long, requires_all = ["spot", "avg"])]
    step: Option<usize>,
    /// Also write price.csv and quantiles.csv here.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Rewrites `--section.key value` and `--section.key=value` into `--set section.key=value`.
fn expand_key_flags(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            out.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (flag, None),
        };
        if !KEYS.contains(&key) {
            out.push(arg);
            continue;
        }
        let key = key.to_string();
        match inline.or_else(|| it.next()) {
            Some(value) => {
                out.push("--set".into());
                out.push(format!("{key}={value}"));
            }
            None => out.push(arg),
        }
    }
    out
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Format { .. } => 1,
        Error::InvalidParameter { .. }
        | Error::OutOfRange { .. }
        | Error::Contract(_)
        | Error::InsufficientSample { .. } => 2,
        Error::Io { .. } => 3,
    }
}

fn resolve(args: &RunArgs) -> distrl_core::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for kv in &args.set {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = args.seed {
        cfg.train.base_seed = seed;
    }
    if let Some(dir) = &args.output {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> distrl_core::Result<()> {
    match cli.command {
        Command::Benchmark(args) => {
            let cfg = resolve(&args)?;
            let r = experiment::run_benchmark(&cfg, &cfg.output_dir)?;
            println!(
                "benchmark price {:.6} ± {:.6} (undiscounted expected payoff {:.6}, {} paths)",
                r.price, r.std_error, r.expected_payoff, r.n_paths
            );
            log::info!("wrote {}", cfg.output_dir.display());
        }
        Command::Train(args) => {
            let cfg = resolve(&args)?;
            let o = experiment::run_train(&cfg, &cfg.output_dir)?;
            let e = &o.evaluation;
            println!(
                "distrl price {:.6}, mc price {:.6} ± {:.6}, abs error {:.6}, w1 {:.6}, crossings {}",
                e.distrl_price, e.mc_price, o.benchmark.std_error, e.abs_error, e.w1, e.crossing_count
            );
            log::info!("wrote {}", cfg.output_dir.display());
        }
        Command::Price(args) => {
            let state = match (args.spot, args.avg, args.step) {
                (Some(spot), Some(running_avg), Some(step_index)) => Some(PathState {
                    spot,
                    running_avg,
                    step_index,
                }),
                _ => None,
            };
            let r = experiment::run_price(&args.model, state, args.output.as_deref())?;
            println!("price {:.6}", r.price);
            print!("{}", r.quantiles_csv());
        }
        Command::Table(args) => {
            let cfg = resolve(&args)?;
            let rows = experiment::run_table(&cfg, &cfg.output_dir)?;
            print!("{}", experiment::table_csv(&rows));
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            if failed > 0 {
                log::warn!("{failed} of {} grid cells failed", rows.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse_from(expand_key_flags(std::env::args())) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
