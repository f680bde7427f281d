//! End-to-end runs: benchmark pricing, training with diagnostics, model
//! queries, and grid tables. Every output file is a pure function of the
//! resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, GridCell};
use crate::diagnostics::{self, EpochDiagnostics};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::learner::{self, QuantileModel};
use crate::market::PathState;
use crate::model_file::ModelFile;
use crate::oracle::{self, PayoffSample, SampleSet};
use crate::seed;

pub const CONFIG_FILE: &str = "config.resolved";
pub const BENCHMARK_SUMMARY_FILE: &str = "benchmark.csv";
pub const BENCHMARK_PAYOFFS_FILE: &str = "benchmark_payoffs.csv";
pub const MODEL_FILE: &str = "model.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const QUANTILES_FILE: &str = "quantiles.csv";
pub const PRICE_FILE: &str = "price.csv";
pub const TABLE_FILE: &str = "table.csv";

pub const BENCHMARK_HEADER: &str = "n_paths,max_payoff,price,std_error,expected_payoff";
pub const PRICE_HEADER: &str = "spot,running_avg,step_index,price";
pub const QUANTILES_HEADER: &str = "index,tau,quantile";
pub const TABLE_HEADER: &str = "s0_minus_k,max_payoff,mc_price,distrl_price,abs_error,w1,seed,error";

fn cap_text(cap: Option<f64>) -> String {
    cap.map_or_else(|| "none".to_string(), |c| format!("{c:?}"))
}

/// Writes a set of files, removing every one of them if any write fails.
fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

fn checked(config: &ExperimentConfig) -> Result<()> {
    config.validate()
}

/// Benchmark price summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub n_paths: usize,
    pub cap: Option<f64>,
    /// Mean discounted payoff.
    pub price: f64,
    pub std_error: f64,
    /// Mean undiscounted payoff, `price / e^{-rT}`.
    pub expected_payoff: f64,
}

impl BenchmarkReport {
    pub fn from_sample(sample: &PayoffSample, maturity_discount: f64) -> Result<Self> {
        let (price, std_error) = oracle::mc_price(sample)?;
        Ok(Self {
            n_paths: sample.n_paths(),
            cap: sample.cap,
            price,
            std_error,
            expected_payoff: price / maturity_discount,
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{BENCHMARK_HEADER}\n{},{},{:?},{:?},{:?}\n",
            self.n_paths,
            cap_text(self.cap),
            self.price,
            self.std_error,
            self.expected_payoff
        )
    }
}

pub fn benchmark_sample(config: &ExperimentConfig) -> Result<PayoffSample> {
    oracle::mc_payoff_samples(
        &config.market,
        config.benchmark_paths,
        config.oracle_cap(),
        config.train.base_seed,
        SampleSet::Benchmark,
    )
}

pub fn monitor_sample(config: &ExperimentConfig) -> Result<PayoffSample> {
    oracle::mc_payoff_samples(
        &config.market,
        config.monitor_paths,
        config.oracle_cap(),
        config.train.base_seed,
        SampleSet::Monitor,
    )
}

/// Generates the benchmark set and writes its summary, the payoff sample,
/// and the resolved configuration to `out_dir`.
pub fn run_benchmark(config: &ExperimentConfig, out_dir: &Path) -> Result<BenchmarkReport> {
    checked(config)?;
    let sample = benchmark_sample(config)?;
    let report = BenchmarkReport::from_sample(&sample, config.market.maturity_discount())?;
    write_all(
        out_dir,
        &[
            (BENCHMARK_SUMMARY_FILE, report.to_csv()),
            (BENCHMARK_PAYOFFS_FILE, sample.to_csv(config.hash())),
            (CONFIG_FILE, config.to_kv_text()),
        ],
    )?;
    Ok(report)
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QuantileModel,
    pub history: Vec<EpochDiagnostics>,
    /// Final model against the benchmark set.
    pub evaluation: EpochDiagnostics,
    pub benchmark: BenchmarkReport,
    /// Mean of the monitor set used to initialize the heads.
    pub init_mean: f64,
}

/// Samples the RBF centers for a run.
pub fn feature_map(config: &ExperimentConfig) -> Result<FeatureMap> {
    let mut rng = seed::stream(config.train.base_seed, seed::TAG_CENTERS, 0);
    FeatureMap::sampled(
        config.n_centers,
        config.bandwidth,
        config.price_scale,
        config.market.n_steps,
        &mut rng,
    )
}

/// Monitor set → initialization → training → evaluation, without touching disk.
pub fn train_model(config: &ExperimentConfig) -> Result<TrainOutcome> {
    checked(config)?;
    let s0 = config.market.initial_state();
    let monitor = monitor_sample(config)?;
    let (init_mean, _) = oracle::mc_price(&monitor)?;
    let model = learner::init_model(feature_map(config)?, config.n_quantiles, init_mean, &s0)?;
    log::info!(
        "training {} epochs x {} paths from initial mean {init_mean:.4}",
        config.train.n_epochs,
        config.train.paths_per_epoch
    );
    let (model, history) = learner::train(model, &config.market, &config.train, Some(&monitor))?;
    let bench = benchmark_sample(config)?;
    let benchmark = BenchmarkReport::from_sample(&bench, config.market.maturity_discount())?;
    let evaluation =
        diagnostics::epoch_report(config.train.n_epochs, &model, &s0, &bench, benchmark.price)?;
    Ok(TrainOutcome {
        model,
        history,
        evaluation,
        benchmark,
        init_mean,
    })
}

/// Trains and writes the model file, the per-epoch trace, the final
/// evaluation row, and the resolved configuration. Nothing is left behind
/// on failure.
pub fn run_train(config: &ExperimentConfig, out_dir: &Path) -> Result<TrainOutcome> {
    let outcome = train_model(config)?;
    let model_text = ModelFile {
        market: config.market,
        model: outcome.model.clone(),
    }
    .to_text();
    write_all(
        out_dir,
        &[
            (MODEL_FILE, model_text),
            (DIAGNOSTICS_FILE, diagnostics::diagnostics_csv(&outcome.history)),
            (
                EVALUATION_FILE,
                diagnostics::diagnostics_csv(std::slice::from_ref(&outcome.evaluation)),
            ),
            (CONFIG_FILE, config.to_kv_text()),
        ],
    )?;
    Ok(outcome)
}

/// Price and quantiles of a saved model at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    pub state: PathState,
    pub price: f64,
    pub taus: Vec<f64>,
    pub quantiles: Vec<f64>,
}

impl PriceReport {
    pub fn price_csv(&self) -> String {
        format!(
            "{PRICE_HEADER}\n{:?},{:?},{},{:?}\n",
            self.state.spot, self.state.running_avg, self.state.step_index, self.price
        )
    }

    pub fn quantiles_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{QUANTILES_HEADER}");
        for (i, (t, q)) in self.taus.iter().zip(&self.quantiles).enumerate() {
            let _ = writeln!(out, "{i},{t:?},{q:?}");
        }
        out
    }
}

/// Evaluates a model at `state`, or at its market's initial state.
pub fn price_model(file: &ModelFile, state: Option<PathState>) -> Result<PriceReport> {
    let state = state.unwrap_or_else(|| file.market.initial_state());
    let quantiles = file.model.predict_quantiles(&state)?;
    let price = quantiles.iter().sum::<f64>() / quantiles.len() as f64;
    Ok(PriceReport {
        state,
        price,
        taus: file.model.taus().to_vec(),
        quantiles,
    })
}

/// Loads a model file, evaluates it, and optionally writes the CSVs.
pub fn run_price(model_path: &Path, state: Option<PathState>, out_dir: Option<&Path>) -> Result<PriceReport> {
    let file = ModelFile::load(model_path)?;
    let report = price_model(&file, state)?;
    if let Some(dir) = out_dir {
        write_all(
            dir,
            &[
                (PRICE_FILE, report.price_csv()),
                (QUANTILES_FILE, report.quantiles_csv()),
            ],
        )?;
    }
    Ok(report)
}

/// One grid cell of a reproduction table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub s0_minus_k: f64,
    pub max_payoff: Option<f64>,
    pub seed: u64,
    /// `(mc_price, distrl_price, abs_error, w1)`, or the reason the cell failed.
    pub outcome: std::result::Result<(f64, f64, f64, f64), String>,
}

impl TableRow {
    pub fn csv_row(&self) -> String {
        let head = format!("{:?},{},", self.s0_minus_k, cap_text(self.max_payoff));
        match &self.outcome {
            Ok((mc, dr, err, w1)) => format!("{head}{mc:?},{dr:?},{err:?},{w1:?},{},", self.seed),
            Err(msg) => {
                let msg = msg.replace(['"', '\n'], " ");
                format!("{head},,,,{},\"{msg}\"", self.seed)
            }
        }
    }
}

/// The configuration a grid cell runs with.
pub fn cell_config(base: &ExperimentConfig, cell: &GridCell) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.grid.clear();
    cfg.market.s0 = cell.s0;
    cfg.train.payoff_cap = cell.cap;
    cfg.train.gamma_per_step = cfg.market.gamma_per_step();
    cfg
}

fn table_cell(base: &ExperimentConfig, cell: &GridCell) -> TableRow {
    let cfg = cell_config(base, cell);
    let outcome = train_model(&cfg)
        .map(|o| {
            let e = &o.evaluation;
            (e.mc_price, e.distrl_price, e.abs_error, e.w1)
        })
        .map_err(|e| e.to_string());
    if let Err(msg) = &outcome {
        log::warn!("grid cell s0={} cap={}: {msg}", cell.s0, cap_text(cell.cap));
    }
    TableRow {
        s0_minus_k: cell.s0 - cfg.market.k,
        max_payoff: cell.cap,
        seed: cfg.train.base_seed,
        outcome,
    }
}

/// Benchmark + training per grid cell, in parallel, rows in grid order.
/// A failing cell records its error and the rest still run.
pub fn table_rows(config: &ExperimentConfig) -> Vec<TableRow> {
    config
        .grid
        .par_iter()
        .map(|cell| table_cell(config, cell))
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TABLE_HEADER}");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn run_table(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<TableRow>> {
    // Grid cells override s0 and the cap, so only the shared settings must be valid here.
    let mut shared = config.clone();
    shared.grid.clear();
    checked(&shared)?;
    let rows = table_rows(config);
    write_all(
        out_dir,
        &[(TABLE_FILE, table_csv(&rows)), (CONFIG_FILE, config.to_kv_text())],
    )?;
    Ok(rows)
}
