//! Flat `section.key = value` experiment configuration.
//!
//! ```text
//! # comment
//! market.s0 = 105
//! train.payoff_cap = 10      # or `none`
//! table.grid = 105:10, 105:20
//! ```
//!
//! Unknown keys are rejected. [`ExperimentConfig::to_kv_text`] writes every
//! key, and the echo re-parses to the same configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learner::TrainConfig;
use crate::market::MarketParams;
use crate::seed;

/// One `(s0, cap)` cell of a reproduction table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub s0: f64,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub market: MarketParams,
    pub train: TrainConfig,
    pub n_quantiles: usize,
    pub n_centers: usize,
    pub bandwidth: f64,
    pub price_scale: f64,
    pub monitor_paths: usize,
    pub benchmark_paths: usize,
    /// Whether monitor and benchmark payoffs use `train.payoff_cap`.
    pub oracle_capped: bool,
    pub output_dir: PathBuf,
    pub run_label: String,
    pub grid: Vec<GridCell>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let market = MarketParams::default();
        Self {
            market,
            train: TrainConfig::default().with_market(&market),
            n_quantiles: 50,
            n_centers: 40,
            bandwidth: 0.5,
            price_scale: 200.0,
            monitor_paths: 3_000,
            benchmark_paths: 100_000,
            oracle_capped: true,
            output_dir: PathBuf::from("runs/default"),
            run_label: "default".to_string(),
            grid: Vec::new(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "market.s0",
    "market.k",
    "market.r",
    "market.sigma",
    "market.t_maturity",
    "market.n_steps",
    "train.eta",
    "train.n_epochs",
    "train.paths_per_epoch",
    "train.payoff_cap",
    "train.grad_clip_norm",
    "train.base_seed",
    "train.target_mode",
    "train.schedule",
    "model.n_quantiles",
    "model.n_centers",
    "model.bandwidth",
    "model.price_scale",
    "oracle.monitor_paths",
    "oracle.benchmark_paths",
    "oracle.capped",
    "run.output_dir",
    "run.label",
    "table.grid",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_cap(key: &str, value: &str) -> Result<Option<f64>> {
    if value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn cap_text(cap: Option<f64>) -> String {
    cap.map_or_else(|| "none".to_string(), |c| format!("{c:?}"))
}

fn parse_grid(value: &str) -> Result<Vec<GridCell>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|cell| {
            let (s0, cap) = cell
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("grid cell `{cell}` is not `s0:cap`")))?;
            Ok(GridCell {
                s0: parse("table.grid", s0.trim())?,
                cap: parse_cap("table.grid", cap.trim())?,
            })
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_text(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_text(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "market.s0" => self.market.s0 = parse(key, value)?,
            "market.k" => self.market.k = parse(key, value)?,
            "market.r" => self.market.r = parse(key, value)?,
            "market.sigma" => self.market.sigma = parse(key, value)?,
            "market.t_maturity" => self.market.t_maturity = parse(key, value)?,
            "market.n_steps" => self.market.n_steps = parse(key, value)?,
            "train.eta" => self.train.eta = parse(key, value)?,
            "train.n_epochs" => self.train.n_epochs = parse(key, value)?,
            "train.paths_per_epoch" => self.train.paths_per_epoch = parse(key, value)?,
            "train.payoff_cap" => self.train.payoff_cap = parse_cap(key, value)?,
            "train.grad_clip_norm" => self.train.grad_clip_norm = parse(key, value)?,
            "train.base_seed" => self.train.base_seed = parse(key, value)?,
            "train.target_mode" => self.train.target_mode = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "train.schedule" => self.train.schedule = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "model.n_quantiles" => self.n_quantiles = parse(key, value)?,
            "model.n_centers" => self.n_centers = parse(key, value)?,
            "model.bandwidth" => self.bandwidth = parse(key, value)?,
            "model.price_scale" => self.price_scale = parse(key, value)?,
            "oracle.monitor_paths" => self.monitor_paths = parse(key, value)?,
            "oracle.benchmark_paths" => self.benchmark_paths = parse(key, value)?,
            "oracle.capped" => self.oracle_capped = parse(key, value)?,
            "run.output_dir" => self.output_dir = PathBuf::from(value),
            "run.label" => self.run_label = value.to_string(),
            "table.grid" => self.grid = parse_grid(value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        self.train.gamma_per_step = self.market.gamma_per_step();
        Ok(())
    }

    /// Checks every embedded invariant; errors are reported as configuration errors.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::InvalidParameter { name, reason } => {
                Error::Config(format!("invalid `{name}`: {reason}"))
            }
            other => other,
        };
        self.market.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        if self.n_quantiles == 0 {
            return Err(Error::Config("model.n_quantiles must be >= 1".into()));
        }
        if self.n_centers == 0 {
            return Err(Error::Config("model.n_centers must be >= 1".into()));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::Config("model.bandwidth must be > 0".into()));
        }
        if !(self.price_scale > 0.0) {
            return Err(Error::Config("model.price_scale must be > 0".into()));
        }
        if self.market.s0 > self.price_scale {
            return Err(Error::Config(format!(
                "market.s0 = {} exceeds model.price_scale = {}",
                self.market.s0, self.price_scale
            )));
        }
        if self.monitor_paths < 2 || self.benchmark_paths < 2 {
            return Err(Error::Config(
                "oracle.monitor_paths and oracle.benchmark_paths must be >= 2".into(),
            ));
        }
        for cell in &self.grid {
            if !(cell.s0 > 0.0 && cell.s0 <= self.price_scale) {
                return Err(Error::Config(format!("grid s0 = {} out of range", cell.s0)));
            }
            crate::market::check_cap(cell.cap).map_err(wrap)?;
        }
        Ok(())
    }

    /// Cap applied to monitor and benchmark payoffs.
    pub fn oracle_cap(&self) -> Option<f64> {
        if self.oracle_capped {
            self.train.payoff_cap
        } else {
            None
        }
    }

    /// Resolved configuration, every key in [`KEYS`] order.
    pub fn to_kv_text(&self) -> String {
        let m = &self.market;
        let t = &self.train;
        let grid = self
            .grid
            .iter()
            .map(|c| format!("{:?}:{}", c.s0, cap_text(c.cap)))
            .collect::<Vec<_>>()
            .join(", ");
        let values = [
            format!("{:?}", m.s0),
            format!("{:?}", m.k),
            format!("{:?}", m.r),
            format!("{:?}", m.sigma),
            format!("{:?}", m.t_maturity),
            m.n_steps.to_string(),
            format!("{:?}", t.eta),
            t.n_epochs.to_string(),
            t.paths_per_epoch.to_string(),
            cap_text(t.payoff_cap),
            format!("{:?}", t.grad_clip_norm),
            t.base_seed.to_string(),
            t.target_mode.as_str().to_string(),
            t.schedule.as_str().to_string(),
            self.n_quantiles.to_string(),
            self.n_centers.to_string(),
            format!("{:?}", self.bandwidth),
            format!("{:?}", self.price_scale),
            self.monitor_paths.to_string(),
            self.benchmark_paths.to_string(),
            self.oracle_capped.to_string(),
            self.output_dir.display().to_string(),
            self.run_label.clone(),
            grid,
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Stable 64-bit hash of the resolved configuration, excluding the
    /// output location and label.
    pub fn hash(&self) -> u64 {
        let text: String = self
            .to_kv_text()
            .lines()
            .filter(|l| !l.starts_with("run."))
            .map(|l| format!("{l}\n"))
            .collect();
        seed::fnv1a64(text.as_bytes())
    }
}
