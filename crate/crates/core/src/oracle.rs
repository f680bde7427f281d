//! Monte Carlo reference payoffs: benchmark prices, monitor sets, and
//! empirical quantiles.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{self, MarketParams};
use crate::seed;

/// Which seed namespace a payoff sample draws from. Monitor and benchmark
/// sets never share paths with each other or with training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSet {
    Monitor,
    Benchmark,
}

impl SampleSet {
    pub fn tag(self) -> &'static str {
        match self {
            SampleSet::Monitor => seed::TAG_MONITOR,
            SampleSet::Benchmark => seed::TAG_BENCHMARK,
        }
    }
}

/// Discounted (and optionally capped) Asian call payoffs, one per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub set: SampleSet,
    pub cap: Option<f64>,
}

impl PayoffSample {
    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    /// Single-column CSV; the header names the configuration hash.
    pub fn to_csv(&self, config_hash: u64) -> String {
        let mut out = String::with_capacity(self.values.len() * 20);
        let _ = writeln!(out, "discounted_payoff_cfg_{config_hash:016x}");
        for v in &self.values {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path, config_hash: u64) -> Result<()> {
        std::fs::write(path, self.to_csv(config_hash)).map_err(|e| Error::io(path, e))
    }
}

/// `e^{-rT} min(cap, max(A_T - K, 0))` over `n_paths` independent paths.
/// Path `i` draws from `derive_seed(base_seed, set.tag(), i)`.
pub fn mc_payoff_samples(
    params: &MarketParams,
    n_paths: usize,
    payoff_cap: Option<f64>,
    base_seed: u64,
    set: SampleSet,
) -> Result<PayoffSample> {
    params.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be >= 1"));
    }
    market::check_cap(payoff_cap)?;
    let disc = params.maturity_discount();
    let values = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(base_seed, set.tag(), i);
            let ep = market::build_episode(params, payoff_cap, &mut rng)?;
            Ok(disc * ep.terminal_payoff)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PayoffSample {
        values,
        seed: base_seed,
        set,
        cap: payoff_cap,
    })
}

/// Sample mean and its standard error `s / √n` (unbiased `s`).
pub fn mc_price(sample: &PayoffSample) -> Result<(f64, f64)> {
    mean_and_std_error(&sample.values)
}

pub fn mean_and_std_error(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n });
    }
    let rough = values.iter().sum::<f64>() / n as f64;
    // second pass removes the rounding of the first, so identical values give exactly zero spread
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok((mean, sd / (n as f64).sqrt()))
}

/// Lower empirical quantiles `inf{x : F_n(x) ≥ τ}`: the order statistic at
/// 0-based index `ceil(τ n) - 1`.
pub fn empirical_quantiles(sample: &PayoffSample, taus: &[f64]) -> Result<Vec<f64>> {
    lower_quantiles(&sample.values, taus)
}

pub fn lower_quantiles(values: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::invalid("tau", format!("must lie in (0,1), got {t}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(taus
        .iter()
        .map(|&t| {
            // the epsilon keeps τ n = 30.000000000000004 from rounding up a rank
            let rank = (t * n as f64 - 1e-9).ceil().max(1.0) as usize;
            sorted[rank.min(n) - 1]
        })
        .collect())
}
