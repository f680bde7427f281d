//! Agreement between a learned quantile distribution and a Monte Carlo
//! reference: W₁, moments, pricing error, quantile crossings.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::learner::QuantileModel;
use crate::market::PathState;
use crate::oracle::{self, PayoffSample};

/// W₁ between the equally weighted atoms `theta` and sorted reference
/// quantiles: the mean absolute gap after sorting `theta`.
pub fn wasserstein1_quantile(theta: &[f64], reference_quantiles: &[f64]) -> Result<f64> {
    if theta.len() != reference_quantiles.len() {
        return Err(Error::Contract(format!(
            "W1 needs equal atom counts, got {} and {}",
            theta.len(),
            reference_quantiles.len()
        )));
    }
    if theta.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let mut sorted = theta.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted
        .iter()
        .zip(reference_quantiles)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / theta.len() as f64)
}

/// Finitely supported law on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    /// Probabilities must be non-negative and sum to one (within 1e-9).
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() || atoms.is_empty() {
            return Err(Error::Contract(format!(
                "{} atoms with {} probabilities",
                atoms.len(),
                probs.len()
            )));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("probs", format!("not a probability vector (sum {total})")));
        }
        Ok(Self { atoms, probs })
    }

    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let p = 1.0 / atoms.len().max(1) as f64;
        let probs = vec![p; atoms.len()];
        Self::new(atoms, probs)
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            atoms: vec![x],
            probs: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Law of `a + b X`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|x| a + b * x).collect(),
            probs: self.probs.clone(),
        }
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`, by full enumeration.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        let mut probs = Vec::with_capacity(atoms.capacity());
        for (x, p) in self.atoms.iter().zip(&self.probs) {
            for (y, q) in other.atoms.iter().zip(&other.probs) {
                atoms.push(x + y);
                probs.push(p * q);
            }
        }
        Self { atoms, probs }
    }

    /// Probability mixture `Σ_k w_k L_k`.
    pub fn mixture(parts: &[(f64, &DiscreteLaw)]) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut probs = Vec::new();
        for (w, law) in parts {
            atoms.extend_from_slice(&law.atoms);
            probs.extend(law.probs.iter().map(|p| w * p));
        }
        Self::new(atoms, probs)
    }

    /// W₁ as `∫ |F(x) - G(x)| dx` over the merged support.
    pub fn wasserstein1(&self, other: &Self) -> f64 {
        let mut events: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| (x, p))
            .chain(other.atoms.iter().zip(&other.probs).map(|(&x, &p)| (x, -p)))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cdf_gap = 0.0;
        let mut total = 0.0;
        for w in events.windows(2) {
            cdf_gap += w[0].1;
            total += cdf_gap.abs() * (w[1].0 - w[0].0);
        }
        total
    }
}

/// Mean plus standardized third and fourth central moments (biased,
/// divide-by-n). Kurtosis is raw, so a Gaussian gives 3. The standardized
/// moments are `None` when the sample has zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn sample_moments(values: &[f64]) -> Result<Moments> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    // relative cutoff so a constant sample with round-off noise still reads as degenerate
    let degenerate = n < 2 || m2 <= 1e-28 * mean.abs().max(1.0).powi(2);
    if degenerate {
        return Ok(Moments {
            mean,
            skewness: None,
            kurtosis: None,
        });
    }
    Ok(Moments {
        mean,
        skewness: Some(m3 / m2.powf(1.5)),
        kurtosis: Some(m4 / (m2 * m2)),
    })
}

/// Adjacent pairs with `θ_{i+1} < θ_i`.
pub fn crossing_count(theta: &[f64]) -> usize {
    theta.windows(2).filter(|w| w[1] < w[0]).count()
}

/// One row of the per-epoch convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub distrl_price: f64,
    pub mc_price: f64,
    pub abs_error: f64,
    pub w1: f64,
    pub learned: Moments,
    pub reference: Moments,
    pub crossing_count: usize,
}

pub const CSV_HEADER: &str = "epoch,distrl_price,mc_price,abs_error,w1,learned_mean,learned_skew,learned_kurt,ref_mean,ref_skew,ref_kurt,crossing_count";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:?}"))
}

impl EpochDiagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{},{},{:?},{},{},{}",
            self.epoch,
            self.distrl_price,
            self.mc_price,
            self.abs_error,
            self.w1,
            self.learned.mean,
            opt(self.learned.skewness),
            opt(self.learned.kurtosis),
            self.reference.mean,
            opt(self.reference.skewness),
            opt(self.reference.kurtosis),
            self.crossing_count
        )
    }
}

pub fn diagnostics_csv(rows: &[EpochDiagnostics]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn write_diagnostics_csv(path: &Path, rows: &[EpochDiagnostics]) -> Result<()> {
    std::fs::write(path, diagnostics_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Compares the model's atoms at `initial_state` with `reference`.
pub fn epoch_report(
    epoch: usize,
    model: &QuantileModel,
    initial_state: &PathState,
    reference: &PayoffSample,
    mc_price: f64,
) -> Result<EpochDiagnostics> {
    let theta = model.predict_quantiles(initial_state)?;
    let distrl_price = theta.iter().sum::<f64>() / theta.len() as f64;
    let ref_q = oracle::empirical_quantiles(reference, model.taus())?;
    Ok(EpochDiagnostics {
        epoch,
        distrl_price,
        mc_price,
        abs_error: (distrl_price - mc_price).abs(),
        w1: wasserstein1_quantile(&theta, &ref_q)?,
        learned: sample_moments(&theta)?,
        reference: sample_moments(&reference.values)?,
        crossing_count: crossing_count(&theta),
    })
}
