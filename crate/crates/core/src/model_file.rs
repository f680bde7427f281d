//! Versioned plain-text persistence of a trained model.
//!
//! ```text
//! distrl-quantile-model
//! format_version = 1
//! market.s0 = 105.0
//! ...
//! features.n_centers = 40
//! center = 0.12 0.5 0.97        (one line per center)
//! n_quantiles = 50
//! taus = 0.01 0.03 ...
//! weights = w_0 ... w_{d-1}     (one line per quantile)
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! save → load reproduces every weight bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureMap, Point};
use crate::learner::QuantileModel;
use crate::market::MarketParams;

pub const MAGIC: &str = "distrl-quantile-model";
pub const FORMAT_VERSION: u32 = 1;

/// A model together with the market it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub market: MarketParams,
    pub model: QuantileModel,
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:?}");
    }
    s
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let m = &self.market;
        let fm = self.model.feature_map();
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
        let _ = writeln!(out, "market.s0 = {:?}", m.s0);
        let _ = writeln!(out, "market.k = {:?}", m.k);
        let _ = writeln!(out, "market.r = {:?}", m.r);
        let _ = writeln!(out, "market.sigma = {:?}", m.sigma);
        let _ = writeln!(out, "market.t_maturity = {:?}", m.t_maturity);
        let _ = writeln!(out, "market.n_steps = {}", m.n_steps);
        let _ = writeln!(out, "features.n_centers = {}", fm.n_centers());
        let _ = writeln!(out, "features.bandwidth = {:?}", fm.bandwidth());
        let _ = writeln!(out, "features.price_scale = {:?}", fm.price_scale());
        let _ = writeln!(out, "features.step_scale = {}", fm.step_scale());
        for c in fm.centers() {
            let _ = writeln!(out, "center = {}", join(c));
        }
        let _ = writeln!(out, "n_quantiles = {}", self.model.n_quantiles());
        let _ = writeln!(out, "dim = {}", self.model.dim());
        let _ = writeln!(out, "taus = {}", join(self.model.taus()));
        for w in self.model.weights() {
            let _ = writeln!(out, "weights = {}", join(w));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(MAGIC) {
            return Err(fmt_err(format!("missing `{MAGIC}` header line")));
        }
        let mut p = Parser::default();
        for line in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fmt_err(format!("expected `key = value`, got `{line}`")))?;
            p.entry(key.trim(), value.trim())?;
        }
        p.finish()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Format {
        expected: FORMAT_VERSION,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| fmt_err(format!("bad value `{value}` for `{key}`")))
}

fn nums(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split_whitespace().map(|v| num(key, v)).collect()
}

#[derive(Default)]
struct Parser {
    version: Option<u32>,
    s0: Option<f64>,
    k: Option<f64>,
    r: Option<f64>,
    sigma: Option<f64>,
    t_maturity: Option<f64>,
    n_steps: Option<usize>,
    n_centers: Option<usize>,
    bandwidth: Option<f64>,
    price_scale: Option<f64>,
    step_scale: Option<usize>,
    centers: Vec<Point>,
    n_quantiles: Option<usize>,
    dim: Option<usize>,
    taus: Option<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| fmt_err(format!("missing `{key}`")))
}

impl Parser {
    fn entry(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "format_version" => {
                let v: u32 = num(key, value)?;
                if v != FORMAT_VERSION {
                    return Err(fmt_err(format!("file has format version {v}")));
                }
                self.version = Some(v);
            }
            "market.s0" => self.s0 = Some(num(key, value)?),
            "market.k" => self.k = Some(num(key, value)?),
            "market.r" => self.r = Some(num(key, value)?),
            "market.sigma" => self.sigma = Some(num(key, value)?),
            "market.t_maturity" => self.t_maturity = Some(num(key, value)?),
            "market.n_steps" => self.n_steps = Some(num(key, value)?),
            "features.n_centers" => self.n_centers = Some(num(key, value)?),
            "features.bandwidth" => self.bandwidth = Some(num(key, value)?),
            "features.price_scale" => self.price_scale = Some(num(key, value)?),
            "features.step_scale" => self.step_scale = Some(num(key, value)?),
            "center" => {
                let c = nums(key, value)?;
                let c: Point = c
                    .try_into()
                    .map_err(|_| fmt_err("center lines need exactly 3 coordinates"))?;
                self.centers.push(c);
            }
            "n_quantiles" => self.n_quantiles = Some(num(key, value)?),
            "dim" => self.dim = Some(num(key, value)?),
            "taus" => self.taus = Some(nums(key, value)?),
            "weights" => self.weights.push(nums(key, value)?),
            other => return Err(fmt_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<ModelFile> {
        need(self.version, "format_version")?;
        let market = MarketParams {
            s0: need(self.s0, "market.s0")?,
            k: need(self.k, "market.k")?,
            r: need(self.r, "market.r")?,
            sigma: need(self.sigma, "market.sigma")?,
            t_maturity: need(self.t_maturity, "market.t_maturity")?,
            n_steps: need(self.n_steps, "market.n_steps")?,
        };
        market.validate()?;
        let n_centers = need(self.n_centers, "features.n_centers")?;
        if self.centers.len() != n_centers {
            return Err(fmt_err(format!(
                "features.n_centers = {n_centers} but {} center lines",
                self.centers.len()
            )));
        }
        let fm = FeatureMap::new(
            self.centers,
            need(self.bandwidth, "features.bandwidth")?,
            need(self.price_scale, "features.price_scale")?,
            need(self.step_scale, "features.step_scale")?,
        )?;
        let n = need(self.n_quantiles, "n_quantiles")?;
        let dim = need(self.dim, "dim")?;
        if dim != fm.dim() {
            return Err(fmt_err(format!("dim = {dim} but the feature map has {}", fm.dim())));
        }
        if self.weights.len() != n {
            return Err(fmt_err(format!(
                "n_quantiles = {n} but {} weight lines",
                self.weights.len()
            )));
        }
        let taus = need(self.taus, "taus")?;
        let model = QuantileModel::with_taus(fm, taus, self.weights)?;
        Ok(ModelFile { market, model })
    }
}
