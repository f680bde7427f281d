//! Gaussian RBF features over the normalized state cube.

use rand::Rng;

use crate::error::{Error, Result};
use crate::market::PathState;

/// Number of state coordinates: spot, running average, time.
pub const STATE_DIM: usize = 3;

pub type Point = [f64; STATE_DIM];

/// Frozen RBF basis plus the constants that map states into `[0,1]^3`.
///
/// Feature vectors have `n_centers + 1` components, the first being a
/// constant bias of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    centers: Vec<Point>,
    bandwidth: f64,
    price_scale: f64,
    step_scale: usize,
}

impl FeatureMap {
    /// `centers` may be empty, which leaves only the bias feature.
    pub fn new(
        centers: Vec<Point>,
        bandwidth: f64,
        price_scale: f64,
        step_scale: usize,
    ) -> Result<Self> {
        if let Some(c) = centers
            .iter()
            .find(|c| c.iter().any(|x| !(0.0..=1.0).contains(x)))
        {
            return Err(Error::invalid(
                "centers",
                format!("center {c:?} lies outside [0,1]^3"),
            ));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(
                "bandwidth",
                format!("must be > 0, got {bandwidth}"),
            ));
        }
        if !(price_scale > 0.0) || !price_scale.is_finite() {
            return Err(Error::invalid(
                "price_scale",
                format!("must be > 0, got {price_scale}"),
            ));
        }
        if step_scale == 0 {
            return Err(Error::invalid("step_scale", "must be >= 1"));
        }
        Ok(Self {
            centers,
            bandwidth,
            price_scale,
            step_scale,
        })
    }

    /// Samples `n_centers` uniform centers and builds the map.
    pub fn sampled<R: Rng + ?Sized>(
        n_centers: usize,
        bandwidth: f64,
        price_scale: f64,
        step_scale: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let centers = sample_centers(n_centers, rng)?;
        Self::new(centers, bandwidth, price_scale, step_scale)
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn price_scale(&self) -> f64 {
        self.price_scale
    }

    pub fn step_scale(&self) -> usize {
        self.step_scale
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    /// Feature dimension, bias included.
    pub fn dim(&self) -> usize {
        self.centers.len() + 1
    }

    /// Maps a state into `[0,1]^3`, rejecting prices above `price_scale`
    /// and steps above `step_scale`.
    pub fn normalize_state(&self, state: &PathState) -> Result<Point> {
        for (field, v) in [("spot", state.spot), ("running_avg", state.running_avg)] {
            if !(v > 0.0 && v <= self.price_scale) {
                return Err(Error::OutOfRange {
                    field,
                    value: v,
                    limit: self.price_scale,
                });
            }
        }
        if state.step_index > self.step_scale {
            return Err(Error::OutOfRange {
                field: "step_index",
                value: state.step_index as f64,
                limit: self.step_scale as f64,
            });
        }
        Ok(self.scale(state))
    }

    /// Same division as [`normalize_state`](Self::normalize_state) without
    /// the range check. Used on simulated training states, where rare
    /// excursions above `price_scale` land slightly outside the cube and
    /// the Gaussian kernels extrapolate smoothly.
    pub fn normalize_state_unbounded(&self, state: &PathState) -> Point {
        self.scale(state)
    }

    fn scale(&self, state: &PathState) -> Point {
        [
            state.spot / self.price_scale,
            state.running_avg / self.price_scale,
            state.step_index as f64 / self.step_scale as f64,
        ]
    }

    /// `[1, φ_1(x), …, φ_n(x)]` with `φ_j(x) = exp(-‖x - c_j‖² / (2σ̃²))`.
    pub fn rbf_features(&self, normalized: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.rbf_features_into(normalized, &mut out);
        out
    }

    pub fn rbf_features_into(&self, normalized: &Point, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let inv_two_var = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        out[0] = 1.0;
        for (o, c) in out[1..].iter_mut().zip(&self.centers) {
            let d2: f64 = c.iter().zip(normalized).map(|(a, b)| (a - b) * (a - b)).sum();
            *o = (-d2 * inv_two_var).exp();
        }
    }

    /// Normalizes (with the range check) and expands a state.
    pub fn features(&self, state: &PathState) -> Result<Vec<f64>> {
        Ok(self.rbf_features(&self.normalize_state(state)?))
    }
}

/// Draws `n` i.i.d. points uniform on `[0,1]^3`.
pub fn sample_centers<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::invalid("n_centers", "must be >= 1"));
    }
    Ok((0..n)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect())
}
