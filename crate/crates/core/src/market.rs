//! Risk-neutral GBM paths, path-augmented episodes, and the arithmetic
//! Asian call payoff.
//!
//! Paths are stepped with the exact log-normal transition
//! `S_{m+1} = S_m exp((r - σ²/2) dt + σ √dt z_m)`, so the grid values carry
//! no discretization bias. The running average counts every grid point,
//! `S_0` included (`n_steps + 1` terms).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Contract and risk-neutral model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub s0: f64,
    pub k: f64,
    pub r: f64,
    pub sigma: f64,
    pub t_maturity: f64,
    pub n_steps: usize,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            s0: 105.0,
            k: 100.0,
            r: 0.03,
            sigma: 0.2,
            t_maturity: 1.0,
            n_steps: 252,
        }
    }
}

impl MarketParams {
    /// Checks the parameter domain. `sigma = 0` is accepted as the
    /// deterministic limit used by the degenerate examples and tests.
    pub fn validate(&self) -> Result<()> {
        fn finite(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite, got {v}")))
            }
        }
        finite("s0", self.s0)?;
        finite("k", self.k)?;
        finite("r", self.r)?;
        finite("sigma", self.sigma)?;
        finite("t_maturity", self.t_maturity)?;
        if self.s0 <= 0.0 {
            return Err(Error::invalid("s0", format!("must be > 0, got {}", self.s0)));
        }
        if self.k <= 0.0 {
            return Err(Error::invalid("k", format!("must be > 0, got {}", self.k)));
        }
        if self.r < 0.0 {
            return Err(Error::invalid("r", format!("must be >= 0, got {}", self.r)));
        }
        if self.sigma < 0.0 {
            return Err(Error::invalid(
                "sigma",
                format!("must be >= 0, got {}", self.sigma),
            ));
        }
        if self.t_maturity <= 0.0 {
            return Err(Error::invalid(
                "t_maturity",
                format!("must be > 0, got {}", self.t_maturity),
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be >= 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_maturity / self.n_steps as f64
    }

    /// Per-step discount `e^{-r dt}`.
    pub fn gamma_per_step(&self) -> f64 {
        discount_factor(self.r, self.dt())
    }

    /// Discount over the whole contract, `e^{-r T}`.
    pub fn maturity_discount(&self) -> f64 {
        (-self.r * self.t_maturity).exp()
    }

    pub fn initial_state(&self) -> PathState {
        PathState {
            spot: self.s0,
            running_avg: self.s0,
            step_index: 0,
        }
    }
}

/// Markov state `(S_t, A_t, t)` of the augmented price process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub spot: f64,
    /// Arithmetic mean of every spot observed so far, `S_0` included.
    pub running_avg: f64,
    pub step_index: usize,
}

/// One simulated trajectory as a sequence of augmented states.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub states: Vec<PathState>,
    /// Undiscounted payoff at maturity, after the cap if one was active.
    pub terminal_payoff: f64,
}

impl Episode {
    pub fn initial(&self) -> &PathState {
        &self.states[0]
    }

    pub fn terminal(&self) -> &PathState {
        self.states.last().expect("episode has at least two states")
    }
}

/// Simulates `n_steps + 1` grid spots starting at `s0`.
pub fn simulate_path<R: Rng + ?Sized>(params: &MarketParams, rng: &mut R) -> Result<Vec<f64>> {
    params.validate()?;
    let dt = params.dt();
    let drift = (params.r - 0.5 * params.sigma * params.sigma) * dt;
    let vol = params.sigma * dt.sqrt();
    let mut spots = Vec::with_capacity(params.n_steps + 1);
    let mut s = params.s0;
    spots.push(s);
    for _ in 0..params.n_steps {
        let z: f64 = rng.sample(StandardNormal);
        s *= (drift + vol * z).exp();
        spots.push(s);
    }
    Ok(spots)
}

/// Turns a spot sequence into an episode. `spots[0]` is taken as `S_0`.
pub fn episode_from_spots(spots: &[f64], k: f64, payoff_cap: Option<f64>) -> Result<Episode> {
    if spots.len() < 2 {
        return Err(Error::Contract(format!(
            "an episode needs at least two spots, got {}",
            spots.len()
        )));
    }
    check_cap(payoff_cap)?;
    let mut states = Vec::with_capacity(spots.len());
    let mut avg = 0.0;
    for (m, &spot) in spots.iter().enumerate() {
        avg = (m as f64 * avg + spot) / (m as f64 + 1.0);
        states.push(PathState {
            spot,
            running_avg: avg,
            step_index: m,
        });
    }
    let terminal_payoff = asian_call_payoff(avg, k, payoff_cap)?;
    Ok(Episode {
        states,
        terminal_payoff,
    })
}

pub fn build_episode<R: Rng + ?Sized>(
    params: &MarketParams,
    payoff_cap: Option<f64>,
    rng: &mut R,
) -> Result<Episode> {
    check_cap(payoff_cap)?;
    let spots = simulate_path(params, rng)?;
    episode_from_spots(&spots, params.k, payoff_cap)
}

/// `min(cap, max(avg - k, 0))`, the cap being optional.
pub fn asian_call_payoff(running_avg: f64, k: f64, payoff_cap: Option<f64>) -> Result<f64> {
    if !(running_avg > 0.0) {
        return Err(Error::invalid(
            "running_avg",
            format!("must be > 0, got {running_avg}"),
        ));
    }
    if !(k > 0.0) {
        return Err(Error::invalid("k", format!("must be > 0, got {k}")));
    }
    check_cap(payoff_cap)?;
    let intrinsic = (running_avg - k).max(0.0);
    Ok(match payoff_cap {
        Some(cap) => intrinsic.min(cap),
        None => intrinsic,
    })
}

pub fn discount_factor(r: f64, dt: f64) -> f64 {
    (-r * dt).exp()
}

pub(crate) fn check_cap(payoff_cap: Option<f64>) -> Result<()> {
    match payoff_cap {
        Some(c) if !(c > 0.0) || !c.is_finite() => Err(Error::invalid(
            "payoff_cap",
            format!("must be a positive finite number, got {c}"),
        )),
        _ => Ok(()),
    }
}
