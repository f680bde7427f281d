//! Quantile value distribution `Ẑ(s) = (1/N) Σ δ_{θ_i(s)}` with
//! `θ_i(s) = w_iᵀ φ(s)`, trained by backward semi-gradient quantile TD
//! sweeps over simulated episodes.

use rayon::prelude::*;

use crate::diagnostics::{self, EpochDiagnostics};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::market::{self, Episode, MarketParams, PathState};
use crate::oracle::{self, PayoffSample};
use crate::seed;

/// Quantile midpoints `(i - 0.5) / n` for `i = 1..=n`.
pub fn tau_grid(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n_quantiles", "must be >= 1"));
    }
    Ok((1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect())
}

/// Pinball loss `ρ_τ(u) = u (τ - 1{u<0})`.
pub fn pinball_loss(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(u * quantile_subgradient(tau, u))
}

/// `τ - 1{u<0}`. At the kink `u = 0` the indicator is taken as 0.
pub fn quantile_subgradient(tau: f64, u: f64) -> f64 {
    if u < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("tau", format!("must lie in (0,1), got {tau}")))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Pinball TD loss `ρ_τ(r + γ wᵀφ' - wᵀφ)` of one transition.
pub fn td_loss(weights: &[f64], reward: f64, gamma: f64, phi: &[f64], phi_next: &[f64], tau: f64) -> f64 {
    let u = reward + gamma * dot(weights, phi_next) - dot(weights, phi);
    u * quantile_subgradient(tau, u)
}

/// Full (sub)gradient of [`td_loss`] in `w`: `(τ - 1{Δ<0}) (γφ' - φ)`.
pub fn full_td_gradient(tau: f64, delta: f64, gamma: f64, phi: &[f64], phi_next: &[f64]) -> Vec<f64> {
    let c = quantile_subgradient(tau, delta);
    phi.iter()
        .zip(phi_next)
        .map(|(p, q)| c * (gamma * q - p))
        .collect()
}

/// Semi-gradient of the TD loss, the target held fixed: `-(τ - 1{Δ<0}) φ`.
pub fn semi_gradient(tau: f64, delta: f64, phi: &[f64]) -> Vec<f64> {
    let c = quantile_subgradient(tau, delta);
    phi.iter().map(|p| -c * p).collect()
}

/// One clipped semi-gradient step on a single weight vector.
///
/// The descent direction `(τ - 1{Δ<0}) φ` is rescaled to `clip_norm` when
/// its l2 norm exceeds it, then applied with step `eta`. `phi_norm` is
/// `‖φ‖₂`, passed in so callers updating many quantiles at one state
/// compute it once. Returns the TD residual `Δ = target - wᵀφ`.
pub fn semi_gradient_step(
    weights: &mut [f64],
    phi: &[f64],
    phi_norm: f64,
    tau: f64,
    target: f64,
    eta: f64,
    clip_norm: f64,
) -> f64 {
    let delta = target - dot(weights, phi);
    let c = quantile_subgradient(tau, delta);
    let step_norm = c.abs() * phi_norm;
    let scale = if step_norm > clip_norm {
        clip_norm / step_norm
    } else {
        1.0
    };
    let k = eta * scale * c;
    for (w, p) in weights.iter_mut().zip(phi) {
        *w += k * p;
    }
    delta
}

/// How the per-state targets of a backward sweep are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// `γ θ_i(s_{t+1})` with the weights already updated in this sweep.
    Bootstrap,
    /// `γ θ_i(s_{t+1})` with the weights as they were before the sweep.
    FrozenBootstrap,
    /// Discounted payoff `γ^{T-t} f`, accumulated backward from maturity.
    Return,
}

impl TargetMode {
    pub const ALL: [TargetMode; 3] = [Self::Bootstrap, Self::FrozenBootstrap, Self::Return];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bootstrap => "bootstrap",
            Self::FrozenBootstrap => "frozen_bootstrap",
            Self::Return => "return",
        }
    }
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("target_mode", format!("expected bootstrap, frozen_bootstrap or return, got {s:?}")))
    }
}

/// When the sweep's gradients are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSchedule {
    /// One clipped step per visited state, terminal first.
    PerState,
    /// Targets for the whole episode first, then one clipped step per head
    /// along the mean semi-gradient over the episode's states.
    PerEpisode,
}

impl UpdateSchedule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PerState => "per_state",
            Self::PerEpisode => "per_episode",
        }
    }
}

impl std::str::FromStr for UpdateSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_state" => Ok(Self::PerState),
            "per_episode" => Ok(Self::PerEpisode),
            _ => Err(Error::invalid("schedule", format!("expected per_state or per_episode, got {s:?}"))),
        }
    }
}

/// Training hyper-parameters.
///
/// The defaults use discounted-return targets with one batched step per
/// episode. Bootstrapped same-index targets over the shared RBF basis drift
/// without bound at these settings; they stay available for comparison.
/// Since `|τ − 1{Δ<0}| ≤ 1` and every feature lies in `(0, 1]`, a head's
/// step norm never exceeds `√d`; a clip below that turns every update into
/// a sign step whose fixed point is the median for all heads, so the default
/// clip only guards against pathological inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub target_mode: TargetMode,
    pub schedule: UpdateSchedule,
    pub eta: f64,
    pub n_epochs: usize,
    pub paths_per_epoch: usize,
    /// Cap applied to terminal payoffs of training episodes.
    pub payoff_cap: Option<f64>,
    pub grad_clip_norm: f64,
    pub base_seed: u64,
    /// `e^{-r dt}`; keep in sync with the market via [`TrainConfig::with_market`].
    pub gamma_per_step: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            target_mode: TargetMode::Return,
            schedule: UpdateSchedule::PerEpisode,
            eta: 0.005,
            n_epochs: 100,
            paths_per_epoch: 100,
            payoff_cap: Some(10.0),
            grad_clip_norm: 10.0,
            base_seed: 0,
            gamma_per_step: MarketParams::default().gamma_per_step(),
        }
    }
}

impl TrainConfig {
    pub fn with_market(mut self, params: &MarketParams) -> Self {
        self.gamma_per_step = params.gamma_per_step();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.gamma_per_step > 0.0 && self.gamma_per_step <= 1.0) {
            return Err(Error::invalid(
                "gamma_per_step",
                format!("must lie in (0,1], got {}", self.gamma_per_step),
            ));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(Error::invalid(
                "grad_clip_norm",
                format!("must be > 0, got {}", self.grad_clip_norm),
            ));
        }
        if self.paths_per_epoch == 0 {
            return Err(Error::invalid("paths_per_epoch", "must be >= 1"));
        }
        market::check_cap(self.payoff_cap)
    }
}

/// Linear quantile heads over a frozen RBF basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    feature_map: FeatureMap,
    taus: Vec<f64>,
    /// `N` rows of length `d`.
    weights: Vec<Vec<f64>>,
}

impl QuantileModel {
    /// Builds a model with the standard midpoint grid for `weights.len()` quantiles.
    pub fn new(feature_map: FeatureMap, weights: Vec<Vec<f64>>) -> Result<Self> {
        let taus = tau_grid(weights.len())?;
        Self::with_taus(feature_map, taus, weights)
    }

    pub fn with_taus(feature_map: FeatureMap, taus: Vec<f64>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if taus.len() != weights.len() || taus.is_empty() {
            return Err(Error::Contract(format!(
                "{} taus for {} weight vectors",
                taus.len(),
                weights.len()
            )));
        }
        for t in &taus {
            check_tau(*t)?;
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("taus", "must be strictly increasing"));
        }
        let d = feature_map.dim();
        if let Some(w) = weights.iter().find(|w| w.len() != d) {
            return Err(Error::Contract(format!(
                "weight vector of length {} does not match feature dimension {d}",
                w.len()
            )));
        }
        Ok(Self {
            feature_map,
            taus,
            weights,
        })
    }

    pub fn zeros(feature_map: FeatureMap, n_quantiles: usize) -> Result<Self> {
        let d = feature_map.dim();
        Self::new(feature_map, vec![vec![0.0; d]; n_quantiles])
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn n_quantiles(&self) -> usize {
        self.taus.len()
    }

    pub fn dim(&self) -> usize {
        self.feature_map.dim()
    }

    /// `θ_i = w_iᵀφ` for a precomputed feature vector.
    pub fn quantiles_at(&self, phi: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| dot(w, phi)).collect()
    }

    /// Unsorted quantile estimates at `state`.
    pub fn predict_quantiles(&self, state: &PathState) -> Result<Vec<f64>> {
        Ok(self.quantiles_at(&self.feature_map.features(state)?))
    }

    /// Mean of the atoms at `state`; at `s_0` this is the time-0 price.
    pub fn price(&self, state: &PathState) -> Result<f64> {
        let q = self.predict_quantiles(state)?;
        Ok(q.iter().sum::<f64>() / q.len() as f64)
    }

    /// Adds `c` to the bias weight of every quantile head.
    pub fn shift_bias(&mut self, c: f64) {
        for w in &mut self.weights {
            w[0] += c;
        }
    }

    /// Clipped semi-gradient step of every head toward `targets` at `state`.
    pub fn semi_gradient_update(&mut self, state: &PathState, targets: &[f64], config: &TrainConfig) -> Result<()> {
        self.check_targets(targets)?;
        let phi = self.feature_map.features(state)?;
        self.update_at(&phi, targets, config);
        Ok(())
    }

    fn check_targets(&self, targets: &[f64]) -> Result<()> {
        if targets.len() != self.n_quantiles() {
            return Err(Error::Contract(format!(
                "{} targets for {} quantiles",
                targets.len(),
                self.n_quantiles()
            )));
        }
        Ok(())
    }

    fn update_at(&mut self, phi: &[f64], targets: &[f64], config: &TrainConfig) {
        let phi_norm = norm(phi);
        for ((w, &tau), &target) in self.weights.iter_mut().zip(&self.taus).zip(targets) {
            semi_gradient_step(w, phi, phi_norm, tau, target, config.eta, config.grad_clip_norm);
        }
    }

    /// One backward sweep over `episode`.
    ///
    /// The terminal state is pulled toward the payoff; every earlier state
    /// `s_t` is pulled toward `γ θ_i(s_{t+1})` evaluated with the weights as
    /// already updated in this sweep, pairing quantile `i` with quantile `i`.
    pub fn train_episode(&mut self, episode: &Episode, config: &TrainConfig) -> Result<()> {
        if episode.states.len() < 2 {
            return Err(Error::Contract("episode needs at least two states".into()));
        }
        if config.schedule == UpdateSchedule::PerEpisode {
            return self.train_episode_batched(episode, config);
        }
        let n = self.n_quantiles();
        let d = self.dim();
        let fm = &self.feature_map;
        let mut phis = vec![0.0; episode.states.len() * d];
        for (st, out) in episode.states.iter().zip(phis.chunks_exact_mut(d)) {
            fm.rbf_features_into(&fm.normalize_state_unbounded(st), out);
        }
        let mut phi_rows = phis.chunks_exact(d).rev();
        let mut next = phi_rows.next().expect("non-empty");
        self.update_at(next, &vec![episode.terminal_payoff; n], config);

        let frozen = match config.target_mode {
            TargetMode::FrozenBootstrap => Some(self.weights.clone()),
            _ => None,
        };
        let mut targets = vec![0.0; n];
        let mut ret = episode.terminal_payoff;
        for phi in phi_rows {
            match config.target_mode {
                TargetMode::Bootstrap | TargetMode::FrozenBootstrap => {
                    let weights = frozen.as_ref().unwrap_or(&self.weights);
                    for (t, w) in targets.iter_mut().zip(weights) {
                        *t = config.gamma_per_step * dot(w, next);
                    }
                }
                TargetMode::Return => {
                    ret *= config.gamma_per_step;
                    targets.fill(ret);
                }
            }
            self.update_at(phi, &targets, config);
            next = phi;
        }
        Ok(())
    }

    fn train_episode_batched(&mut self, episode: &Episode, config: &TrainConfig) -> Result<()> {
        let d = self.dim();
        let len = episode.states.len();
        let fm = &self.feature_map;
        let mut phis = vec![0.0; len * d];
        for (st, out) in episode.states.iter().zip(phis.chunks_exact_mut(d)) {
            fm.rbf_features_into(&fm.normalize_state_unbounded(st), out);
        }
        let rows: Vec<&[f64]> = phis.chunks_exact(d).collect();
        let mut grad = vec![0.0; d];
        for (w, &tau) in self.weights.iter_mut().zip(&self.taus) {
            grad.fill(0.0);
            let mut ret = episode.terminal_payoff;
            for t in (0..len).rev() {
                let target = if t + 1 == len {
                    episode.terminal_payoff
                } else {
                    match config.target_mode {
                        TargetMode::Return => {
                            ret *= config.gamma_per_step;
                            ret
                        }
                        _ => config.gamma_per_step * dot(w, rows[t + 1]),
                    }
                };
                let c = quantile_subgradient(tau, target - dot(w, rows[t]));
                for (g, p) in grad.iter_mut().zip(rows[t]) {
                    *g += c * p;
                }
            }
            let inv = 1.0 / len as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            let gn = norm(&grad);
            let scale = if gn > config.grad_clip_norm {
                config.grad_clip_norm / gn
            } else {
                1.0
            };
            for (wj, g) in w.iter_mut().zip(&grad) {
                *wj += config.eta * scale * g;
            }
        }
        Ok(())
    }
}

/// Degenerate initialization: every head gets all components equal to
/// `mean_estimate / Σ_j φ_j(s_0)`, so every quantile at `s_0` equals the estimate.
pub fn init_model(
    feature_map: FeatureMap,
    n_quantiles: usize,
    mean_estimate: f64,
    initial_state: &PathState,
) -> Result<QuantileModel> {
    if !(mean_estimate >= 0.0) || !mean_estimate.is_finite() {
        return Err(Error::invalid(
            "mean_estimate",
            format!("must be finite and >= 0, got {mean_estimate}"),
        ));
    }
    let phi = feature_map.features(initial_state)?;
    let total: f64 = phi.iter().sum();
    let w = mean_estimate / total;
    let d = feature_map.dim();
    QuantileModel::new(feature_map, vec![vec![w; d]; n_quantiles])
}

/// Episodes of one epoch, generated in parallel from per-path streams and
/// returned in path-index order.
pub fn epoch_episodes(params: &MarketParams, config: &TrainConfig, epoch: u64) -> Result<Vec<Episode>> {
    (0..config.paths_per_epoch as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream_from(seed::training_path_seed(config.base_seed, epoch, i));
            market::build_episode(params, config.payoff_cap, &mut rng)
        })
        .collect()
}

/// Runs `n_epochs` epochs of fresh episodes, carrying weights across
/// epochs. When `monitor` is given, an [`EpochDiagnostics`] row is recorded
/// after each epoch against it.
pub fn train(
    mut model: QuantileModel,
    params: &MarketParams,
    config: &TrainConfig,
    monitor: Option<&PayoffSample>,
) -> Result<(QuantileModel, Vec<EpochDiagnostics>)> {
    params.validate()?;
    config.validate()?;
    let s0 = params.initial_state();
    let monitor = match monitor {
        Some(sample) => Some((sample, oracle::mc_price(sample)?.0)),
        None => None,
    };
    let mut history = Vec::new();
    for epoch in 1..=config.n_epochs {
        for episode in epoch_episodes(params, config, epoch as u64)? {
            model.train_episode(&episode, config)?;
        }
        if let Some((sample, mc)) = monitor {
            let row = diagnostics::epoch_report(epoch, &model, &s0, sample, mc)?;
            log::debug!(
                "epoch {epoch}: price {:.4} mc {:.4} w1 {:.4}",
                row.distrl_price,
                row.mc_price,
                row.w1
            );
            history.push(row);
        }
    }
    Ok((model, history))
}
