//! Distributional TD learning of arithmetic Asian call payoffs.
//!
//! The value distribution of the discounted payoff at a path-augmented
//! state `(S_t, A_t, t)` is represented by `N` quantile heads that are
//! linear in Gaussian RBF features, and trained with backward
//! semi-gradient quantile-regression sweeps over simulated GBM episodes.
//! A plain Monte Carlo oracle provides initialization, per-epoch monitoring,
//! and the final benchmark.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod features;
pub mod learner;
pub mod market;
pub mod model_file;
pub mod oracle;
pub mod seed;

pub use error::{Error, Result};
pub use features::FeatureMap;
pub use learner::{init_model, train, QuantileModel, TrainConfig};
pub use market::{Episode, MarketParams, PathState};
pub use oracle::{PayoffSample, SampleSet};
