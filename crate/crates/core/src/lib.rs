//! Spectral rank aggregation from pairwise comparisons under the
//! Bradley-Terry-Luce model.
//!
//! The central estimator builds the empirical comparison chain `Q̂` from a
//! list of outcomes and returns the stationary distribution of `Q̂·D` for a
//! row-stochastic regularizer `D`:
//!
//! * `D = I` gives plain RankCentrality, which needs a strongly connected
//!   comparison graph;
//! * `D = (1-λ)I + (λ/n)11ᵀ` always yields an ergodic chain, so a ranking is
//!   returned for any amount of data, including none;
//! * a Gaussian diffusion kernel over item features spreads each observed
//!   comparison to neighbouring items.
//!
//! Alongside the estimators the crate ships an ℓ2-penalized BTL maximum
//! likelihood baseline, evaluation metrics, closed-form calculators for the
//! sample-complexity and perturbation bounds, CSV/TOML I/O and a seeded
//! experiment harness.

pub mod error;
pub mod experiment;
pub mod io;
pub mod markov;
pub mod metrics;
pub mod model;
pub mod rank;
pub mod regularize;
pub mod theory;

pub use error::{Error, Result};
pub use markov::{ErgodicityReport, TransitionMatrix};
pub use metrics::MetricRow;
pub use model::{BtlScores, Comparison, ComparisonDataset, FeatureSet, RankingResult, SamplingDistribution};
pub use rank::MleConfig;
pub use regularize::{Regularizer, RegularizerKind};
pub use theory::BoundInputs;
