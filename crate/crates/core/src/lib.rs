//! Adaptive robust control for a discrete-time portfolio problem with
//! unknown drift (and optionally unknown variance) of the risky asset.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantization`]: optimal quantizers of the standard normal law and the
//!   scalar quantile functions used to size confidence regions.
//! - [`estimation`]: recursive, projected estimators of `(mu, sigma^2)` and
//!   the confidence regions built around them.
//! - [`solver`]: backward induction for the true-model, robust, adaptive
//!   (certainty equivalent) and adaptive robust controls, plus a generic
//!   minimax engine over abstract transition/region/loss callbacks.
//! - [`simulation`]: seeded excess-return paths and the wealth recursion.
//! - [`metrics`]: terminal-wealth statistics (mean, std, 95% VaR, GLR).
//!
//! All model quantities are per rebalancing step. Annualisation is the
//! caller's concern.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod metrics;
pub mod quantization;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
pub use estimation::{ConfidenceRegion, EstimatorState, ModelParams, ParameterSpace};
pub use quantization::Quantizer;
pub use solver::{Case, MarketConfig, Method, Policy, StateGrid, ValueTable};
