//! Backward-induction solvers for the portfolio problem.
//!
//! Everything is computed on the utility scale: the investor maximises over
//! actions and the adversary minimises over parameters. With CRRA utility
//! the value factorises as `W_t(v, c) = v^(1 - gamma) * w_t(c)`, so only the
//! normalised value `w_t(c)` is tabulated; `w_T = 1 / (1 - gamma)` carries
//! the sign for both `gamma < 1` and `gamma > 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    discretize_box, discretize_ellipsoid, region_case1, region_case2, update_mean, update_mean_var,
    ConfidenceRegion, EstimatorState, ModelParams, ParameterSpace,
};
use crate::quantization::Quantizer;

mod crra;
pub mod generic;
mod grid;
pub(crate) mod table;

pub use crra::{
    evaluate_policy_worstcase, robust_parameter_set, solve_adaptive_family, solve_adaptive_robust,
    solve_robust, solve_robust_over, solve_true_model, step_utility,
};
pub use grid::{build_state_grid, NearestIndex, StateGrid};
pub use table::{Policy, PolicyRule, ValueSlice, ValueTable};

/// Which parameters are unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Unknown mean, known variance.
    #[serde(rename = "I")]
    MeanOnly,
    /// Unknown mean and variance.
    #[serde(rename = "II")]
    MeanAndVariance,
}

impl Case {
    /// One step of the projected estimator recursion.
    pub fn update(&self, state: &EstimatorState, z: f64, space: &ParameterSpace) -> EstimatorState {
        match self {
            Case::MeanOnly => update_mean(state, z, space),
            Case::MeanAndVariance => update_mean_var(state, z, space),
        }
    }

    /// Number of estimator coordinates.
    pub fn dims(&self) -> usize {
        match self {
            Case::MeanOnly => 1,
            Case::MeanAndVariance => 2,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::MeanOnly => "I",
            Case::MeanAndVariance => "II",
        })
    }
}

/// Control method being solved or simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    True,
    Robust,
    Adaptive,
    AdaptiveRobust,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::True, Method::Robust, Method::Adaptive, Method::AdaptiveRobust];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::True => "true",
            Method::Robust => "robust",
            Method::Adaptive => "adaptive",
            Method::AdaptiveRobust => "adaptive_robust",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method tag `{s}`")))
    }
}

/// Per-step market and solver configuration.
#[derive(Clone, Debug)]
pub struct MarketConfig {
    /// Risk-free rate per step.
    pub rate: f64,
    /// Step length in years.
    pub dt: f64,
    /// CRRA coefficient, `!= 1`.
    pub gamma: f64,
    /// Admissible risky-asset fractions, each in `[0, 1]`.
    pub actions: Vec<f64>,
    pub horizon_steps: usize,
    pub alpha: f64,
    pub quantizer: Quantizer,
    pub space: ParameterSpace,
    /// Data-generating parameters; used for simulation and state grids.
    pub true_params: ModelParams,
    /// Initial estimator state `c_0` (its `n` is the pseudo-observation offset).
    pub initial: EstimatorState,
}

impl MarketConfig {
    /// Checks every invariant the solvers rely on, including positivity of
    /// all gross returns `1 + r + a (mu + sigma z)` over the actions, the
    /// quantizer points and the corners of the parameter rectangle.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.gamma.is_finite() || self.gamma == 1.0 {
            return bad(format!("gamma must be finite and != 1, got {}", self.gamma));
        }
        if self.actions.is_empty() {
            return bad("action set must be non-empty".into());
        }
        if let Some(a) = self.actions.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("actions must lie in [0, 1], got {a}"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.rate.is_finite() && self.rate > -1.0) {
            return bad(format!("per-step rate must be finite and > -1, got {}", self.rate));
        }
        if !(self.dt > 0.0) {
            return bad(format!("step length must be positive, got {}", self.dt));
        }
        self.space.validate()?;
        if !self.space.contains(&self.true_params) {
            return bad(format!(
                "true parameters ({}, {}) lie outside the parameter space",
                self.true_params.mu, self.true_params.var
            ));
        }
        if !self.space.contains(&self.initial.params()) {
            return bad(format!(
                "initial estimate ({}, {}) lies outside the parameter space",
                self.initial.mean, self.initial.var
            ));
        }
        let s = &self.space;
        for &a in &self.actions {
            for &e in self.quantizer.points() {
                for mu in [s.mu_lo, s.mu_hi] {
                    for var in [s.var_lo, s.var_hi] {
                        let g = self.gross(a, mu + var.sqrt() * e);
                        if !(g > 0.0) {
                            return bad(format!(
                                "gross return 1 + r + a z is not positive for a={a}, mu={mu}, var={var}, eps={e}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `1 + r + a z`.
    pub fn gross(&self, a: f64, z: f64) -> f64 {
        1.0 + self.rate + a * z
    }

    pub fn terminal_value(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Same configuration with a different horizon.
    pub fn with_horizon(&self, steps: usize) -> Self {
        Self { horizon_steps: steps, ..self.clone() }
    }
}

/// Supplies the adversary's finite candidate set at `(t, c)`.
pub trait AdversarySets: Sync {
    fn candidates(&self, t: usize, state: &EstimatorState) -> Result<Vec<ModelParams>>;
}

/// The same fixed set at every `(t, c)`; classical robust control, or a
/// singleton for a known model.
#[derive(Clone, Debug)]
pub struct FixedSet(pub Vec<ModelParams>);

impl AdversarySets for FixedSet {
    fn candidates(&self, _t: usize, _state: &EstimatorState) -> Result<Vec<ModelParams>> {
        Ok(self.0.clone())
    }
}

/// Resolution of the adversary's search sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionResolution {
    /// Points on an interval, and per axis of a full rectangle.
    pub interval_points: usize,
    pub ellipse_angles: usize,
    /// Radial shells, excluding the centre.
    pub ellipse_shells: usize,
}

impl Default for RegionResolution {
    fn default() -> Self {
        Self { interval_points: 9, ellipse_angles: 12, ellipse_shells: 6 }
    }
}

/// Discretized confidence regions `tau(t, c)`: intervals with known sigma
/// for [`Case::MeanOnly`], chi-square ellipsoids for [`Case::MeanAndVariance`].
#[derive(Clone, Debug)]
pub struct ConfidenceSets {
    pub case: Case,
    pub alpha: f64,
    pub space: ParameterSpace,
    /// Known standard deviation (mean-only case).
    pub sigma: f64,
    pub resolution: RegionResolution,
}

impl ConfidenceSets {
    pub fn new(cfg: &MarketConfig, case: Case, resolution: RegionResolution) -> Self {
        Self { case, alpha: cfg.alpha, space: cfg.space, sigma: cfg.true_params.sigma(), resolution }
    }

    pub fn region(&self, state: &EstimatorState) -> Result<ConfidenceRegion> {
        match self.case {
            Case::MeanOnly => region_case1(state, self.sigma, self.alpha, &self.space),
            Case::MeanAndVariance => region_case2(state, self.alpha, &self.space),
        }
    }
}

impl AdversarySets for ConfidenceSets {
    fn candidates(&self, _t: usize, state: &EstimatorState) -> Result<Vec<ModelParams>> {
        let region = self.region(state)?;
        Ok(match region {
            ConfidenceRegion::Ellipsoid { .. } => {
                discretize_ellipsoid(&region, self.resolution.ellipse_angles, self.resolution.ellipse_shells)
            }
            _ => discretize_box(&region, self.resolution.interval_points.max(2)),
        })
    }
}

/// How the `t + 1` value table is read at an off-grid estimator state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuation {
    #[default]
    Nearest,
    /// Piecewise-linear in the mean; mean-only case.
    Linear,
}
