//! Generic adaptive robust Bellman recursion on the cost scale:
//!
//! ```text
//! W_T(y) = loss(x)
//! W_t(y) = min_a max_{theta in tau(t, c)} sum_i w_i(theta) W_{t+1}(T(t, y, a, z_i(theta)))
//! ```
//!
//! with `y = (x, c)` and `T(t, y, a, z) = (S(x, a, z), R(t, c, z))`. The
//! noise law under `theta` is supplied as a finite weighted sample. The
//! recursion is evaluated exhaustively over the game tree, which keeps it
//! exact and independent of any state discretization; it is meant for
//! small horizons.

use crate::estimation::{EstimatorState, ModelParams, ParameterSpace};
use crate::quantization::Quantizer;

use super::{AdversarySets, Case, StateGrid};

/// Callbacks defining a controlled Markov model with parameter ambiguity.
pub trait RobustModel {
    type State: Clone;
    type Param: Clone;

    fn horizon(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Finite search set `tau(t, c)` for the adversary.
    fn region(&self, t: usize, state: &Self::State) -> Vec<Self::Param>;
    /// Quantized law of the observation under `theta`: `(weight, z)` pairs.
    fn noise(&self, theta: &Self::Param) -> Vec<(f64, f64)>;
    /// Joint transition `T(t, y, a, z)`.
    fn transition(&self, t: usize, state: &Self::State, action: usize, z: f64) -> Self::State;
    /// Terminal cost `loss(x_T)`.
    fn terminal_cost(&self, state: &Self::State) -> f64;
}

/// Optimal cost with the selectors attaining it at the root.
#[derive(Clone, Debug)]
pub struct Decision<P> {
    pub value: f64,
    pub action: Option<usize>,
    pub worst: Option<P>,
}

/// Exhaustive minimax value of `model` from `state` at step `t`. Ties keep
/// the lowest action index and the first parameter of the region.
pub fn minimax<M: RobustModel>(model: &M, t: usize, state: &M::State) -> Decision<M::Param> {
    if t >= model.horizon() {
        return Decision { value: model.terminal_cost(state), action: None, worst: None };
    }
    let region = model.region(t, state);
    let mut best: Option<(f64, usize, M::Param)> = None;
    for a in 0..model.action_count() {
        let mut worst: Option<(f64, &M::Param)> = None;
        for theta in &region {
            let v = model.noise(theta).into_iter().fold(0.0, |acc, (w, z)| {
                acc + w * minimax(model, t + 1, &model.transition(t, state, a, z)).value
            });
            if worst.is_none_or(|(cur, _)| v > cur) {
                worst = Some((v, theta));
            }
        }
        if let Some((v, theta)) = worst {
            if best.as_ref().is_none_or(|(cur, _, _)| v < *cur) {
                best = Some((v, a, theta.clone()));
            }
        }
    }
    match best {
        Some((value, a, theta)) => Decision { value, action: Some(a), worst: Some(theta) },
        None => Decision { value: f64::NAN, action: None, worst: None },
    }
}

/// Wealth-level portfolio model: `x = v`, `S(v, a, z) = v (1 + r + a z)`,
/// `loss(v) = -v^(1-gamma) / (1-gamma)`, `R` the projected estimator
/// recursion. When `grid` is set, the propagated estimator is replaced by
/// its nearest grid state, matching the tabulated solver.
pub struct PortfolioModel<'a> {
    pub rate: f64,
    pub gamma: f64,
    pub actions: &'a [f64],
    pub horizon: usize,
    pub quantizer: &'a Quantizer,
    pub space: ParameterSpace,
    pub case: Case,
    pub adversary: &'a dyn AdversarySets,
    pub grid: Option<&'a StateGrid>,
}

impl RobustModel for PortfolioModel<'_> {
    type State = (f64, EstimatorState);
    type Param = ModelParams;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn region(&self, t: usize, state: &Self::State) -> Vec<ModelParams> {
        self.adversary.candidates(t, &state.1).expect("valid region")
    }

    fn noise(&self, theta: &ModelParams) -> Vec<(f64, f64)> {
        let sigma = theta.sigma();
        self.quantizer.iter().map(|(e, w)| (w, theta.mu + sigma * e)).collect()
    }

    fn transition(&self, t: usize, state: &Self::State, action: usize, z: f64) -> Self::State {
        let (v, c) = state;
        let wealth = v * (1.0 + self.rate + self.actions[action] * z);
        let mut next = self.case.update(c, z, &self.space);
        if let Some(grid) = self.grid {
            if t + 1 < self.horizon {
                next = grid.slice(t + 1)[grid.nearest(t + 1, &next)];
            }
        }
        (wealth, next)
    }

    fn terminal_cost(&self, state: &Self::State) -> f64 {
        -state.0.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }
}
