use std::io::Write;

use crate::error::{Error, Result};
use crate::estimation::{EstimatorState, ModelParams};

use super::{Method, NearestIndex, StateGrid};

/// Solved values and selectors at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSlice {
    pub states: Vec<EstimatorState>,
    pub values: Vec<f64>,
    /// Index into the action set (the optimal selector).
    pub actions: Vec<usize>,
    /// Parameter attaining the adversary's minimum for the chosen action.
    pub worst: Vec<ModelParams>,
}

/// Normalised value function `w_t(c)` with its selectors, `t = 0..T-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub method: Method,
    pub actions: Vec<f64>,
    pub terminal: f64,
    /// Estimator coordinates written per row (0 for scalar recursions).
    pub state_dims: usize,
    pub slices: Vec<ValueSlice>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.slices.len()
    }

    /// `w_0` at the first state of slice 0, or the terminal value when `T = 0`.
    pub fn initial_value(&self) -> f64 {
        self.slices.first().map_or(self.terminal, |s| s.values[0])
    }

    /// Value at step `t`, `w_T` included.
    pub fn value(&self, t: usize, i: usize) -> f64 {
        if t == self.slices.len() {
            self.terminal
        } else {
            self.slices[t].values[i]
        }
    }

    /// CSV rows `t, [mean, [var,]] value, action, worst_mu, worst_var`.
    /// Parameter-valued columns are multiplied by `param_scale`.
    pub fn write_csv<W: Write>(&self, out: W, param_scale: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t"];
        header.extend(["mean", "var"].iter().take(self.state_dims));
        header.extend(["value", "action", "worst_mu", "worst_var"]);
        w.write_record(&header)?;
        for (t, slice) in self.slices.iter().enumerate() {
            for i in 0..slice.values.len() {
                let s = &slice.states[i];
                let mut row = vec![t.to_string()];
                row.extend([s.mean, s.var].iter().take(self.state_dims).map(|v| fmt_f64(v * param_scale)));
                row.push(fmt_f64(slice.values[i]));
                row.push(fmt_f64(self.actions[slice.actions[i]]));
                row.push(fmt_f64(slice.worst[i].mu * param_scale));
                row.push(fmt_f64(slice.worst[i].var * param_scale));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// How a policy maps `(t, c)` to an action.
#[derive(Clone, Debug)]
pub enum PolicyRule {
    /// One action per step, state ignored.
    Schedule(Vec<usize>),
    /// Action of the nearest grid state at `t`.
    Grid { grid: StateGrid, actions: Vec<Vec<usize>> },
    /// Certainty equivalence: schedule of the parameter nearest to the
    /// current estimate. `schedules[k][t]` belongs to parameter `k`.
    Family { params: Vec<ModelParams>, index: NearestIndex, schedules: Vec<Vec<usize>> },
}

/// A feedback rule defined on `t = 0..T-1`.
#[derive(Clone, Debug)]
pub struct Policy {
    pub method: Method,
    pub actions: Vec<f64>,
    pub horizon: usize,
    pub rule: PolicyRule,
}

impl Policy {
    /// Action index for estimator state `state` at step `t`.
    pub fn action_index(&self, t: usize, state: &EstimatorState) -> Result<usize> {
        let fail = || Error::PolicyLookup { t, mean: state.mean, var: state.var };
        if t >= self.horizon {
            return Err(fail());
        }
        let idx = match &self.rule {
            PolicyRule::Schedule(schedule) => schedule.get(t).copied(),
            PolicyRule::Grid { grid, actions } => actions.get(t).map(|a| a[grid.nearest(t, state)]),
            PolicyRule::Family { index, schedules, .. } => {
                index.nearest(&state.params()).and_then(|k| schedules[k].get(t).copied())
            }
        };
        idx.filter(|&i| i < self.actions.len()).ok_or_else(fail)
    }

    pub fn action(&self, t: usize, state: &EstimatorState) -> Result<f64> {
        Ok(self.actions[self.action_index(t, state)?])
    }

    /// Rule that ignores the state: index `actions[t]` at every step.
    pub fn schedule(method: Method, actions: Vec<f64>, schedule: Vec<usize>) -> Self {
        Self { method, actions, horizon: schedule.len(), rule: PolicyRule::Schedule(schedule) }
    }
}
