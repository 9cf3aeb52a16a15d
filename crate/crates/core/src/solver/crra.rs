use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{EstimatorState, ModelParams, ParameterSpace};
use crate::quantization::Quantizer;

use super::table::{Policy, PolicyRule, ValueSlice, ValueTable};
use super::{AdversarySets, Continuation, MarketConfig, Method, NearestIndex, StateGrid};

/// One-step CRRA factor times continuation:
/// `sum_i w_i (1 + r + a (mu + sigma z_i))^(1 - gamma) * cont(propagate(c, mu + sigma z_i))`.
#[allow(clippy::too_many_arguments)]
pub fn step_utility<S, C, P>(
    a: f64,
    theta: &ModelParams,
    q: &Quantizer,
    r: f64,
    gamma: f64,
    continuation: C,
    propagate: P,
    c: &S,
) -> f64
where
    C: Fn(&S) -> f64,
    P: Fn(&S, f64) -> S,
{
    let sigma = theta.sigma();
    let power = 1.0 - gamma;
    q.iter().fold(0.0, |acc, (e, w)| {
        let z = theta.mu + sigma * e;
        acc + w * crra_power(1.0 + r + a * z, power) * continuation(&propagate(c, z))
    })
}

/// `g^power`, by repeated multiplication when the exponent is a small integer.
#[inline]
pub(crate) fn crra_power(g: f64, power: f64) -> f64 {
    if power.fract() == 0.0 && power.abs() <= 64.0 {
        g.powi(power as i32)
    } else {
        g.powf(power)
    }
}

/// `max_a min_k eval(a, k)` over the action set (or the single `fixed`
/// action). Ties keep the lowest action index and the first parameter.
fn max_min<F>(actions: &[f64], n_params: usize, fixed: Option<usize>, eval: F) -> (f64, usize, usize)
where
    F: Fn(f64, usize) -> f64,
{
    let mut best: Option<(f64, usize, usize)> = None;
    let choices: Box<dyn Iterator<Item = usize>> = match fixed {
        Some(i) => Box::new(std::iter::once(i)),
        None => Box::new(0..actions.len()),
    };
    for i in choices {
        let a = actions[i];
        let mut worst: Option<(f64, usize)> = None;
        for k in 0..n_params {
            let v = eval(a, k);
            if worst.is_none_or(|(w, _)| v < w) {
                worst = Some((v, k));
            }
        }
        let (v, k) = worst.expect("non-empty parameter set");
        if best.is_none_or(|(b, _, _)| v > b) {
            best = Some((v, i, k));
        }
    }
    best.expect("non-empty action set")
}

/// Scalar recursion `w_t = max_a min_{theta in set} E_theta[g^(1-gamma)] w_{t+1}`.
fn solve_scalar(cfg: &MarketConfig, set: &[ModelParams], method: Method) -> Result<(ValueTable, Policy)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::InvalidConfig("parameter set for the scalar recursion is empty".into()));
    }
    let steps = cfg.horizon_steps;
    let mut next = cfg.terminal_value();
    let mut slices = Vec::with_capacity(steps);
    let mut schedule = vec![0; steps];
    for t in (0..steps).rev() {
        let (value, a, k) = max_min(&cfg.actions, set.len(), None, |a, k| {
            step_utility(a, &set[k], &cfg.quantizer, cfg.rate, cfg.gamma, |_| next, |_, _| (), &())
        });
        schedule[t] = a;
        slices.push(ValueSlice { states: vec![cfg.initial], values: vec![value], actions: vec![a], worst: vec![set[k]] });
        next = value;
    }
    slices.reverse();
    let table =
        ValueTable { method, actions: cfg.actions.clone(), terminal: cfg.terminal_value(), state_dims: 0, slices };
    Ok((table, Policy::schedule(method, cfg.actions.clone(), schedule)))
}

/// Known-parameter control: scalar recursion at `theta`.
pub fn solve_true_model(cfg: &MarketConfig, theta: &ModelParams) -> Result<(ValueTable, Policy)> {
    if !cfg.space.contains(theta) {
        return Err(Error::InvalidConfig(format!(
            "parameter ({}, {}) lies outside the parameter space",
            theta.mu, theta.var
        )));
    }
    solve_scalar(cfg, std::slice::from_ref(theta), Method::True)
}

/// Tensor discretization of the full rectangle used by the classical robust
/// control: `resolution` points per non-degenerate axis, corners included.
pub fn robust_parameter_set(space: &ParameterSpace, resolution: usize) -> Vec<ModelParams> {
    let resolution = resolution.max(2);
    space.grid(resolution, resolution)
}

/// Classical (equivalently, strong) robust control over the discretized
/// rectangle.
pub fn solve_robust(cfg: &MarketConfig, resolution: usize) -> Result<(ValueTable, Policy)> {
    solve_robust_over(cfg, &robust_parameter_set(&cfg.space, resolution))
}

/// Robust control against an explicit finite parameter set.
pub fn solve_robust_over(cfg: &MarketConfig, set: &[ModelParams]) -> Result<(ValueTable, Policy)> {
    solve_scalar(cfg, set, Method::Robust)
}

/// Certainty-equivalent control: the known-parameter schedule for every
/// parameter of `theta_grid`, selected at run time by the parameter nearest
/// to the current estimate.
///
/// The returned table stacks the per-parameter recursions; row `k` of each
/// slice belongs to `theta_grid[k]`.
pub fn solve_adaptive_family(cfg: &MarketConfig, theta_grid: &[ModelParams]) -> Result<(ValueTable, Policy)> {
    cfg.validate()?;
    if theta_grid.is_empty() {
        return Err(Error::InvalidConfig("adaptive parameter grid is empty".into()));
    }
    let solved: Vec<(ValueTable, Policy)> =
        theta_grid.par_iter().map(|theta| solve_true_model(cfg, theta)).collect::<Result<_>>()?;

    let steps = cfg.horizon_steps;
    let slices = (0..steps)
        .map(|t| {
            let mut slice = ValueSlice { states: vec![], values: vec![], actions: vec![], worst: vec![] };
            for (theta, (table, _)) in theta_grid.iter().zip(&solved) {
                let s = &table.slices[t];
                slice.states.push(EstimatorState::new(theta.mu, theta.var, cfg.initial.n + t as u64));
                slice.values.push(s.values[0]);
                slice.actions.push(s.actions[0]);
                slice.worst.push(s.worst[0]);
            }
            slice
        })
        .collect();
    let schedules = solved
        .iter()
        .map(|(_, policy)| match &policy.rule {
            PolicyRule::Schedule(s) => s.clone(),
            _ => unreachable!("scalar recursions return schedules"),
        })
        .collect();
    let dims = if cfg.space.var_width() > 0.0 { 2 } else { 1 };
    let table = ValueTable {
        method: Method::Adaptive,
        actions: cfg.actions.clone(),
        terminal: cfg.terminal_value(),
        state_dims: dims,
        slices,
    };
    let policy = Policy {
        method: Method::Adaptive,
        actions: cfg.actions.clone(),
        horizon: steps,
        rule: PolicyRule::Family {
            params: theta_grid.to_vec(),
            index: NearestIndex::new(theta_grid, &cfg.space),
            schedules,
        },
    };
    Ok((table, policy))
}

/// Adaptive robust control on a simulated state grid.
///
/// At each `(t, c)` the adversary picks from `adversary.candidates(t, c)`;
/// the continuation is read from the `t + 1` table at the propagated
/// estimator state. The recorded selectors reproduce the recorded values.
pub fn solve_adaptive_robust(
    cfg: &MarketConfig,
    grid: &StateGrid,
    adversary: &dyn AdversarySets,
    continuation: Continuation,
) -> Result<(ValueTable, Policy)> {
    let table = grid_backward(cfg, grid, adversary, continuation, Method::AdaptiveRobust, None)?;
    let actions = table.slices.iter().map(|s| s.actions.clone()).collect();
    let policy = Policy {
        method: Method::AdaptiveRobust,
        actions: cfg.actions.clone(),
        horizon: cfg.horizon_steps,
        rule: PolicyRule::Grid { grid: grid.clone(), actions },
    };
    Ok((table, policy))
}

/// Worst-case value of a fixed policy: the adversary best-responds by
/// backward induction on the same grid and search sets.
pub fn evaluate_policy_worstcase(
    cfg: &MarketConfig,
    policy: &Policy,
    grid: &StateGrid,
    adversary: &dyn AdversarySets,
    continuation: Continuation,
) -> Result<ValueTable> {
    if policy.actions != cfg.actions {
        return Err(Error::InvalidConfig("policy and configuration use different action sets".into()));
    }
    grid_backward(cfg, grid, adversary, continuation, policy.method, Some(policy))
}

fn grid_backward(
    cfg: &MarketConfig,
    grid: &StateGrid,
    adversary: &dyn AdversarySets,
    continuation: Continuation,
    method: Method,
    fixed: Option<&Policy>,
) -> Result<ValueTable> {
    cfg.validate()?;
    let steps = cfg.horizon_steps;
    if grid.horizon() != steps {
        return Err(Error::Structure(format!(
            "state grid covers {} steps but the horizon is {steps}",
            grid.horizon()
        )));
    }
    let case = grid.case();
    if continuation == Continuation::Linear && case.dims() != 1 {
        return Err(Error::InvalidConfig("linear continuation is only available for the mean-only case".into()));
    }
    let terminal = cfg.terminal_value();
    let power = 1.0 - cfg.gamma;
    let mut next_values = vec![terminal; grid.slice(steps).len()];
    let mut slices = Vec::with_capacity(steps);

    for t in (0..steps).rev() {
        let next_slice = grid.slice(t + 1);
        let lookup = |s: &EstimatorState| -> f64 {
            if t + 1 == steps {
                return terminal;
            }
            match continuation {
                Continuation::Nearest => next_values[grid.nearest(t + 1, s)],
                Continuation::Linear => interpolate_mean(next_slice, &next_values, s.mean),
            }
        };
        let solved: Vec<(f64, usize, ModelParams)> = grid
            .slice(t)
            .par_iter()
            .map(|c| {
                let candidates = adversary.candidates(t, c)?;
                if candidates.is_empty() {
                    return Err(Error::Structure(format!(
                        "adversary has no candidates at t={t}, state=({}, {})",
                        c.mean, c.var
                    )));
                }
                // (weight, z, continuation) per candidate and quantizer point;
                // the propagated state does not depend on the action.
                let outcomes: Vec<Vec<(f64, f64, f64)>> = candidates
                    .iter()
                    .map(|theta| {
                        let sigma = theta.sigma();
                        cfg.quantizer
                            .iter()
                            .map(|(e, w)| {
                                let z = theta.mu + sigma * e;
                                (w, z, lookup(&case.update(c, z, &cfg.space)))
                            })
                            .collect()
                    })
                    .collect();
                let fixed_action = fixed.map(|p| p.action_index(t, c)).transpose()?;
                let (v, a, k) = max_min(&cfg.actions, candidates.len(), fixed_action, |a, k| {
                    outcomes[k].iter().fold(0.0, |acc, &(w, z, cont)| acc + w * crra_power(1.0 + cfg.rate + a * z, power) * cont)
                });
                Ok((v, a, candidates[k]))
            })
            .collect::<Result<_>>()?;

        let states = grid.slice(t).to_vec();
        let mut slice = ValueSlice {
            states,
            values: Vec::with_capacity(solved.len()),
            actions: Vec::with_capacity(solved.len()),
            worst: Vec::with_capacity(solved.len()),
        };
        for (v, a, theta) in solved {
            slice.values.push(v);
            slice.actions.push(a);
            slice.worst.push(theta);
        }
        next_values = slice.values.clone();
        slices.push(slice);
    }
    slices.reverse();
    Ok(ValueTable {
        method,
        actions: cfg.actions.clone(),
        terminal,
        state_dims: case.dims(),
        slices,
    })
}

/// Piecewise-linear interpolation in the mean over a slice sorted by mean,
/// flat beyond the end points.
fn interpolate_mean(states: &[EstimatorState], values: &[f64], x: f64) -> f64 {
    let pos = states.partition_point(|s| s.mean < x);
    if pos == 0 {
        return values[0];
    }
    if pos == states.len() {
        return values[states.len() - 1];
    }
    let (x0, x1) = (states[pos - 1].mean, states[pos].mean);
    let lambda = (x - x0) / (x1 - x0);
    values[pos - 1] + lambda * (values[pos] - values[pos - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_on_nodes_and_flat_outside() {
        let states: Vec<EstimatorState> = [0.0, 1.0, 3.0].iter().map(|&m| EstimatorState::new(m, 0.1, 2)).collect();
        let values = [1.0, 3.0, 7.0];
        assert_eq!(interpolate_mean(&states, &values, 1.0), 3.0);
        assert_eq!(interpolate_mean(&states, &values, 2.0), 5.0);
        assert_eq!(interpolate_mean(&states, &values, -4.0), 1.0);
        assert_eq!(interpolate_mean(&states, &values, 9.0), 7.0);
    }

    #[test]
    fn max_min_tie_breaking() {
        let actions = [0.0, 0.5, 1.0];
        // All equal: lowest action, first parameter.
        assert_eq!(max_min(&actions, 3, None, |_, _| 1.0), (1.0, 0, 0));
        // Adversary's min over k is 0 for k = 1 regardless of a.
        let (v, a, k) = max_min(&actions, 3, None, |a, k| if k == 1 { a } else { 5.0 });
        assert_eq!((v, a, k), (1.0, 2, 1));
        assert_eq!(max_min(&actions, 2, Some(1), |a, k| a + k as f64), (0.5, 1, 0));
    }
}
