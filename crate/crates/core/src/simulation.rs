//! Seeded excess-return paths and the self-financing wealth recursion
//! `V_{t+1} = V_t (1 + r + a_t Z_{t+1})` with online estimator updates.
//!
//! Noise comes from ChaCha20 with one stream per path: path `p` always sees
//! the same draws for a given seed, however many paths are requested and
//! however the work is split across threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{EstimatorState, ModelParams};
use crate::solver::{Case, MarketConfig, Policy};
use crate::solver::table::fmt_f64;

/// Row-major `n_paths x steps` matrix of excess returns.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMatrix {
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    data: Vec<f64>,
}

impl NoiseMatrix {
    pub fn path(&self, p: usize) -> &[f64] {
        &self.data[p * self.steps..(p + 1) * self.steps]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Wraps an explicit matrix; `data.len()` must equal `n_paths * steps`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_paths = rows.len();
        let steps = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != steps) {
            return Err(Error::Structure("noise rows have different lengths".into()));
        }
        Ok(Self { n_paths, steps, seed: 0, data: rows.concat() })
    }
}

/// The per-path standard normal stream used for `Z = mu + sigma eps`.
pub fn path_rng(seed: u64, path: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Draws `z = mu + sigma eps` for `n_paths x steps` entries.
pub fn simulate_noise(theta: &ModelParams, n_paths: usize, steps: usize, seed: u64) -> NoiseMatrix {
    let sigma = theta.sigma();
    let data: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut rng = path_rng(seed, p);
            (0..steps)
                .map(move |_| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    theta.mu + sigma * eps
                })
                .collect::<Vec<_>>()
        })
        .collect();
    NoiseMatrix { n_paths, steps, seed, data }
}

/// Simulated trajectories of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct WealthPaths {
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub case: Case,
    /// `n_paths x (steps + 1)`.
    pub wealth: Vec<f64>,
    /// `n_paths x steps`, the fraction applied on `[t, t+1)`.
    pub actions: Vec<f64>,
    /// Estimator states, `n_paths x (steps + 1)`.
    pub estimates: Vec<EstimatorState>,
}

impl WealthPaths {
    pub fn wealth_path(&self, p: usize) -> &[f64] {
        &self.wealth[p * (self.steps + 1)..(p + 1) * (self.steps + 1)]
    }

    pub fn action_path(&self, p: usize) -> &[f64] {
        &self.actions[p * self.steps..(p + 1) * self.steps]
    }

    pub fn estimate_path(&self, p: usize) -> &[EstimatorState] {
        &self.estimates[p * (self.steps + 1)..(p + 1) * (self.steps + 1)]
    }

    pub fn terminal_wealth(&self) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.wealth_path(p)[self.steps]).collect()
    }

    /// Wealth at step `t` on every path.
    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.wealth_path(p)[t]).collect()
    }

    /// Long form: `path, t, V, action, mean[, var]`. The action column is
    /// empty at `t = T`; estimator columns are multiplied by `param_scale`.
    pub fn write_long_csv<W: Write>(&self, out: W, param_scale: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path", "t", "V", "action", "mean"];
        if self.case == Case::MeanAndVariance {
            header.push("var");
        }
        w.write_record(&header)?;
        for p in 0..self.n_paths {
            let (v, a, c) = (self.wealth_path(p), self.action_path(p), self.estimate_path(p));
            for t in 0..=self.steps {
                let mut row = vec![
                    p.to_string(),
                    t.to_string(),
                    fmt_f64(v[t]),
                    a.get(t).map(|x| fmt_f64(*x)).unwrap_or_default(),
                    fmt_f64(c[t].mean * param_scale),
                ];
                if self.case == Case::MeanAndVariance {
                    row.push(fmt_f64(c[t].var * param_scale));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Rolls `policy` forward along every noise path from wealth `v0` and the
/// configuration's initial estimate. The policy is queried at the current
/// estimator state; the estimator absorbs `z_{t+1}` after the wealth step.
pub fn run_strategy(
    policy: &Policy,
    noise: &NoiseMatrix,
    cfg: &MarketConfig,
    case: Case,
    v0: f64,
) -> Result<WealthPaths> {
    let steps = cfg.horizon_steps;
    if noise.steps != steps {
        return Err(Error::Structure(format!("noise has {} steps, horizon is {steps}", noise.steps)));
    }
    if !(v0 > 0.0) {
        return Err(Error::InvalidConfig(format!("initial wealth must be positive, got {v0}")));
    }
    let per_path: Vec<(Vec<f64>, Vec<f64>, Vec<EstimatorState>)> = (0..noise.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut v = v0;
            let mut c = cfg.initial;
            let mut wealth = Vec::with_capacity(steps + 1);
            let mut actions = Vec::with_capacity(steps);
            let mut estimates = Vec::with_capacity(steps + 1);
            wealth.push(v);
            estimates.push(c);
            for (t, &z) in noise.path(p).iter().enumerate() {
                let a = policy.action(t, &c)?;
                v *= 1.0 + cfg.rate + a * z;
                c = case.update(&c, z, &cfg.space);
                wealth.push(v);
                actions.push(a);
                estimates.push(c);
            }
            Ok((wealth, actions, estimates))
        })
        .collect::<Result<_>>()?;

    let mut out = WealthPaths {
        n_paths: noise.n_paths,
        steps,
        seed: noise.seed,
        case,
        wealth: Vec::with_capacity(noise.n_paths * (steps + 1)),
        actions: Vec::with_capacity(noise.n_paths * steps),
        estimates: Vec::with_capacity(noise.n_paths * (steps + 1)),
    };
    for (w, a, c) in per_path {
        out.wealth.extend(w);
        out.actions.extend(a);
        out.estimates.extend(c);
    }
    Ok(out)
}
