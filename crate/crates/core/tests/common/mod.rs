#![allow(dead_code)]

use arc_core::estimation::{EstimatorState, ModelParams, ParameterSpace};
use arc_core::quantization::{build_normal_quantizer, DEFAULT_MAX_ITER, DEFAULT_TOL};
use arc_core::{MarketConfig, Quantizer};

pub const STEPS_PER_YEAR: f64 = 300.0;

pub fn quantizer(n: usize) -> Quantizer {
    build_normal_quantizer(n, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
}

pub fn actions(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Mean-only market in per-step units, annual inputs.
pub fn case1(steps: usize, mu_lo: f64, mu_hi: f64) -> MarketConfig {
    let dt = 1.0 / STEPS_PER_YEAR;
    MarketConfig {
        rate: 0.02 * dt,
        dt,
        gamma: 5.0,
        actions: actions(11),
        horizon_steps: steps,
        alpha: 0.1,
        quantizer: quantizer(10),
        space: ParameterSpace::known_variance(mu_lo, mu_hi, 0.09).unwrap().scaled(dt),
        true_params: ModelParams::new(0.07 * dt, 0.09 * dt),
        initial: EstimatorState::new(0.1 * dt, 0.09 * dt, 0),
    }
}

/// Mean and variance unknown, per-step units.
pub fn case2(steps: usize) -> MarketConfig {
    let dt = 1.0 / STEPS_PER_YEAR;
    MarketConfig {
        rate: 0.02 * dt,
        dt,
        gamma: 20.0,
        actions: actions(11),
        horizon_steps: steps,
        alpha: 0.1,
        quantizer: quantizer(10),
        space: ParameterSpace::new(-1.0, 1.0, 0.0, 0.5).unwrap().scaled(dt),
        true_params: ModelParams::new(0.09 * dt, 0.09 * dt),
        initial: EstimatorState::new(0.1 * dt, 0.16 * dt, 0),
    }
}
