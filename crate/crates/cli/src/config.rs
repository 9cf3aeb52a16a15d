//! Experiment configuration: a flat JSON object in annual units.
//!
//! Per-step quantities use `dt = 1 / steps_per_year`: drift and variance
//! (and the parameter rectangle) are multiplied by `dt`, as is the
//! risk-free rate. Reported parameters are scaled back by
//! `steps_per_year`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use arc_core::estimation::{EstimatorState, ModelParams, ParameterSpace};
use arc_core::quantization::{build_normal_quantizer, DEFAULT_MAX_ITER, DEFAULT_TOL};
use arc_core::solver::{Continuation, RegionResolution};
use arc_core::{Case, MarketConfig, Quantizer};
use serde::{Deserialize, Serialize};

/// Salt separating the state-grid simulation from the evaluation noise.
const GRID_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn default_steps_per_year() -> usize {
    300
}
fn default_quantizer_size() -> usize {
    10
}
fn default_interval_points() -> usize {
    9
}
fn default_ellipse_angles() -> usize {
    12
}
fn default_ellipse_shells() -> usize {
    6
}
fn default_robust_resolution() -> usize {
    9
}
fn default_adaptive_mu_points() -> usize {
    201
}
fn default_adaptive_var_points() -> usize {
    51
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    /// Annual drift of the excess return under the true model.
    pub mu_star: f64,
    /// Annual volatility under the true model (known in case I).
    pub sigma_star: f64,
    /// Annual risk-free rate.
    pub r: f64,
    pub v0: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Annual variance bounds; case II only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_hi: Option<f64>,
    /// Initial drift estimate (annual).
    pub mu0: f64,
    /// Initial volatility estimate (annual); case II only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    /// Pseudo-observations credited to the initial estimate.
    #[serde(default)]
    pub n0: u64,
    /// Horizons in years.
    pub horizons: Vec<f64>,
    #[serde(default = "default_steps_per_year")]
    pub steps_per_year: usize,
    pub n_paths: usize,
    pub n_grid_paths: usize,
    #[serde(default = "default_quantizer_size")]
    pub quantizer_size: usize,
    #[serde(default = "default_interval_points")]
    pub interval_points: usize,
    #[serde(default = "default_ellipse_angles")]
    pub ellipse_angles: usize,
    #[serde(default = "default_ellipse_shells")]
    pub ellipse_shells: usize,
    /// Points per axis of the robust control's parameter grid.
    #[serde(default = "default_robust_resolution")]
    pub robust_resolution: usize,
    /// Parameter grid of the certainty-equivalent family.
    #[serde(default = "default_adaptive_mu_points")]
    pub adaptive_mu_points: usize,
    #[serde(default = "default_adaptive_var_points")]
    pub adaptive_var_points: usize,
    pub actions: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub continuation: Continuation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_year as f64
    }

    pub fn grid_seed(&self) -> u64 {
        self.seed ^ GRID_SEED_SALT
    }

    pub fn steps(&self, horizon: f64) -> usize {
        (horizon * self.steps_per_year as f64).round() as usize
    }

    pub fn resolution(&self) -> RegionResolution {
        RegionResolution {
            interval_points: self.interval_points,
            ellipse_angles: self.ellipse_angles,
            ellipse_shells: self.ellipse_shells,
        }
    }

    /// Annual parameter rectangle.
    pub fn annual_space(&self) -> Result<ParameterSpace> {
        let space = match self.case {
            Case::MeanOnly => ParameterSpace::known_variance(self.mu_lo, self.mu_hi, self.sigma_star.powi(2)),
            Case::MeanAndVariance => {
                let (Some(lo), Some(hi)) = (self.var_lo, self.var_hi) else {
                    bail!("case II needs var_lo and var_hi");
                };
                ParameterSpace::new(self.mu_lo, self.mu_hi, lo, hi)
            }
        };
        Ok(space?)
    }

    fn initial_var(&self) -> f64 {
        match self.case {
            Case::MeanOnly => self.sigma_star.powi(2),
            Case::MeanAndVariance => self.sigma0.unwrap_or(0.0).powi(2),
        }
    }

    /// Checks the configuration-level invariants, then the per-step market
    /// invariants at every horizon.
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            bail!("invalid configuration: horizons must be non-empty");
        }
        if let Some(h) = self.horizons.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            bail!("invalid configuration: horizons must be positive, got {h}");
        }
        if self.steps_per_year == 0 {
            bail!("invalid configuration: steps_per_year must be positive");
        }
        for &h in &self.horizons {
            if self.steps(h) == 0 {
                bail!("invalid configuration: horizon {h} rounds to zero steps");
            }
        }
        if self.n_paths == 0 || self.n_grid_paths == 0 {
            bail!("invalid configuration: n_paths and n_grid_paths must be positive");
        }
        if self.quantizer_size == 0 {
            bail!("invalid configuration: quantizer_size must be positive");
        }
        if !(self.v0 > 0.0) {
            bail!("invalid configuration: v0 must be positive, got {}", self.v0);
        }
        if !(self.sigma_star >= 0.0) {
            bail!("invalid configuration: sigma_star must be non-negative");
        }
        if self.interval_points < 2 || self.robust_resolution < 2 {
            bail!("invalid configuration: interval_points and robust_resolution must be at least 2");
        }
        if self.ellipse_angles < 4 || self.ellipse_shells < 1 {
            bail!("invalid configuration: ellipse_angles must be >= 4 and ellipse_shells >= 1");
        }
        if self.adaptive_mu_points == 0 || self.adaptive_var_points == 0 {
            bail!("invalid configuration: adaptive grid sizes must be positive");
        }
        match self.case {
            Case::MeanOnly => {
                if self.var_lo.is_some() || self.var_hi.is_some() || self.sigma0.is_some() {
                    bail!("invalid configuration: var_lo, var_hi and sigma0 apply to case II only");
                }
                if !(self.sigma_star > 0.0) {
                    bail!("invalid configuration: case I needs sigma_star > 0");
                }
            }
            Case::MeanAndVariance => {
                if self.sigma0.is_none() {
                    bail!("invalid configuration: case II needs sigma0");
                }
                if self.continuation == Continuation::Linear {
                    bail!("invalid configuration: linear continuation is only available in case I");
                }
            }
        }
        let quantizer = Quantizer::dirac();
        for &h in &self.horizons {
            self.market_with(h, quantizer.clone())?
                .validate()
                .map_err(|e| anyhow::anyhow!("{e} (horizon {h})"))?;
        }
        Ok(())
    }

    pub fn quantizer(&self) -> Result<Quantizer> {
        Ok(build_normal_quantizer(self.quantizer_size, DEFAULT_TOL, DEFAULT_MAX_ITER)?)
    }

    /// Per-step market configuration for one horizon.
    pub fn market(&self, horizon: f64) -> Result<MarketConfig> {
        let m = self.market_with(horizon, self.quantizer()?)?;
        m.validate()?;
        Ok(m)
    }

    fn market_with(&self, horizon: f64, quantizer: Quantizer) -> Result<MarketConfig> {
        let dt = self.dt();
        Ok(MarketConfig {
            rate: self.r * dt,
            dt,
            gamma: self.gamma,
            actions: self.actions.clone(),
            horizon_steps: self.steps(horizon),
            alpha: self.alpha,
            quantizer,
            space: self.annual_space()?.scaled(dt),
            true_params: ModelParams::new(self.mu_star * dt, self.sigma_star.powi(2) * dt),
            initial: EstimatorState::new(self.mu0 * dt, self.initial_var() * dt, self.n0),
        })
    }

    /// Parameters of the certainty-equivalent family (per step).
    pub fn adaptive_grid(&self, market: &MarketConfig) -> Vec<ModelParams> {
        let var_points = match self.case {
            Case::MeanOnly => 1,
            Case::MeanAndVariance => self.adaptive_var_points,
        };
        market.space.grid(self.adaptive_mu_points, var_points)
    }
}
