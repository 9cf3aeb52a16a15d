//! Projected recursive estimators and the confidence regions around them.
//!
//! The estimator state `C_t = (mean, var)` is updated one observation at a
//! time and clamped back into the parameter rectangle after every step.
//! Confidence regions are always intersected with that rectangle, so the
//! adversary can only pick admissible parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantization::{chi2_2_quantile, normal_quantile};

/// Point `(mu, sigma^2)` of the excess-return law `Z = mu + sigma * eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub var: f64,
}

impl ModelParams {
    pub fn new(mu: f64, var: f64) -> Self {
        Self { mu, var }
    }

    pub fn sigma(&self) -> f64 {
        self.var.max(0.0).sqrt()
    }
}

/// Compact rectangle `[mu_lo, mu_hi] x [var_lo, var_hi]` of admissible
/// parameters. A known variance is expressed as `var_lo == var_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub var_lo: f64,
    pub var_hi: f64,
}

impl ParameterSpace {
    pub fn new(mu_lo: f64, mu_hi: f64, var_lo: f64, var_hi: f64) -> Result<Self> {
        let space = Self { mu_lo, mu_hi, var_lo, var_hi };
        space.validate()?;
        Ok(space)
    }

    /// Rectangle with a single known variance.
    pub fn known_variance(mu_lo: f64, mu_hi: f64, var: f64) -> Result<Self> {
        Self::new(mu_lo, mu_hi, var, var)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu_lo, self.mu_hi, self.var_lo, self.var_hi].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("parameter space bounds must be finite".into()));
        }
        if self.mu_lo > self.mu_hi {
            return Err(Error::InvalidConfig(format!(
                "parameter space needs mu_lo <= mu_hi, got [{}, {}]",
                self.mu_lo, self.mu_hi
            )));
        }
        if !(0.0 <= self.var_lo && self.var_lo <= self.var_hi) {
            return Err(Error::InvalidConfig(format!(
                "parameter space needs 0 <= var_lo <= var_hi, got [{}, {}]",
                self.var_lo, self.var_hi
            )));
        }
        Ok(())
    }

    pub fn mu_width(&self) -> f64 {
        self.mu_hi - self.mu_lo
    }

    pub fn var_width(&self) -> f64 {
        self.var_hi - self.var_lo
    }

    pub fn contains(&self, p: &ModelParams) -> bool {
        (self.mu_lo..=self.mu_hi).contains(&p.mu) && (self.var_lo..=self.var_hi).contains(&p.var)
    }

    /// Same rectangle with both coordinates multiplied by `factor`; used to
    /// move between annual and per-step units.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mu_lo: self.mu_lo * factor,
            mu_hi: self.mu_hi * factor,
            var_lo: self.var_lo * factor,
            var_hi: self.var_hi * factor,
        }
    }

    /// Tensor grid with `mu_points x var_points` nodes including all
    /// corners, `mu` varying slowest. Degenerate axes contribute one node.
    pub fn grid(&self, mu_points: usize, var_points: usize) -> Vec<ModelParams> {
        let mus = linspace(self.mu_lo, self.mu_hi, mu_points);
        let vars = linspace(self.var_lo, self.var_hi, var_points);
        mus.iter()
            .flat_map(|&mu| vars.iter().map(move |&var| ModelParams { mu, var }))
            .collect()
    }
}

/// `points` equally spaced values from `lo` to `hi` inclusive; a single
/// value when the range is degenerate or `points < 2`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 || lo == hi {
        return vec![lo];
    }
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => lo + (hi - lo) * (i as f64 / last),
        })
        .collect()
}

/// Closest point of the rectangle, i.e. the coordinatewise clamp.
pub fn project(p: ModelParams, space: &ParameterSpace) -> ModelParams {
    ModelParams {
        mu: p.mu.clamp(space.mu_lo, space.mu_hi),
        var: p.var.clamp(space.var_lo, space.var_hi),
    }
}

/// Recursive statistic: current estimate and the number of observations
/// (plus any pseudo-observation offset) it summarises.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub mean: f64,
    pub var: f64,
    pub n: u64,
}

impl EstimatorState {
    pub fn new(mean: f64, var: f64, n: u64) -> Self {
        Self { mean, var, n }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams { mu: self.mean, var: self.var }
    }
}

/// Sample-mean recursion `m' = P(t/(t+1) m + z/(t+1))`; variance untouched.
pub fn update_mean(state: &EstimatorState, z: f64, space: &ParameterSpace) -> EstimatorState {
    let (prior, fresh) = recursion_weights(state.n);
    let mean = (prior * state.mean + fresh * z).clamp(space.mu_lo, space.mu_hi);
    EstimatorState { mean, var: state.var, n: state.n + 1 }
}

/// Joint mean/variance recursion with projection:
///
/// `m' = t/(t+1) m + z/(t+1)`,
/// `v' = t/(t+1) v + t/(t+1)^2 (m - z)^2`.
pub fn update_mean_var(state: &EstimatorState, z: f64, space: &ParameterSpace) -> EstimatorState {
    let (mean, var) = raw_mean_var_update(state.mean, state.var, state.n, z);
    let p = project(ModelParams { mu: mean, var }, space);
    EstimatorState { mean: p.mu, var: p.var, n: state.n + 1 }
}

fn recursion_weights(n: u64) -> (f64, f64) {
    let t = n as f64;
    (t / (t + 1.0), 1.0 / (t + 1.0))
}

/// Unprojected joint recursion; equals the batch sample mean and biased
/// sample variance when started from `n = 0`.
pub fn raw_mean_var_update(mean: f64, var: f64, n: u64, z: f64) -> (f64, f64) {
    let t = n as f64;
    let (prior, fresh) = recursion_weights(n);
    let dev = mean - z;
    (prior * mean + fresh * z, prior * var + t / ((t + 1.0) * (t + 1.0)) * dev * dev)
}

/// Confidence region for the unknown parameter, already intersected with
/// the parameter rectangle `clip`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConfidenceRegion {
    /// `[mu - radius, mu + radius] ∩ [mu_lo, mu_hi]` at the centre's
    /// (known) variance. `radius` is infinite when no data has been seen.
    Interval { center: ModelParams, radius: f64, clip: ParameterSpace },
    /// `{ n/v (m - mu)^2 + n/(2 v^2) (v - s2)^2 <= kappa } ∩ clip`.
    Ellipsoid { center: ModelParams, n: f64, kappa: f64, clip: ParameterSpace },
    /// The whole rectangle (no usable information yet).
    Full { clip: ParameterSpace },
}

impl ConfidenceRegion {
    pub fn clip(&self) -> &ParameterSpace {
        match self {
            Self::Interval { clip, .. } | Self::Ellipsoid { clip, .. } | Self::Full { clip } => clip,
        }
    }

    /// Bounding box of the clipped region as `(mu_lo, mu_hi, var_lo, var_hi)`.
    pub fn bounds(&self) -> ParameterSpace {
        match *self {
            Self::Interval { center, radius, clip } => ParameterSpace {
                mu_lo: (center.mu - radius).max(clip.mu_lo),
                mu_hi: (center.mu + radius).min(clip.mu_hi),
                var_lo: center.var,
                var_hi: center.var,
            },
            Self::Ellipsoid { center, n, kappa, clip } => {
                let (dmu, dvar) = ellipsoid_half_axes(center, n, kappa);
                ParameterSpace {
                    mu_lo: (center.mu - dmu).max(clip.mu_lo),
                    mu_hi: (center.mu + dmu).min(clip.mu_hi),
                    var_lo: (center.var - dvar).max(clip.var_lo),
                    var_hi: (center.var + dvar).min(clip.var_hi),
                }
            }
            Self::Full { clip } => clip,
        }
    }

    /// Left-hand side of the ellipsoid inequality at `p`; `None` for other
    /// region kinds.
    pub fn ellipsoid_statistic(&self, p: &ModelParams) -> Option<f64> {
        match *self {
            Self::Ellipsoid { center, n, .. } => {
                let dm = center.mu - p.mu;
                let dv = center.var - p.var;
                Some(n / center.var * dm * dm + n / (2.0 * center.var * center.var) * dv * dv)
            }
            _ => None,
        }
    }

    /// Membership test. Boundary points produced by [`discretize_region`]
    /// pass despite rounding: a relative slack of `1e-9` is allowed.
    pub fn contains(&self, p: &ModelParams) -> bool {
        if !self.clip().contains(p) {
            return false;
        }
        match *self {
            Self::Interval { center, radius, .. } => {
                p.var == center.var && (p.mu - center.mu).abs() <= radius * (1.0 + 1e-9)
            }
            Self::Ellipsoid { kappa, .. } => {
                let stat = self.ellipsoid_statistic(p).expect("ellipsoid");
                stat <= kappa * (1.0 + 1e-9)
            }
            Self::Full { .. } => true,
        }
    }
}

fn ellipsoid_half_axes(center: ModelParams, n: f64, kappa: f64) -> (f64, f64) {
    ((kappa * center.var / n).sqrt(), center.var * (2.0 * kappa / n).sqrt())
}

/// Level-`(1 - alpha)` interval for the mean with known `sigma`:
/// `[m - sigma/sqrt(n) q, m + sigma/sqrt(n) q]`, `q = Phi^{-1}(1 - alpha/2)`.
/// With `n = 0` the whole `[mu_lo, mu_hi]` is returned.
pub fn region_case1(
    state: &EstimatorState,
    sigma: f64,
    alpha: f64,
    space: &ParameterSpace,
) -> Result<ConfidenceRegion> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("known sigma must be positive, got {sigma}")));
    }
    check_alpha(alpha)?;
    let center = project(state.params(), space);
    let radius = if state.n == 0 {
        f64::INFINITY
    } else {
        sigma / (state.n as f64).sqrt() * normal_quantile(1.0 - 0.5 * alpha)?
    };
    Ok(ConfidenceRegion::Interval { center, radius, clip: *space })
}

/// Level-`(1 - alpha)` ellipsoid for `(mu, sigma^2)` with
/// `kappa = chi2_2^{-1}(1 - alpha)`. The full rectangle when `n = 0` or the
/// variance estimate is zero.
pub fn region_case2(state: &EstimatorState, alpha: f64, space: &ParameterSpace) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    let center = project(state.params(), space);
    if state.n == 0 || !(center.var > 0.0) {
        return Ok(ConfidenceRegion::Full { clip: *space });
    }
    Ok(ConfidenceRegion::Ellipsoid {
        center,
        n: state.n as f64,
        kappa: chi2_2_quantile(1.0 - alpha)?,
        clip: *space,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("confidence level alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Finite search set for the adversary.
///
/// * interval: `resolution` equally spaced points including both ends;
/// * ellipsoid: `resolution` angles times `resolution - 1` radial shells
///   plus the centre (see [`discretize_ellipsoid`]);
/// * full rectangle: `resolution x resolution` tensor grid.
pub fn discretize_region(region: &ConfidenceRegion, resolution: usize) -> Vec<ModelParams> {
    let resolution = resolution.max(2);
    match region {
        ConfidenceRegion::Ellipsoid { .. } => discretize_ellipsoid(region, resolution, resolution - 1),
        _ => discretize_box(region, resolution),
    }
}

/// Discretizes intervals and rectangles; ellipsoids are delegated.
pub fn discretize_box(region: &ConfidenceRegion, resolution: usize) -> Vec<ModelParams> {
    match region {
        ConfidenceRegion::Interval { .. } => {
            let b = region.bounds();
            dedup(linspace(b.mu_lo, b.mu_hi, resolution).into_iter().map(|mu| ModelParams { mu, var: b.var_lo }))
        }
        ConfidenceRegion::Full { clip } => dedup(clip.grid(resolution, resolution).into_iter()),
        ConfidenceRegion::Ellipsoid { .. } => discretize_ellipsoid(region, resolution, resolution - 1),
    }
}

/// Polar grid on an ellipsoid: the centre, then for every shell
/// `k / shells` (`k = 1..=shells`) the points at angles `2 pi j / angles`,
/// then the four axis extremes. Every point is clamped into the rectangle
/// and exact duplicates are dropped, keeping first occurrences. Clamping
/// keeps a point inside the (axis-aligned) ellipsoid because the centre
/// lies in the rectangle.
pub fn discretize_ellipsoid(region: &ConfidenceRegion, angles: usize, shells: usize) -> Vec<ModelParams> {
    let (center, n, kappa, clip) = match *region {
        ConfidenceRegion::Ellipsoid { center, n, kappa, clip } => (center, n, kappa, clip),
        _ => return discretize_box(region, angles.max(2)),
    };
    let (dmu, dvar) = ellipsoid_half_axes(center, n, kappa);
    let angles = angles.max(1);
    let shells = shells.max(1);

    let mut raw = Vec::with_capacity(angles * shells + 5);
    raw.push(center);
    for k in 1..=shells {
        let s = k as f64 / shells as f64;
        for j in 0..angles {
            let (cos, sin) = unit_direction(j, angles);
            raw.push(ModelParams { mu: center.mu + s * dmu * cos, var: center.var + s * dvar * sin });
        }
    }
    for (cos, sin) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)] {
        raw.push(ModelParams { mu: center.mu + dmu * cos, var: center.var + dvar * sin });
    }
    dedup(raw.into_iter().map(|p| project(p, &clip)))
}

/// `(cos, sin)` of `2 pi j / angles`, exact on quarter turns.
fn unit_direction(j: usize, angles: usize) -> (f64, f64) {
    if (4 * j).is_multiple_of(angles) {
        return match (4 * j / angles) % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let phi = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
    (phi.cos(), phi.sin())
}

fn dedup(points: impl Iterator<Item = ModelParams>) -> Vec<ModelParams> {
    let mut seen = std::collections::HashSet::new();
    points.filter(|p| seen.insert((p.mu.to_bits(), p.var.to_bits()))).collect()
}
