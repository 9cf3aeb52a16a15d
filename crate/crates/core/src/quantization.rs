//! Optimal quantization of the standard normal law.
//!
//! A quantizer replaces `E[f(Z)]`, `Z ~ N(0, 1)`, by a finite weighted sum
//! `sum_i w_i f(z_i)`. The points are built with Lloyd's fixed-point
//! iteration: every point is moved to the conditional mean of its Voronoi
//! cell until nothing moves. Cell masses and centroids are closed-form in
//! terms of the normal CDF and density, so construction is deterministic.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of quantization levels.
pub const DEFAULT_SIZE: usize = 10;
/// Default Lloyd stopping tolerance on the largest point displacement.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Default Lloyd iteration cap.
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Finite approximation of a one-dimensional law: increasing points with
/// strictly positive weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Quantizer {
    /// Builds a quantizer from raw points and weights, checking ordering,
    /// positivity and normalisation.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Domain(format!(
                "quantizer needs matching non-empty points/weights, got {} and {}",
                points.len(),
                weights.len()
            )));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("quantizer points must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("quantizer weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("quantizer weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    /// The degenerate one-point quantizer at the origin.
    pub fn dirac() -> Self {
        Self { points: vec![0.0], weights: vec![1.0] }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(point, weight)` pairs in increasing point order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// Quantized expectation `sum_i w_i f(z_i)`, accumulated in point order.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().fold(0.0, |acc, (z, w)| acc + w * f(z))
    }

    /// `sum_i w_i z_i^2`, which is `1 - distortion` for a stationary
    /// quantizer of the standard normal.
    pub fn second_moment(&self) -> f64 {
        self.expect(|z| z * z)
    }

    /// Largest distance between a point and the centroid of its cell under
    /// the standard normal law.
    pub fn stationarity_residual(&self) -> f64 {
        let (centroids, _) = lloyd_step(&self.points);
        self.points
            .iter()
            .zip(&centroids)
            .map(|(p, c)| (p - c).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds an `n`-point Lloyd-stationary quantizer of `N(0, 1)`, starting
/// from the equiprobable quantiles `Phi^{-1}((i + 0.5) / n)`.
pub fn build_normal_quantizer(n: usize, tol: f64, max_iter: usize) -> Result<Quantizer> {
    if n == 0 {
        return Err(Error::Domain("quantizer size must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("quantizer tolerance must be positive, got {tol}")));
    }
    let mut points: Vec<f64> = (0..n)
        .map(|i| normal_quantile((i as f64 + 0.5) / n as f64))
        .collect::<Result<_>>()?;

    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let (next, weights) = lloyd_step(&points);
        residual = points
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        points = next;
        if residual <= tol {
            let (_, weights_at_fixed_point) = lloyd_step(&points);
            debug_assert_eq!(weights.len(), weights_at_fixed_point.len());
            return Quantizer::new(points, normalise(weights_at_fixed_point));
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

/// The default 10-point quantizer.
pub fn default_quantizer() -> Quantizer {
    build_normal_quantizer(DEFAULT_SIZE, DEFAULT_TOL, DEFAULT_MAX_ITER)
        .expect("10-point Lloyd iteration converges")
}

/// One Lloyd update: returns the centroids and masses of the Voronoi cells
/// of `points` under the standard normal law.
pub fn lloyd_step(points: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(f64::NEG_INFINITY);
    bounds.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    bounds.push(f64::INFINITY);

    let mut centroids = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    for (i, cell) in bounds.windows(2).enumerate() {
        let (lo, hi) = (cell[0], cell[1]);
        let mass = normal_mass(lo, hi);
        if mass > 0.0 {
            centroids.push((normal_pdf(lo) - normal_pdf(hi)) / mass);
        } else {
            // Cell lost all mass to underflow; leave the point where it is.
            centroids.push(points[i]);
        }
        masses.push(mass);
    }
    (centroids, masses)
}

fn normalise(mut weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `P(lo < Z <= hi)`, evaluated on whichever tail keeps precision.
fn normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        // Both in the upper half: difference of upper-tail probabilities.
        0.5 * (libm::erfc(lo / SQRT_2) - libm::erfc(hi / SQRT_2))
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

/// Inverse standard normal CDF, accurate to well below `1e-9`.
///
/// Acklam's rational approximation followed by two Halley corrections
/// against the erfc-based CDF. Evaluated on the lower half and mirrored.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    if p > 0.5 {
        return Ok(-lower_normal_quantile(1.0 - p));
    }
    Ok(lower_normal_quantile(p))
}

fn lower_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Quantile of the chi-square law with two degrees of freedom, which is
/// exponential with mean 2: `-2 ln(1 - p)`.
pub fn chi2_2_quantile(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("chi-square quantile needs 0 <= p < 1, got {p}")));
    }
    Ok(-2.0 * (-p).ln_1p())
}
