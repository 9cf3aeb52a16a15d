//! Terminal-wealth statistics used to compare control methods.
//!
//! P&L is discounted with the continuously compounded annual rate:
//! `d_i = exp(-r T) V_T,i - v0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulation::WealthPaths;

fn discounted_pnl(terminal_wealth: &[f64], v0: f64, r: f64, years: f64) -> Result<Vec<f64>> {
    if terminal_wealth.is_empty() {
        return Err(Error::Domain("terminal wealth sample is empty".into()));
    }
    let discount = (-r * years).exp();
    Ok(terminal_wealth.iter().map(|v| discount * v - v0).collect())
}

/// Gain-to-loss ratio `E[d] / E[d^-]`; zero when `E[d] <= 0` and
/// `f64::INFINITY` when the mean is positive and no path loses.
pub fn glr(terminal_wealth: &[f64], v0: f64, r: f64, years: f64) -> Result<f64> {
    let d = discounted_pnl(terminal_wealth, v0, r, years)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Ok(0.0);
    }
    let mean_loss = d.iter().map(|x| (-x).max(0.0)).sum::<f64>() / n;
    if mean_loss == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mean / mean_loss)
}

/// Empirical 95% value-at-risk of the discounted loss `L = v0 - exp(-rT) V_T`:
/// the smallest sample loss `v` with `#{L > v} <= 5% of paths`.
pub fn var95(terminal_wealth: &[f64], v0: f64, r: f64, years: f64) -> Result<f64> {
    let mut losses: Vec<f64> = discounted_pnl(terminal_wealth, v0, r, years)?.into_iter().map(|d| -d).collect();
    losses.sort_by(f64::total_cmp);
    let n = losses.len();
    for &v in &losses {
        let exceed = n - losses.partition_point(|&l| l <= v);
        // exceed / n <= 0.05, in integers.
        if 20 * exceed <= n {
            return Ok(v);
        }
    }
    Ok(losses[n - 1])
}

/// Per-step mean and sample standard deviation of wealth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WealthSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Set when fewer than two paths were available and `std` is reported as 0.
    pub std_undefined: bool,
}

impl WealthSummary {
    /// Rows `t, mean, std`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "std"])?;
        for (t, (m, s)) in self.mean.iter().zip(&self.std).enumerate() {
            w.write_record([t.to_string(), format!("{m:?}"), format!("{s:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn summarize(paths: &WealthPaths) -> WealthSummary {
    let n = paths.n_paths;
    let mut mean = Vec::with_capacity(paths.steps + 1);
    let mut std = Vec::with_capacity(paths.steps + 1);
    for t in 0..=paths.steps {
        let col = paths.column(t);
        let (m, s) = mean_std(&col);
        mean.push(m);
        std.push(s);
    }
    WealthSummary { mean, std, std_undefined: n < 2 }
}

/// Sample mean and standard deviation (divisor `n - 1`, 0 below two points).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One row of the method comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub mean: f64,
    pub std: f64,
    pub var95: f64,
    pub glr: f64,
}

impl MethodReport {
    pub fn from_terminal(method: &str, horizon: f64, terminal: &[f64], v0: f64, r: f64) -> Result<Self> {
        let (mean, std) = mean_std(terminal);
        Ok(Self {
            method: method.to_string(),
            horizon,
            mean,
            std,
            var95: var95(terminal, v0, r, horizon)?,
            glr: glr(terminal, v0, r, horizon)?,
        })
    }
}

/// Comparison CSV with columns `method, T, mean, std, var95, glr`.
pub fn write_reports<W: Write>(out: W, reports: &[MethodReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
