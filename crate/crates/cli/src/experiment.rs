//! Solve, simulate and compare the four control methods.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use arc_core::estimation::ConfidenceRegion;
use arc_core::metrics::{summarize, write_reports, MethodReport};
use arc_core::quantization::chi2_2_quantile;
use arc_core::simulation::{run_strategy, simulate_noise, WealthPaths};
use arc_core::solver::{
    build_state_grid, solve_adaptive_family, solve_adaptive_robust, solve_robust, solve_true_model, ConfidenceSets,
};
use arc_core::{Case, EstimatorState, MarketConfig, Method, Policy, StateGrid, ValueTable};

use crate::config::ExperimentConfig;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn horizon_label(h: f64) -> String {
    format!("T{h:.2}")
}

/// Everything solved and simulated for one horizon.
pub struct HorizonRun {
    pub horizon: f64,
    pub market: MarketConfig,
    pub grid: StateGrid,
    pub methods: Vec<MethodRun>,
}

pub struct MethodRun {
    pub method: Method,
    pub table: ValueTable,
    pub policy: Policy,
    pub paths: WealthPaths,
    pub report: MethodReport,
}

/// Solves one method for a horizon.
pub fn solve_method(
    cfg: &ExperimentConfig,
    market: &MarketConfig,
    grid: Option<&StateGrid>,
    method: Method,
) -> Result<(ValueTable, Policy)> {
    let solved = match method {
        Method::True => solve_true_model(market, &market.true_params)?,
        Method::Robust => solve_robust(market, cfg.robust_resolution)?,
        Method::Adaptive => solve_adaptive_family(market, &cfg.adaptive_grid(market))?,
        Method::AdaptiveRobust => {
            let grid = grid.context("adaptive robust control needs a state grid")?;
            let sets = ConfidenceSets::new(market, cfg.case, cfg.resolution());
            solve_adaptive_robust(market, grid, &sets, cfg.continuation)?
        }
    };
    Ok(solved)
}

/// Builds the state grid, solves all four methods and simulates them on one
/// shared noise matrix.
pub fn run_horizon(cfg: &ExperimentConfig, horizon: f64) -> Result<HorizonRun> {
    let market = cfg.market(horizon)?;
    let grid = build_state_grid(&market, cfg.n_grid_paths, cfg.grid_seed(), cfg.case)?;
    let noise = simulate_noise(&market.true_params, cfg.n_paths, market.horizon_steps, cfg.seed);
    let mut methods = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let (table, policy) = solve_method(cfg, &market, Some(&grid), method)?;
        let paths = run_strategy(&policy, &noise, &market, cfg.case, cfg.v0)?;
        let report = MethodReport::from_terminal(method.tag(), horizon, &paths.terminal_wealth(), cfg.v0, cfg.r)?;
        methods.push(MethodRun { method, table, policy, paths, report });
    }
    Ok(HorizonRun { horizon, market, grid, methods })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompareOptions {
    /// Also write long-form wealth paths per method and horizon.
    pub write_paths: bool,
}

/// Runs every horizon and writes `comparison.csv` plus per-method value,
/// summary (and optionally path) CSVs into `out`.
pub fn run_compare(cfg: &ExperimentConfig, out: &Path, opts: CompareOptions) -> Result<Vec<MethodReport>> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let scale = cfg.steps_per_year as f64;
    let mut reports = Vec::new();
    for &h in &cfg.horizons {
        let run = run_horizon(cfg, h)?;
        let label = horizon_label(h);
        for m in &run.methods {
            let tag = m.method.tag();
            write_atomic(&out.join(format!("value_{tag}_{label}.csv")), |w| Ok(m.table.write_csv(w, scale)?))?;
            let summary = summarize(&m.paths);
            write_atomic(&out.join(format!("summary_{tag}_{label}.csv")), |w| Ok(summary.write_csv(w)?))?;
            if opts.write_paths {
                write_atomic(&out.join(format!("paths_{tag}_{label}.csv")), |w| {
                    Ok(m.paths.write_long_csv(w, scale)?)
                })?;
            }
            reports.push(m.report.clone());
        }
    }
    write_atomic(&out.join("comparison.csv"), |w| Ok(write_reports(w, &reports)?))?;
    Ok(reports)
}

/// Solves one method at every horizon and writes its value tables.
pub fn run_solve(cfg: &ExperimentConfig, method: Method, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for &h in &cfg.horizons {
        let market = cfg.market(h)?;
        let grid = match method {
            Method::AdaptiveRobust => Some(build_state_grid(&market, cfg.n_grid_paths, cfg.grid_seed(), cfg.case)?),
            _ => None,
        };
        let (table, _) = solve_method(cfg, &market, grid.as_ref(), method)?;
        let path = out.join(format!("value_{}_{}.csv", method.tag(), horizon_label(h)));
        write_atomic(&path, |w| Ok(table.write_csv(w, cfg.steps_per_year as f64)?))?;
        written.push(path);
    }
    Ok(written)
}

/// One row of the confidence-region trace (annual units).
#[derive(Clone, Debug, PartialEq)]
pub struct RegionRow {
    pub t: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub var_lo: f64,
    pub var_hi: f64,
    pub kappa: f64,
    pub contains_true: bool,
}

/// Confidence regions along one simulated estimator path (path 0 of the
/// evaluation noise) over the longest configured horizon.
pub fn region_trace(cfg: &ExperimentConfig) -> Result<Vec<RegionRow>> {
    cfg.validate()?;
    let horizon = cfg.horizons.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let market = cfg.market(horizon)?;
    let noise = simulate_noise(&market.true_params, 1, market.horizon_steps, cfg.seed);
    let sets = ConfidenceSets::new(&market, cfg.case, cfg.resolution());
    let scale = cfg.steps_per_year as f64;
    let kappa = chi2_2_quantile(1.0 - cfg.alpha)?;

    let mut rows = Vec::with_capacity(market.horizon_steps + 1);
    let mut state: EstimatorState = market.initial;
    for t in 0..=market.horizon_steps {
        let region: ConfidenceRegion = sets.region(&state)?;
        let b = region.bounds();
        rows.push(RegionRow {
            t,
            mu_lo: b.mu_lo * scale,
            mu_hi: b.mu_hi * scale,
            var_lo: b.var_lo * scale,
            var_hi: b.var_hi * scale,
            kappa,
            contains_true: region.contains(&market.true_params),
        });
        if t < market.horizon_steps {
            state = cfg.case.update(&state, noise.path(0)[t], &market.space);
        }
    }
    Ok(rows)
}

/// Writes `regions.csv`: `t, mu_lo, mu_hi[, var_lo, var_hi, kappa], contains_true`.
pub fn run_regions(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RegionRow>> {
    let rows = region_trace(cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let two_d = cfg.case == Case::MeanAndVariance;
    write_atomic(&out.join("regions.csv"), |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["t", "mu_lo", "mu_hi"];
        if two_d {
            header.extend(["var_lo", "var_hi", "kappa"]);
        }
        header.push("contains_true");
        csv.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![r.t.to_string(), format!("{:?}", r.mu_lo), format!("{:?}", r.mu_hi)];
            if two_d {
                rec.extend([format!("{:?}", r.var_lo), format!("{:?}", r.var_hi), format!("{:?}", r.kappa)]);
            }
            rec.push(r.contains_true.to_string());
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(rows)
}

/// `point,weight` CSV of the `n`-point normal quantizer.
pub fn write_quantizer<W: Write>(n: usize, out: W) -> Result<()> {
    let q = arc_core::quantization::build_normal_quantizer(
        n,
        arc_core::quantization::DEFAULT_TOL,
        arc_core::quantization::DEFAULT_MAX_ITER,
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point", "weight"])?;
    for (z, p) in q.iter() {
        w.write_record([format!("{z:?}"), format!("{p:?}")])?;
    }
    w.flush()?;
    Ok(())
}
