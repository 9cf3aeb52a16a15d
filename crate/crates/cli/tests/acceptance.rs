//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use arc_cli::experiment::{run_compare, CompareOptions};
use arc_cli::ExperimentConfig;
use arc_core::estimation::{region_case2, EstimatorState, ModelParams, ParameterSpace};
use arc_core::metrics::MethodReport;
use arc_core::quantization::{build_normal_quantizer, DEFAULT_MAX_ITER, DEFAULT_TOL};
use arc_core::simulation::simulate_noise;
use arc_core::solver::generic::{minimax, PortfolioModel};
use arc_core::solver::{
    build_state_grid, evaluate_policy_worstcase, solve_adaptive_robust, solve_robust, solve_robust_over,
    solve_true_model, AdversarySets, ConfidenceSets, Continuation, PolicyRule, RegionResolution,
};
use arc_core::{Case, MarketConfig, StateGrid};

const ORACLE_TOL: f64 = 1e-12;
const ESTIMATOR_TOL: f64 = 1e-12;
const STATIONARITY_TOL: f64 = 1e-8;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-8;
const SCALE_TOL: f64 = 1e-10;
const MIN_COVERAGE: f64 = 0.85;
const REDUCED_PATHS: usize = 200;
const REDUCED_HORIZONS: [f64; 3] = [0.25, 0.5, 1.0];

type Outcome = Result<String, String>;

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, outcome: Outcome) -> Outcome {
    let took = start.elapsed();
    match outcome {
        Ok(d) if took <= limit => Ok(format!("{d} ({:.2?})", took)),
        Ok(d) => Err(format!("{d}; runtime {took:.2?} exceeds {limit:?}")),
        Err(d) => Err(format!("{d} ({took:.2?})")),
    }
}

fn robust_degeneracy() -> Outcome {
    let start = Instant::now();
    let cfg = config("case1.json");
    let market = cfg.market(1.0).unwrap();
    let (_, policy) = solve_robust(&market, cfg.robust_resolution).unwrap();
    let PolicyRule::Schedule(schedule) = &policy.rule else {
        return Err("robust policy is not a schedule".into());
    };
    let invested = schedule.iter().filter(|&&i| market.actions[i] != 0.0).count();
    within(
        Duration::from_secs(1),
        start,
        check(invested == 0, format!("{invested} of {} steps hold the risky asset", schedule.len())),
    )
}

/// Nearest state of a slice by brute force in width-normalised coordinates,
/// lowest index on ties.
fn brute_nearest(slice: &[EstimatorState], space: &ParameterSpace, c: &EstimatorState) -> usize {
    let dist = |s: &EstimatorState| {
        let mut d = 0.0;
        if space.mu_width() > 0.0 {
            d += ((s.mean - c.mean) / space.mu_width()).powi(2);
        }
        if space.var_width() > 0.0 {
            d += ((s.var - c.var) / space.var_width()).powi(2);
        }
        d
    };
    let mut best = 0;
    for i in 1..slice.len() {
        if dist(&slice[i]) < dist(&slice[best]) {
            best = i;
        }
    }
    best
}

/// Utility-scale game tree at wealth 1, with the estimator snapped to the
/// grid before every non-terminal step.
fn oracle(cfg: &MarketConfig, grid: &StateGrid, sets: &dyn AdversarySets, case: Case, t: usize, c: EstimatorState, v: f64) -> f64 {
    if t == cfg.horizon_steps {
        return v.powf(1.0 - cfg.gamma) / (1.0 - cfg.gamma);
    }
    let thetas = sets.candidates(t, &c).unwrap();
    let mut best = f64::NEG_INFINITY;
    for &a in &cfg.actions {
        let mut worst = f64::INFINITY;
        for theta in &thetas {
            let mut e = 0.0;
            for (eps, w) in cfg.quantizer.iter() {
                let z = theta.mu + theta.sigma() * eps;
                let mut next = case.update(&c, z, &cfg.space);
                if t + 1 < cfg.horizon_steps {
                    let slice = grid.slice(t + 1);
                    next = slice[brute_nearest(slice, &cfg.space, &next)];
                }
                e += w * oracle(cfg, grid, sets, case, t + 1, next, v * (1.0 + cfg.rate + a * z));
            }
            worst = worst.min(e);
        }
        best = best.max(worst);
    }
    best
}

fn small_market(name: &str) -> (ExperimentConfig, MarketConfig) {
    let cfg = config(name);
    let mut market = cfg.market(1.0).unwrap();
    market.horizon_steps = 3;
    market.actions = vec![0.0, 0.5, 1.0];
    market.quantizer = build_normal_quantizer(3, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    (cfg, market)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut details = vec![];
    let mut ok = true;
    for (name, resolution) in [
        ("case1.json", RegionResolution { interval_points: 5, ellipse_angles: 4, ellipse_shells: 1 }),
        ("case2.json", RegionResolution { interval_points: 2, ellipse_angles: 4, ellipse_shells: 1 }),
    ] {
        let (cfg, market) = small_market(name);
        let grid = build_state_grid(&market, 20, cfg.grid_seed(), cfg.case).unwrap();
        let sets = ConfidenceSets::new(&market, cfg.case, resolution);
        let max_points = (0..3)
            .flat_map(|t| grid.slice(t).iter().map(move |c| (t, *c)))
            .map(|(t, c)| sets.candidates(t, &c).unwrap().len())
            .max()
            .unwrap();
        let (table, policy) = solve_adaptive_robust(&market, &grid, &sets, Continuation::Nearest).unwrap();
        let w0 = table.initial_value();
        let exact = oracle(&market, &grid, &sets, cfg.case, 0, market.initial, 1.0);
        let eval = evaluate_policy_worstcase(&market, &policy, &grid, &sets, Continuation::Nearest)
            .unwrap()
            .initial_value();
        let (d_oracle, d_eval) = ((w0 - exact).abs(), (w0 - eval).abs());
        ok &= d_oracle <= ORACLE_TOL && d_eval <= ORACLE_TOL && max_points <= 5;
        details.push(format!(
            "case {}: |W0-oracle|={d_oracle:.1e} |W0-eval|={d_eval:.1e} region<={max_points}",
            cfg.case
        ));
    }
    within(Duration::from_secs(10), start, check(ok, details.join("; ")))
}

/// Discretized confidence region restricted to a fixed parameter set, with
/// the true parameter always offered.
struct NestedSets {
    inner: ConfidenceSets,
    theta_star: ModelParams,
    set: Vec<ModelParams>,
}

impl AdversarySets for NestedSets {
    fn candidates(&self, _t: usize, state: &EstimatorState) -> arc_core::Result<Vec<ModelParams>> {
        let region = self.inner.region(state)?;
        let mut out = vec![self.theta_star];
        out.extend(self.set.iter().filter(|p| **p != self.theta_star && region.contains(p)));
        Ok(out)
    }
}

fn value_ordering() -> Outcome {
    let start = Instant::now();
    let mut details = vec![];
    let mut ok = true;
    for (name, var_points) in [("case1.json", 1), ("case2.json", 11)] {
        let cfg = config(name);
        let market = cfg.market(0.25).unwrap();
        let mut set = market.space.grid(41, var_points);
        set.push(market.true_params);
        let sets = NestedSets {
            inner: ConfidenceSets::new(&market, cfg.case, cfg.resolution()),
            theta_star: market.true_params,
            set: set.clone(),
        };
        let grid = build_state_grid(&market, 50, cfg.grid_seed(), cfg.case).unwrap();
        let ar = solve_adaptive_robust(&market, &grid, &sets, Continuation::Nearest).unwrap().0.initial_value();
        let tm = solve_true_model(&market, &market.true_params).unwrap().0.initial_value();
        let rb = solve_robust_over(&market, &set).unwrap().0.initial_value();
        ok &= tm >= ar && ar >= rb;
        details.push(format!("case {}: true={tm:.12} ar={ar:.12} robust={rb:.12}", cfg.case));
    }
    within(Duration::from_secs(60), start, check(ok, details.join("; ")))
}

fn estimator_correctness() -> Outcome {
    let start = Instant::now();
    let space = ParameterSpace::new(-1e9, 1e9, 0.0, 1e18).unwrap();
    let noise = simulate_noise(&ModelParams::new(0.5, 4.0), 10_000, 300, 41);
    let mut worst: f64 = 0.0;
    for p in 0..10_000 {
        let xs = &noise.path(p)[..1 + p % 300];
        let mut c = EstimatorState::new(7.0, 3.0, 0);
        for &z in xs {
            c = Case::MeanAndVariance.update(&c, z, &space);
        }
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        worst = worst.max((c.mean - m).abs()).max((c.var - v).abs());
    }
    within(
        Duration::from_secs(5),
        start,
        check(worst <= ESTIMATOR_TOL, format!("max deviation {worst:.2e} over 10000 streams")),
    )
}

fn quantizer_check() -> Outcome {
    let q = build_normal_quantizer(10, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let stat = q.stationarity_residual();
    let sum_err = (q.weights().iter().sum::<f64>() - 1.0).abs();
    let n = q.len();
    let sym = (0..n)
        .map(|i| (q.points()[i] + q.points()[n - 1 - i]).abs().max((q.weights()[i] - q.weights()[n - 1 - i]).abs()))
        .fold(0.0, f64::max);
    check(
        stat <= STATIONARITY_TOL && sum_err <= WEIGHT_SUM_TOL && sym <= SYMMETRY_TOL,
        format!("stationarity {stat:.1e}, weight sum error {sum_err:.1e}, asymmetry {sym:.1e}"),
    )
}

/// Minimax decisions at every node of the game tree, in visiting order.
fn decisions(model: &PortfolioModel, t: usize, state: (f64, EstimatorState), out: &mut Vec<(f64, Option<usize>)>) {
    let d = minimax(model, t, &state);
    out.push((d.value, d.action));
    if t + 1 >= model.horizon {
        return;
    }
    let (Some(a), Some(theta)) = (d.action, d.worst) else { return };
    for (e, _) in model.quantizer.iter() {
        let z = theta.mu + theta.sigma() * e;
        decisions(model, t + 1, arc_core::solver::generic::RobustModel::transition(model, t, &state, a, z), out);
    }
}

fn scale_invariance() -> Outcome {
    let (v1, v2) = (100.0, 7.5);
    let mut details = vec![];
    let mut ok = true;
    for name in ["case1.json", "case2.json"] {
        let (cfg, market) = small_market(name);
        let grid = build_state_grid(&market, 20, cfg.grid_seed(), cfg.case).unwrap();
        let sets = ConfidenceSets::new(
            &market,
            cfg.case,
            RegionResolution { interval_points: 5, ellipse_angles: 4, ellipse_shells: 1 },
        );
        let model = PortfolioModel {
            rate: market.rate,
            gamma: market.gamma,
            actions: &market.actions,
            horizon: 3,
            quantizer: &market.quantizer,
            space: market.space,
            case: cfg.case,
            adversary: &sets,
            grid: Some(&grid),
        };
        let (mut a, mut b) = (vec![], vec![]);
        decisions(&model, 0, (v1, market.initial), &mut a);
        decisions(&model, 0, (v2, market.initial), &mut b);
        let ratio = (v1 / v2).powf(1.0 - market.gamma);
        let same_policy = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.1 == y.1);
        let dev = a.iter().zip(&b).map(|(x, y)| (x.0 / y.0 / ratio - 1.0).abs()).fold(0.0, f64::max);
        ok &= same_policy && dev <= SCALE_TOL;
        details.push(format!("case {}: {} nodes, same policy {same_policy}, ratio error {dev:.1e}", cfg.case, a.len()));
    }
    check(ok, details.join("; "))
}

fn coverage() -> Outcome {
    let start = Instant::now();
    let cfg = config("case2.json");
    let market = cfg.market(1.0).unwrap();
    let noise = simulate_noise(&market.true_params, 1000, 300, cfg.seed);
    let covered = (0..1000)
        .filter(|&p| {
            let c = noise.path(p).iter().fold(market.initial, |c, &z| cfg.case.update(&c, z, &market.space));
            region_case2(&c, cfg.alpha, &market.space).unwrap().contains(&market.true_params)
        })
        .count();
    let rate = covered as f64 / 1000.0;
    within(Duration::from_secs(60), start, check(rate >= MIN_COVERAGE, format!("coverage {rate:.3} at n=300")))
}

fn reduced_reports() -> (Vec<MethodReport>, Duration) {
    let mut cfg = config("case1.json");
    cfg.n_paths = REDUCED_PATHS;
    cfg.n_grid_paths = REDUCED_PATHS;
    cfg.horizons = REDUCED_HORIZONS.to_vec();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let reports = run_compare(&cfg, dir.path(), CompareOptions::default()).unwrap();
    (reports, start.elapsed())
}

fn by_horizon(reports: &[MethodReport]) -> BTreeMap<u64, BTreeMap<String, MethodReport>> {
    let mut out: BTreeMap<u64, BTreeMap<String, MethodReport>> = BTreeMap::new();
    for r in reports {
        out.entry((r.horizon * 100.0).round() as u64).or_default().insert(r.method.clone(), r.clone());
    }
    out
}

fn ordering(reports: &[MethodReport], runtime: Duration, part: char) -> Outcome {
    let mut ok = runtime <= Duration::from_secs(600);
    let mut details = vec![];
    for (h, row) in by_horizon(reports) {
        let (ad, ar, rb) = (&row["adaptive"], &row["adaptive_robust"], &row["robust"]);
        let good = match part {
            'a' => ad.mean >= ar.mean && ar.mean >= rb.mean,
            'b' => ad.std >= ar.std && ad.var95 >= ar.var95,
            _ => ar.glr >= rb.glr && (h < 50 || ar.glr >= ad.glr),
        };
        ok &= good;
        let shown = match part {
            'a' => format!("mean ad={:.4} ar={:.4} rb={:.4}", ad.mean, ar.mean, rb.mean),
            'b' => format!("std ad={:.3} ar={:.3} var95 ad={:.3} ar={:.3}", ad.std, ar.std, ad.var95, ar.var95),
            _ => format!("glr ar={:.4} rb={:.4} ad={:.4}", ar.glr, rb.glr, ad.glr),
        };
        details.push(format!("T={:.2} {shown}{}", h as f64 / 100.0, if good { "" } else { " [violated]" }));
    }
    details.push(format!("{runtime:.1?}"));
    check(ok, details.join("; "))
}

fn read_dir(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let mut details = vec![];
    let mut ok = true;
    for name in ["case1.json", "case2.json"] {
        let mut cfg = config(name);
        cfg.n_paths = 40;
        cfg.n_grid_paths = 40;
        cfg.horizons = vec![0.1, 0.2];
        let run = |threads: usize| {
            let dir = tempfile::tempdir().unwrap();
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                run_compare(&cfg, dir.path(), CompareOptions { write_paths: true }).unwrap();
            });
            read_dir(dir.path())
        };
        let (a, b, c) = (run(1), run(1), run(4));
        let same = a == b && a == c;
        ok &= same;
        details.push(format!("case {}: {} files, identical {same}", cfg.case, a.len()));
    }
    check(ok, details.join("; "))
}

fn main() {
    let mut failures = 0;
    let mut report = |label: &str, f: &dyn Fn() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("criterion {label}: PASS  {d}"),
            Err(d) => {
                failures += 1;
                println!("criterion {label}: FAIL  {d}");
            }
        }
    };
    report("1 robust degeneracy", &robust_degeneracy);
    report("2 oracle equivalence", &oracle_equivalence);
    report("3 value ordering", &value_ordering);
    report("4 estimator correctness", &estimator_correctness);
    report("5 quantizer", &quantizer_check);
    report("6 scale invariance", &scale_invariance);
    report("7 coverage", &coverage);
    let (reports, runtime) = reduced_reports();
    report("8a mean ordering", &|| ordering(&reports, runtime, 'a'));
    report("8b risk ordering", &|| ordering(&reports, runtime, 'b'));
    report("8c glr ordering", &|| ordering(&reports, runtime, 'c'));
    report("9 determinism", &determinism);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
