use arc_core::estimation::{
    discretize_box, discretize_ellipsoid, project, raw_mean_var_update, region_case1, region_case2, update_mean,
    update_mean_var, EstimatorState, ModelParams, ParameterSpace,
};
use arc_core::metrics::{glr, var95};
use arc_core::quantization::{normal_cdf, normal_quantile};
use proptest::prelude::*;

fn wide() -> ParameterSpace {
    ParameterSpace::new(-1e6, 1e6, 0.0, 1e12).unwrap()
}

fn batch(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

proptest! {
    #[test]
    fn recursion_matches_batch(xs in prop::collection::vec(-5.0f64..5.0, 1..300)) {
        let space = wide();
        let mut s = EstimatorState::new(0.3, 0.7, 0);
        let mut m_only = s;
        for &z in &xs {
            s = update_mean_var(&s, z, &space);
            m_only = update_mean(&m_only, z, &space);
        }
        let (m, v) = batch(&xs);
        prop_assert!((s.mean - m).abs() <= 1e-12);
        prop_assert!((s.var - v).abs() <= 1e-12);
        prop_assert!((m_only.mean - m).abs() <= 1e-12);
        prop_assert_eq!(m_only.var, 0.7);
        prop_assert_eq!(s.n, xs.len() as u64);
    }

    #[test]
    fn raw_update_is_unprojected(m in -1.0f64..1.0, v in 0.0f64..1.0, n in 0u64..500, z in -3.0f64..3.0) {
        let (m1, v1) = raw_mean_var_update(m, v, n, z);
        let s = update_mean_var(&EstimatorState::new(m, v, n), z, &wide());
        prop_assert_eq!((s.mean, s.var), (m1, v1));
    }

    #[test]
    fn projection_is_idempotent_and_inside(mu in -10.0f64..10.0, var in -1.0f64..3.0) {
        let space = ParameterSpace::new(-1.0, 1.0, 0.0, 0.5).unwrap();
        let p = project(ModelParams::new(mu, var), &space);
        prop_assert!(space.contains(&p));
        prop_assert_eq!(project(p, &space), p);
    }

    #[test]
    fn projected_updates_stay_inside(zs in prop::collection::vec(-0.5f64..0.5, 1..100)) {
        let space = ParameterSpace::new(-0.01, 0.01, 0.0, 0.002).unwrap();
        let mut s = EstimatorState::new(0.0, 0.001, 0);
        for &z in &zs {
            s = update_mean_var(&s, z, &space);
            prop_assert!(space.contains(&s.params()));
        }
    }

    #[test]
    fn discretized_intervals_lie_in_region(
        mean in -0.01f64..0.01, n in 0u64..400, alpha in 0.01f64..0.99, res in 2usize..20,
    ) {
        let space = ParameterSpace::known_variance(-0.005, 0.005, 3e-4).unwrap();
        let region = region_case1(&EstimatorState::new(mean, 3e-4, n), 3e-4f64.sqrt(), alpha, &space).unwrap();
        let pts = discretize_box(&region, res);
        prop_assert!(!pts.is_empty() && pts.len() <= res);
        for p in &pts {
            prop_assert!(region.contains(p), "{p:?} not in {region:?}");
        }
    }

    #[test]
    fn discretized_ellipsoids_lie_in_region(
        mean in -0.01f64..0.01, var in 0.0f64..0.003, n in 0u64..400, alpha in 0.01f64..0.99,
        angles in 4usize..16, shells in 1usize..8,
    ) {
        let space = ParameterSpace::new(-1.0 / 300.0, 1.0 / 300.0, 0.0, 0.5 / 300.0).unwrap();
        let region = region_case2(&EstimatorState::new(mean, var, n), alpha, &space).unwrap();
        let pts = discretize_ellipsoid(&region, angles, shells);
        prop_assert!(!pts.is_empty());
        for p in &pts {
            prop_assert!(region.contains(p), "{p:?} not in {region:?}");
        }
        let centre = project(EstimatorState::new(mean, var, n).params(), &space);
        prop_assert!(region.contains(&centre));
    }

    #[test]
    fn quantile_inverts_cdf(p in 0.001f64..0.999) {
        let x = normal_quantile(p).unwrap();
        prop_assert!((normal_cdf(x) - p).abs() <= 1e-12);
    }

    #[test]
    fn glr_is_permutation_invariant(mut w in prop::collection::vec(80.0f64..120.0, 1..50), k in 0usize..50) {
        let a = glr(&w, 100.0, 0.02, 0.5).unwrap();
        let k = k % w.len();
        w.rotate_left(k);
        w.reverse();
        let b = glr(&w, 100.0, 0.02, 0.5).unwrap();
        prop_assert!(a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn var95_is_monotone_in_losses(w in prop::collection::vec(80.0f64..120.0, 1..60), shift in 0.0f64..10.0) {
        let worse: Vec<f64> = w.iter().map(|v| v - shift).collect();
        let a = var95(&w, 100.0, 0.0, 1.0).unwrap();
        let b = var95(&worse, 100.0, 0.0, 1.0).unwrap();
        prop_assert!(b >= a - 1e-12);
        prop_assert!(((b - a) - shift).abs() <= 1e-9);
    }
}
