//! Property tests over random model parameters.

use proptest::prelude::*;

use crate::mc::{simulate, McConfig, StrategySpec};
use crate::model::constant_rate_solution;
use crate::verify::{hjb_verify, HjbTolerance, Region};
use crate::{characteristic_roots, constant_rate_value, generator_apply, solve_uniform, ModelParams};

fn params() -> impl Strategy<Value = ModelParams> {
    (-1.0..3.0f64, 0.3..3.0f64, 0.05..0.5f64, 0.0..4.0f64, 0.5..4.0f64)
        .prop_map(|(mu, sigma, q, lambda, c_bar)| ModelParams::new(mu, sigma, q, lambda, c_bar).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roots_solve_the_quadratic(p in params(), c in 0.0..10.0f64) {
        let r = characteristic_roots(&p, c).unwrap();
        prop_assert!(r.theta1 < 0.0 && 0.0 < r.theta2);
        let a = 0.5 * p.sigma * p.sigma;
        for t in [r.theta1, r.theta2] {
            let scale = (a * t * t).abs() + ((p.mu - c) * t).abs() + p.q;
            prop_assert!((a * t * t + (p.mu - c) * t - p.q).abs() <= 1e-10 * scale);
        }
        let prod = -2.0 * p.q / (p.sigma * p.sigma);
        prop_assert!((r.theta1 * r.theta2 - prod).abs() <= 1e-10 * prod.abs());
    }

    #[test]
    fn constant_rate_value_increasing_and_bounded(p in params(), c in 0.0..4.0f64, x in 0.0..20.0f64) {
        let v = constant_rate_value(&p, c, x).unwrap();
        let v_next = constant_rate_value(&p, c, x + 1e-4).unwrap();
        prop_assert!(v >= 0.0 && v < p.perpetuity(c) + 1e-12);
        // the increment underflows once the value has converged to the perpetuity
        prop_assert!(v_next > v || p.perpetuity(c) - v < 1e-10 * p.perpetuity(c));
    }

    #[test]
    fn constant_rate_derivatives_match_differences(p in params(), c in 0.0..4.0f64, x in 0.1..10.0f64) {
        let s = constant_rate_solution(&p, c).unwrap();
        let (v, d1, d2) = s.derivatives(x);
        let h = 1e-4;
        let fd1 = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
        let fd2 = (s.slope(x + h) - s.slope(x - h)) / (2.0 * h);
        prop_assert!((d1 - fd1).abs() <= 1e-6 * d1.abs().max(1e-8) + 1e-9);
        prop_assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(1e-8) + 1e-9);
        let res = generator_apply(&p, c, v, d1, d2);
        prop_assert!(res.abs() <= 1e-9 * p.perpetuity(c).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn surface_is_monotone_bounded_and_complementary(p in params(), xs in prop::collection::vec(0.0..12.0f64, 12)) {
        let s = solve_uniform(p, 16).unwrap();
        let ceiling = p.value_ceiling();
        for i in 0..=s.top() {
            prop_assert_eq!(s.surface_eval(0.0, i).unwrap().0, 0.0);
            for &x in &xs {
                let (v, slope) = s.surface_eval(x, i).unwrap();
                prop_assert!(v <= ceiling + 1e-12);
                prop_assert!(slope >= -1e-12);
                if i > 0 {
                    let lower = s.surface_eval(x, i - 1).unwrap().0;
                    prop_assert!(v >= lower - 1e-10 * ceiling, "level {} at x {}: {} < {}", i, x, v, lower);
                }
            }
        }
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        for i in 0..=s.top() {
            let vals: Vec<f64> = sorted.iter().map(|&x| s.surface_eval(x, i).unwrap().0).collect();
            prop_assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
        let tol = HjbTolerance { residual: 1e-8 * ceiling.max(1.0), gap: 1e-10 * ceiling.max(1.0) };
        for r in hjb_verify(&s, &xs, tol) {
            if r.classification == Region::Boundary {
                continue;
            }
            let res_zero = r.generator_residual.abs() <= tol.residual;
            let gap_zero = r.complementarity_gap.map_or(false, |g| g.abs() <= tol.gap);
            prop_assert!(res_zero || gap_zero, "{:?}", r);
            prop_assert!(r.ok, "{:?}", r);
        }
    }

    #[test]
    fn simulation_is_reproducible(p in params(), seed in any::<u64>(), c in 0.0..4.0f64) {
        let cfg = McConfig { dt: 1e-2, n_paths: 300, seed, horizon: Some(20.0), ..McConfig::default() };
        let a = simulate(&p, &StrategySpec::ConstantRate(c), 1.0, &cfg).unwrap();
        let b = simulate(&p, &StrategySpec::ConstantRate(c), 1.0, &cfg).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.value.half_width_95 >= 0.0);
    }
}
