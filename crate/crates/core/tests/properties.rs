use passage_lab::bounds::{discretization_budget, kummer_m, z_inverse, z_of_mu};
use passage_lab::kernels::{CovarianceKernel, LampertiKernel, SpdeParams};
use passage_lab::passage::SurvivalCurve;
use passage_lab::sampler::{cholesky_with_jitter, make_schedule, ScheduleFamily};
use passage_lab::stats::wilson_interval;
use proptest::prelude::*;

fn closed_form_kernel() -> impl Strategy<Value = CovarianceKernel> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|h| CovarianceKernel::fbm(h).unwrap()),
        Just(CovarianceKernel::brownian()),
        (1.2f64..4.0, 0.1f64..0.9).prop_map(|(g, b)| {
            CovarianceKernel::spde(SpdeParams::new(1, g, b * g.min(1.0), 1.0).unwrap()).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric(k in closed_form_kernel(), s in 0.01f64..20.0, t in 0.01f64..20.0) {
        prop_assert_eq!(k.eval(s, t).unwrap(), k.eval(t, s).unwrap());
    }

    #[test]
    fn covariance_scales_with_index(k in closed_form_kernel(), s in 0.05f64..5.0, t in 0.05f64..5.0, c in 0.2f64..8.0) {
        let lhs = k.eval(c * s, c * t).unwrap();
        let rhs = c.powf(2.0 * k.alpha()) * k.eval(s, t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()).max(1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn gram_on_64_points_factorises(k in closed_form_kernel(), start in 0.01f64..1.0, ratio in 1.01f64..1.2) {
        let times: Vec<f64> = (0..64).map(|i| start * ratio.powi(i)).collect();
        let gram = k.gram(&times).unwrap();
        let max_diag = (0..64).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let (_, jitter) = cholesky_with_jitter(&gram).unwrap();
        prop_assert!(jitter <= 1e-10 * max_diag, "jitter {jitter}");
    }

    #[test]
    fn lamperti_transform_is_stationary(k in closed_form_kernel(), a in -3.0f64..3.0, h in 0.0f64..4.0) {
        let alpha = k.alpha();
        let y = |u: f64, v: f64| (-alpha * (u + v)).exp() * k.eval(u.exp(), v.exp()).unwrap();
        let lhs = y(a, a + h);
        let rho = LampertiKernel::new(k.clone()).unwrap().rho(h).unwrap();
        prop_assert!((lhs - rho).abs() <= 1e-9 * rho.abs().max(1e-6), "{lhs} vs {rho}");
    }

    #[test]
    fn z_round_trip(c in 0.1f64..3.0) {
        let mu = z_inverse(c).unwrap();
        prop_assert!((z_of_mu(mu).unwrap() - c).abs() < 1e-8);
    }

    #[test]
    fn z_inverse_decreases(c in 0.1f64..2.9, dc in 0.01f64..0.1) {
        prop_assert!(z_inverse(c + dc).unwrap() < z_inverse(c).unwrap());
    }

    #[test]
    fn terminating_kummer_matches_polynomial(n in 0u32..8, b in 0.3f64..4.0, z in -10.0f64..10.0) {
        // M(-n, b, z) is a polynomial of degree n.
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..n {
            let kf = k as f64;
            term *= (kf - n as f64) / (b + kf) * z / (kf + 1.0);
            sum += term;
        }
        let m = kummer_m(-(n as f64), b, z).unwrap();
        prop_assert_eq!(m.truncation_bound, 0.0);
        prop_assert!((m.value - sum).abs() <= 1e-12 * sum.abs().max(1.0));
    }

    #[test]
    fn wilson_interval_brackets_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0, level in 0.5f64..0.999) {
        let s = ((trials as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(s, trials, level);
        let p = s as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        let (lo2, hi2) = wilson_interval(s, trials, (level + 1.0) / 2.0);
        prop_assert!(lo2 <= lo && hi <= hi2);
    }

    #[test]
    fn survival_curve_is_monotone(drops in proptest::collection::vec(0u64..500, 1..12)) {
        let trials: u64 = 10_000;
        let mut left = trials;
        let mut survivors = Vec::new();
        for d in &drops {
            left = left.saturating_sub(*d);
            survivors.push(left);
        }
        let horizons = (1..=drops.len()).map(|k| k as f64).collect();
        let curve = SurvivalCurve::from_counts(horizons, survivors, trials, 0.95).unwrap();
        prop_assert!(curve.f_hat.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(curve.ci_hi.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn budget_correction_shrinks_as_m_grows(alpha in 0.1f64..0.9, m in 2usize..200) {
        let s = make_schedule(ScheduleFamily::Arithmetic, alpha, 400).unwrap();
        let a = discretization_budget(&s, alpha, 1.0, 0.1, m, 10.0).unwrap();
        let b = discretization_budget(&s, alpha, 1.0, 0.1, m + 1, 10.0).unwrap();
        prop_assert!(b.correction <= a.correction);
        prop_assert!(b.log_horizon <= a.log_horizon);
    }
}

#[test]
fn rejects_non_monotone_counts() {
    assert!(SurvivalCurve::from_counts(vec![1.0, 2.0], vec![5, 6], 10, 0.95).is_err());
    assert!(SurvivalCurve::from_counts(vec![1.0, 2.0], vec![11, 6], 10, 0.95).is_err());
    assert!(SurvivalCurve::from_counts(vec![2.0, 1.0], vec![5, 4], 10, 0.95).is_err());
}
