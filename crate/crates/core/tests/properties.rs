use proptest::prelude::*;

use sobotest_core::geometry::{distance_from_level_masses, truncation_distances};
use sobotest_core::harness::Z95;
use sobotest_core::lower_bound::{chi2_divergence_closed_form, compute_constants, prior_amplitude, sample_from_prior};
use sobotest_core::regularity::cutoff_bounds_hold;
use sobotest_core::sequence::sobolev_weight;
use sobotest_core::{
    build_schedule, distance_to_ball, project_onto_ball, run_test, sample_observation, total_error_lower_bound,
    wilson_interval, BallSpec, CoefficientArray, ObservationConfig, TestConfig, Verdict, DEFAULT_TOL,
};

/// Arrays on levels `2..=j_max` with a per-level scale spanning many orders
/// of magnitude.
fn array(max_level: u32) -> impl Strategy<Value = CoefficientArray> {
    (2..=max_level)
        .prop_flat_map(|j_max| {
            (2..=j_max)
                .map(|j| (prop::collection::vec(-1.0f64..1.0, 1usize << j), -6.0f64..2.0))
                .collect::<Vec<_>>()
        })
        .prop_map(|levels| {
            let levels = levels
                .into_iter()
                .map(|(coeffs, log_scale)| {
                    let scale = 10f64.powf(log_scale);
                    coeffs.into_iter().map(|x| x * scale).collect()
                })
                .collect();
            CoefficientArray::new(levels).unwrap()
        })
}

fn config() -> impl Strategy<Value = TestConfig> {
    (0.25f64..3.0, 0.05f64..0.95, 0.02f64..0.95, -1.0f64..1.0, 5.0f64..40.0)
        .prop_map(|(s, frac, eta, log_r, log_n)| (s, s * frac, eta, 10f64.powf(log_r), log_n.exp2() as u64))
        .prop_filter_map("cutoff and schedule must exist", |(s, t, eta, radius, n)| {
            let cfg = TestConfig::new(n, s, t, radius, eta).ok()?;
            build_schedule(&cfg).ok().map(|_| cfg)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sobolev_norm_monotone_in_r(c in array(6), r1 in 0.0f64..3.0, dr in 0.0f64..2.0) {
        prop_assert!(c.sobolev_norm_sq(r1) <= c.sobolev_norm_sq(r1 + dr));
    }

    #[test]
    fn sup_norm_below_ell2_norm(c in array(6), r in 0.0f64..3.0) {
        prop_assert!(c.sup_sobolev_norm_sq(r) <= c.sobolev_norm_sq(r));
        let ball = BallSpec::ell2(r, 1.0).unwrap();
        let sup_ball = BallSpec::sup(r, 1.0).unwrap();
        if sobotest_core::ball_contains(&c, &ball) {
            prop_assert!(sobotest_core::ball_contains(&c, &sup_ball));
        }
    }

    #[test]
    fn parseval_at_r_zero(c in array(6)) {
        let sum: f64 = c.level_norms_sq().iter().sum();
        prop_assert!((c.sobolev_norm_sq(0.0) - sum).abs() <= 1e-12 * sum.max(1e-300));
        prop_assert!((c.l2_norm_sq() - sum).abs() <= 1e-12 * sum.max(1e-300));
    }

    #[test]
    fn observation_is_deterministic(c in array(5), n in 1u64..1_000_000, seed: u64, stream: u64) {
        let cfg = ObservationConfig { n, seed, stream_id: stream };
        let a = sample_observation(&c, &cfg);
        let b = sample_observation(&c, &cfg);
        prop_assert_eq!(a.level_norms_sq().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                        b.level_norms_sq().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn projection_kkt(c in array(6), r in 0.0f64..3.0, log_radius in -3.0f64..1.0) {
        let radius = 10f64.powf(log_radius);
        let ball = BallSpec::ell2(r, radius).unwrap();
        let p = project_onto_ball(&c, &ball, DEFAULT_TOL).unwrap();
        prop_assert!(p.distance >= 0.0);
        if p.multiplier > 0.0 {
            let norm = p.projected.sobolev_norm_sq(r);
            prop_assert!((norm - radius * radius).abs() <= DEFAULT_TOL * radius * radius);
            for ((j, orig), (_, proj)) in c.iter_levels().zip(p.projected.iter_levels()) {
                let factor = 1.0 + p.multiplier * sobolev_weight(j, r);
                for (a, b) in orig.iter().zip(proj) {
                    prop_assert!((b * factor - a).abs() <= 10.0 * f64::EPSILON * a.abs());
                }
            }
            prop_assert!((p.projected.l2_distance(&c) - p.distance).abs() <= 1e-9 * p.distance.max(1e-300));
        } else {
            prop_assert_eq!(p.distance, 0.0);
            prop_assert!(sobotest_core::ball_contains(&c, &ball));
        }
    }

    #[test]
    fn distance_is_one_lipschitz(c1 in array(5), seed: u64, log_eps in -6.0f64..0.0, r in 0.0f64..2.0) {
        let noise = sample_observation(&CoefficientArray::zeros(c1.j_max()).unwrap(),
                                       &ObservationConfig { n: 1, seed, stream_id: 0 });
        let c2 = CoefficientArray::new(
            c1.iter_levels().zip(noise.iter_levels())
                .map(|((_, a), (_, z))| a.iter().zip(z).map(|(x, e)| x + 10f64.powf(log_eps) * e).collect())
                .collect(),
        ).unwrap();
        let ball = BallSpec::ell2(r, 0.5).unwrap();
        let d1 = distance_to_ball(&c1, &ball, DEFAULT_TOL).unwrap();
        let d2 = distance_to_ball(&c2, &ball, DEFAULT_TOL).unwrap();
        prop_assert!((d1 - d2).abs() <= c1.l2_distance(&c2) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn truncated_distance_nondecreasing(c in array(6), r in 0.0f64..3.0) {
        let ball = BallSpec::ell2(r, 0.1).unwrap();
        let d = truncation_distances(&c, &ball, c.j_max(), DEFAULT_TOL).unwrap();
        for w in d.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-9) - 1e-15);
        }
        let masses = c.level_norms_sq();
        let direct = distance_from_level_masses(&masses, &ball, DEFAULT_TOL).unwrap();
        prop_assert_eq!(direct, d[d.len() - 1]);
    }

    #[test]
    fn schedule_budgets(cfg in config()) {
        let sched = build_schedule(&cfg).unwrap();
        let alpha: f64 = sched.levels.iter().map(|l| l.alpha).sum();
        let beta: f64 = sched.levels.iter().map(|l| l.beta).sum();
        prop_assert!(alpha <= cfg.eta / 4.0);
        prop_assert!(beta <= cfg.eta / 4.0);
        for w in sched.levels.windows(2) {
            prop_assert!(w[0].beta > w[1].beta);
            prop_assert!(w[0].bias < w[1].bias);
            prop_assert!(w[0].rho < w[1].rho);
        }
        prop_assert!(sched.levels.iter().all(|l| l.tau >= cfg.radius * cfg.radius));
        prop_assert!(cutoff_bounds_hold(cfg.n, cfg.t, sched.cutoff));
    }

    #[test]
    fn verdict_is_pure(cfg in config().prop_filter("small J", |c| c.cutoff().unwrap() <= 10), seed: u64) {
        let j = cfg.cutoff().unwrap();
        let obs = sample_observation(&CoefficientArray::zeros(j).unwrap(), &ObservationConfig { n: cfg.n, seed, stream_id: 0 });
        prop_assert_eq!(run_test(&obs, &cfg).unwrap(), run_test(&obs, &cfg).unwrap());
        let zero = CoefficientArray::zeros(j).unwrap();
        prop_assert_eq!(run_test(&zero, &cfg).unwrap().verdict, Verdict::Accept);
    }

    #[test]
    fn wilson_contains_point_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let successes = (frac * trials as f64).round() as u64;
        let (lo, hi) = wilson_interval(successes, trials, Z95).unwrap();
        let p = successes as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        prop_assert!(hi > lo);
    }

    #[test]
    fn chi2_below_bound(log_n in 0.0f64..30.0, log_v in -12.0f64..0.0, j in 2u32..30) {
        let n = log_n.exp2() as u64;
        let v = 10f64.powf(log_v);
        let d = chi2_divergence_closed_form(n, v, j).unwrap();
        prop_assert!(d.log_value >= 0.0);
        prop_assert!(d.log_value <= d.log_bound * (1.0 + 1e-12) + 1e-300);
        let lb = total_error_lower_bound(d.value).unwrap();
        prop_assert!((0.0..=1.0).contains(&lb));
    }

    #[test]
    fn prior_draws_lie_in_smooth_ball(cfg in config().prop_filter("small J", |c| c.cutoff().unwrap() <= 12), seed: u64) {
        let k = compute_constants(&cfg).unwrap();
        prop_assert!(k.chosen.a_eta > 0.0 && k.chosen.a_eta <= 1.0);
        prop_assert!(k.chosen.a_eta <= k.sqrt_root.a_eta && k.chosen.a_eta <= k.fourth_root.a_eta);
        let v = prior_amplitude(&cfg, k.chosen.a_eta).unwrap();
        let draw = sample_from_prior(&cfg, v, seed, 0).unwrap();
        let norm = draw.sobolev_norm_sq(cfg.t).sqrt();
        prop_assert!((norm - k.chosen.a_eta * cfg.radius).abs() <= 1e-12 * norm);
    }
}
