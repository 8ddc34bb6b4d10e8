use chrono::NaiveDate;
use proptest::prelude::*;

use tickvol::gasfilter::{filter, filter_with_init, FilterInit, ModelInput, ModelParams, Variant};
use tickvol::realized::{realized_kernel, realized_variance, total_model_variance};
use tickvol::smoothing::{
    fit_spline, standardize_durations, standardize_squares, AdjustmentCurves, SplineCurve,
};
use tickvol::tickstore::{aggregate_simultaneous, clean_day, CleaningConfig, Tick, TickDay};
use tickvol::ziskellam::{log_pmf, ZiSkellamParams};

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 3, 1).unwrap()
}

/// Ticks from 09:34:30 on plus one after the close: a cent-level random
/// walk with every step nonzero, sparse large spikes, some missing prices,
/// and ties in time.
fn raw_ticks() -> impl Strategy<Value = Vec<Tick>> {
    prop::collection::vec(
        (
            0u32..4000,
            prop::sample::select(vec![-3i64, -2, -1, 1, 2, 3]),
            0u8..100,
            1u64..1000,
        ),
        60..400,
    )
    .prop_map(|steps| {
        let mut t = (9 * 3600 + 34 * 60 + 30) * 1000;
        let mut cents = 10_000i64;
        let mut out = Vec::with_capacity(steps.len());
        for (i, (gap, step, roll, vol)) in steps.into_iter().enumerate() {
            // A third of the gaps are zero so timestamps repeat.
            t += if gap % 3 == 0 { 0 } else { gap };
            cents += step;
            let mut tick = Tick::new(date(), t, cents as f64 / 100.0 + 0.001, vol);
            if roll < 3 {
                tick.price = None;
            } else if roll == 3 && i % 60 == 30 {
                tick.price = Some((cents + 800) as f64 / 100.0);
            }
            out.push(tick);
        }
        out.push(Tick::new(date(), 16 * 3600 * 1000 + 1, 100.0, 5));
        out
    })
}

fn day_from(times: &[u32], prices: &[i64]) -> TickDay {
    let ticks = times
        .iter()
        .zip(prices)
        .map(|(&t, &p)| Tick::new(date(), t, p as f64 / 100.0, 100))
        .collect();
    TickDay::from_ticks(date(), ticks).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cleaning_is_idempotent(ticks in raw_ticks()) {
        let cfg = CleaningConfig::default();
        let (once, first) = clean_day(&ticks, &cfg).unwrap();
        prop_assert_eq!(first.out_of_hours, 1);
        let (twice, stats) = clean_day(&once.ticks, &cfg).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(stats.outliers + stats.out_of_hours + stats.opening + stats.missing_price, 0);
        for t in &once.ticks {
            let p = t.price.unwrap();
            prop_assert!(p > 0.0);
            prop_assert!(((p * 100.0).round() - p * 100.0).abs() < 1e-6);
        }
        prop_assert!(once.durations.iter().all(|&d| d >= 0.0));
        prop_assert_eq!(once.durations.len(), once.ticks.len() - 1);
    }

    #[test]
    fn aggregation_conserves_volume(ticks in raw_ticks()) {
        let (day, _) = clean_day(&ticks, &CleaningConfig::default()).unwrap();
        let agg = aggregate_simultaneous(&day).unwrap();
        prop_assert!(agg.ticks.len() <= day.ticks.len());
        let v0: u64 = day.ticks.iter().map(|t| t.volume).sum();
        let v1: u64 = agg.ticks.iter().map(|t| t.volume).sum();
        prop_assert_eq!(v0, v1);
        prop_assert!(agg.durations.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn duration_standardization_is_scale_free(
        gaps in prop::collection::vec(0u32..5000, 2..200), c in 1u32..7
    ) {
        let mut t = 34_000_000;
        let times: Vec<u32> = std::iter::once(t).chain(gaps.iter().map(|g| { t += g + 1; t })).collect();
        let t0 = times[0];
        let scaled: Vec<u32> = times.iter().map(|&x| t0 + (x - t0) * c).collect();
        let prices = vec![10_000i64; times.len()];
        let a = standardize_durations(&day_from(&times, &prices)).unwrap();
        let b = standardize_durations(&day_from(&scaled, &prices)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_standardization_is_scale_free(
        y in prop::collection::vec(-20i64..20, 2..200), c in prop::sample::select(vec![-3i64, -2, -1, 2, 5])
    ) {
        prop_assume!(y.iter().any(|&v| v != 0));
        let a = standardize_squares(&y).unwrap();
        let scaled: Vec<i64> = y.iter().map(|v| v * c).collect();
        let b = standardize_squares(&scaled).unwrap();
        for (x, z) in a.iter().zip(&b) {
            prop_assert!((x - z).abs() < 1e-12);
        }
    }

    #[test]
    fn curves_are_floored(
        xs in prop::collection::vec(0.0f64..1.0, 8..40), t in -1e5f64..1e5
    ) {
        // A rough fit to alternating data can dip below zero; the curve
        // accessors must not.
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, _)| if i % 2 == 0 { 1e-3 } else { -1.0 }).collect();
        let x: Vec<f64> = (0..xs.len()).map(|i| i as f64 + xs[i] * 0.5).collect();
        let f = fit_spline(&x, &ys, None).unwrap();
        let curves = AdjustmentCurves {
            f_dur: SplineCurve::constant(1.0),
            f_var: f.clone(),
            f_rel: f,
            floor_eps: 1e-4,
        };
        prop_assert!(curves.var(t) >= 1e-4);
        prop_assert!(curves.rel(t.abs()) >= 1e-4);
        prop_assert!(curves.var(t).ln().is_finite());
    }

    #[test]
    fn skellam_parametrizations_agree(mu in -6.0f64..6.0, delta in 0.05f64..15.0, y in -25i64..25) {
        let p = ZiSkellamParams::new(mu, delta, 0.0).unwrap();
        let (l1, l2) = p.rates();
        // Difference of two Poisson laws, summed directly.
        let mut acc = 0.0;
        let mut ln_fact = vec![0.0f64; 400];
        for k in 1..400 {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        for k2 in 0..300i64 {
            let k1 = y + k2;
            if k1 < 0 {
                continue;
            }
            let lp = -l1 + k1 as f64 * l1.ln() - ln_fact[k1 as usize]
                - l2 + k2 as f64 * l2.ln() - ln_fact[k2 as usize];
            acc += lp.exp();
        }
        let got = log_pmf(y, &p).exp();
        prop_assert!((got - acc).abs() < 1e-12, "{} vs {}", got, acc);
    }

    #[test]
    fn filter_identities(
        y in prop::collection::vec(-6i64..6, 1..120),
        theta in -0.9f64..0.9, omega in -1.0f64..1.5, phi in -0.95f64..0.99,
        alpha in 0.0f64..0.4, pi in 0.01f64..0.6, seed in 0u64..1000,
    ) {
        let n = y.len();
        let input = ModelInput {
            log_diurnal: (0..n).map(|i| 0.3 * ((i as f64 + seed as f64) * 0.37).sin()).collect(),
            log_duration: (0..n).map(|i| 0.2 * ((i as f64) * 0.11 + seed as f64).cos()).collect(),
            y,
        };
        let params = ModelParams { theta, omega, phi, alpha, pi, ..Default::default() };
        let spec = Variant::Proposed.spec();
        let a = filter(&spec, &params, &input).unwrap();
        let b = filter(&spec, &params, &input).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.delta_path.iter().all(|&d| d > 0.0));
        prop_assert!(a.loglik_terms.iter().all(|v| v.is_finite()));
        for (i, adj) in a.adjusted_path().iter().enumerate() {
            let back = a.delta_path[i] / a.log_adjust_path[i].exp();
            prop_assert!((adj - back).abs() <= 1e-12 * adj.max(1.0));
        }
        // TMV is at least (1 - pi) sum(delta).
        let floor: f64 = a.delta_path.iter().map(|d| (1.0 - pi) * d).sum();
        prop_assert!(total_model_variance(&a).unwrap() >= floor);
    }

    #[test]
    fn eps_decays_geometrically_without_scores(
        y in prop::collection::vec(-5i64..5, 40..80), phi in -0.95f64..0.95, eps0 in -3.0f64..3.0
    ) {
        let params = ModelParams { theta: -0.3, omega: 0.2, phi, alpha: 0.0, pi: 0.1, ..Default::default() };
        let out = filter_with_init(&Variant::Proposed.spec(), &params, &ModelInput::unadjusted(y), FilterInit { mu: 0.0, eps: eps0 }).unwrap();
        for (i, e) in out.epsilon_path.iter().enumerate() {
            prop_assert!((e - eps0 * phi.powi(i as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn measures_are_sign_symmetric(
        y in prop::collection::vec(-8i64..8, 30..200),
        theta in -0.8f64..0.0, phi in 0.0f64..0.98, alpha in 0.0f64..0.3,
    ) {
        let neg: Vec<i64> = y.iter().map(|v| -v).collect();
        prop_assert_eq!(realized_variance(&y.iter().map(|&v| v as f64).collect::<Vec<_>>()),
                        realized_variance(&neg.iter().map(|&v| v as f64).collect::<Vec<_>>()));
        let a = realized_kernel(&y.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        let b = realized_kernel(&neg.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let params = ModelParams { theta, omega: 0.1, phi, alpha, pi: 0.2, ..Default::default() };
        let spec = Variant::Proposed.spec().without_adjustments();
        let fa = filter(&spec, &params, &ModelInput::unadjusted(y)).unwrap();
        let fb = filter(&spec, &params, &ModelInput::unadjusted(neg)).unwrap();
        for (m1, m2) in fa.mu_path.iter().zip(&fb.mu_path) {
            prop_assert!((m1 + m2).abs() < 1e-12);
        }
        let ta = total_model_variance(&fa).unwrap();
        let tb = total_model_variance(&fb).unwrap();
        prop_assert!((ta - tb).abs() <= 1e-9 * ta);
    }
}
