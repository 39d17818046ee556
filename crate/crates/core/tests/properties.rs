use std::f64::consts::LOG2_E;

use proptest::prelude::*;

use risfbl::channel::{gamma_fit, moments_x, GammaFit, LinkGains, PhaseModel};
use risfbl::fbl::{
    avg_bler_detailed, avg_rate_exact, avg_rate_lower_bound, c1_avg_capacity,
    c2_avg_sqrt_dispersion,
};
use risfbl::montecarlo::{empirical_stats, ks_distance, sample_snr_batch, McConfig};
use risfbl::specfun::{
    gamma_cdf, inv_q, kummer_u, ln_gamma, q_function, upper_inc_gamma, EvalPolicy,
};

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn fit_strategy() -> impl Strategy<Value = GammaFit> {
    (log_uniform(0.5, 200.0), log_uniform(1e-4, 10.0))
        .prop_map(|(a, b)| GammaFit::new(a, b).unwrap())
}

fn gains_strategy() -> impl Strategy<Value = LinkGains> {
    (
        prop_oneof![Just(0.0), log_uniform(1e-14, 1e-6)],
        log_uniform(1e-10, 1e-4),
        log_uniform(1e-10, 1e-4),
    )
        .prop_map(|(d, a, b)| LinkGains::new(d, a, b).unwrap())
}

fn phase_strategy() -> impl Strategy<Value = PhaseModel> {
    prop_oneof![
        Just(PhaseModel::Perfect),
        (0.01..1.0f64).prop_map(PhaseModel::UniformSpread),
        (1u32..6).prop_map(PhaseModel::QuantizedBits),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incomplete_gamma_normalization(a in 0.05..100.0f64, x in 0.0..50.0f64, rate in 0.1..5.0f64) {
        let g = ln_gamma(a).unwrap().exp();
        prop_assert!((upper_inc_gamma(a, 0.0).unwrap() / g - 1.0).abs() < 1e-12);
        let cdf = gamma_cdf(x, a, rate).unwrap();
        prop_assert!((cdf - (1.0 - upper_inc_gamma(a, rate * x).unwrap() / g)).abs() < 1e-12);
    }

    #[test]
    fn kummer_u_decreasing_in_z(a in 0.1..50.0f64, b in -20.0..5.0f64, z in 1e-3..40.0f64, dz in 0.01..10.0f64) {
        let p = EvalPolicy::default();
        prop_assert!(kummer_u(a, b, z, &p).unwrap() > kummer_u(a, b, z + dz, &p).unwrap());
    }

    #[test]
    fn second_moment_exceeds_square_of_mean(g in gains_strategy(), n in 1usize..3000, phase in phase_strategy()) {
        let m = moments_x(&g, n, phase).unwrap();
        prop_assert!(m.m2 > m.m1 * m.m1);
    }

    #[test]
    fn fit_round_trips_moments(g in gains_strategy(), n in 1usize..3000, phase in phase_strategy(), rho in log_uniform(1e3, 1e12)) {
        let m = moments_x(&g, n, phase).unwrap();
        let fit = gamma_fit(&m, rho).unwrap();
        prop_assert!(rel(fit.mean(), rho * m.m1) < 1e-12);
        prop_assert!(rel(fit.variance() + fit.mean().powi(2), rho * rho * m.m2) < 1e-12);
    }

    #[test]
    fn mean_nondecreasing_in_elements(g in gains_strategy(), n in 1usize..3000, dn in 1usize..500, phase in phase_strategy()) {
        let a = moments_x(&g, n, phase).unwrap().m1;
        let b = moments_x(&g, n + dn, phase).unwrap().m1;
        prop_assert!(b >= a);
    }

    #[test]
    fn vanishing_spread_recovers_perfect(g in gains_strategy(), n in 1usize..3000) {
        let p = moments_x(&g, n, PhaseModel::Perfect).unwrap();
        let s = moments_x(&g, n, PhaseModel::UniformSpread(1e-7)).unwrap();
        prop_assert!(rel(s.m1, p.m1) < 1e-9);
        prop_assert!(rel(s.m2, p.m2) < 1e-9);
    }

    #[test]
    fn half_target_rate_is_capacity(fit in fit_strategy(), r in 100.0..2000.0f64) {
        let p = EvalPolicy::default();
        prop_assert_eq!(avg_rate_exact(&fit, r, 0.5, &p).unwrap(), c1_avg_capacity(&fit, &p).unwrap());
    }

    #[test]
    fn root_dispersion_bounded_and_increasing(a in log_uniform(0.5, 200.0), b in log_uniform(1e-4, 10.0), shrink in 1.1..10.0f64) {
        let p = EvalPolicy::default();
        let lo = c2_avg_sqrt_dispersion(&GammaFit::new(a, b).unwrap(), &p).unwrap();
        let hi = c2_avg_sqrt_dispersion(&GammaFit::new(a, b / shrink).unwrap(), &p).unwrap();
        prop_assert!(lo >= 0.0 && hi <= LOG2_E);
        prop_assert!(hi > lo);
    }

    #[test]
    fn bler_closed_form_matches_reference(fit in fit_strategy(), r in 100.0..1000.0f64, rate in 0.2..1.5f64) {
        let l = (rate * r).round();
        let d = avg_bler_detailed(&fit, r, l).unwrap();
        if !d.cancellation && d.reference > 1e-300 {
            prop_assert!(rel(d.closed_form, d.reference) < 1e-9, "{:?}", d);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // Below shape ~0.68 the Jensen-type capacity term can exceed the true
    // average capacity at high mean SNR; see the pinned case below.
    #[test]
    fn lower_bound_below_exact_rate(a in log_uniform(1.0, 200.0), b in log_uniform(1e-4, 10.0), r in 100.0..2000.0f64, k in 1i32..12) {
        let fit = GammaFit::new(a, b).unwrap();
        let eps = 10f64.powi(-k);
        let exact = avg_rate_exact(&fit, r, eps, &EvalPolicy::default()).unwrap();
        prop_assert!(avg_rate_lower_bound(&fit, r, eps).unwrap() <= exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Doubling the effort changes results by less than the tolerance.
    #[test]
    fn truncation_stability(fit in fit_strategy()) {
        let base = EvalPolicy::default();
        let more_terms = EvalPolicy { max_series_terms: 2 * base.max_series_terms, ..base };
        let more_points = EvalPolicy { quadrature_points: 2 * base.quadrature_points, ..base };
        for f in [c1_avg_capacity, c2_avg_sqrt_dispersion] {
            let v = f(&fit, &base).unwrap();
            prop_assert!(rel(f(&fit, &more_terms).unwrap(), v) < 1e-9);
            prop_assert!(rel(f(&fit, &more_points).unwrap(), v) < base.rel_tol.max(1e-9));
        }
    }
}

#[test]
fn lower_bound_fails_at_small_shape() {
    // E[log2(1+g)] = 10.45628 against a Jensen term of 10.50081
    let fit = GammaFit::new(0.6049428391211381, 1.553897355140373e-4).unwrap();
    let exact = avg_rate_exact(&fit, 100.0, 0.1, &EvalPolicy::default()).unwrap();
    assert!(avg_rate_lower_bound(&fit, 100.0, 0.1).unwrap() > exact);
}

#[test]
fn inverse_q_round_trip() {
    for k in 1..=12 {
        let p = 10f64.powi(-k);
        assert!(rel(q_function(inv_q(p).unwrap()), p) < 1e-9, "1e-{k}");
    }
}

fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn gains() -> LinkGains {
    LinkGains::new(0.0, 3e-7, 2e-6).unwrap()
}

#[test]
fn small_spread_sampler_matches_perfect() {
    let mc = McConfig::default();
    let p = sample_snr_batch(&gains(), 64, PhaseModel::Perfect, 1e4, &mc.with_stream(1)).unwrap();
    let s = sample_snr_batch(
        &gains(),
        64,
        PhaseModel::UniformSpread(1e-6),
        1e4,
        &mc.with_stream(2),
    )
    .unwrap();
    let d = two_sample_ks(&p, &s);
    assert!(d < 0.02, "two-sample KS {d}");
}

#[test]
fn fit_improves_with_elements() {
    let mc = McConfig::default();
    let ks = |n: usize| {
        let m = moments_x(&gains(), n, PhaseModel::Perfect).unwrap();
        let fit = gamma_fit(&m, 1e4).unwrap();
        let x = sample_snr_batch(
            &gains(),
            n,
            PhaseModel::Perfect,
            1e4,
            &mc.with_stream(n as u64),
        )
        .unwrap();
        ks_distance(&empirical_stats(&x).unwrap(), &fit).unwrap()
    };
    let (small, large) = (ks(16), ks(1024));
    assert!(large < small, "KS {small} at N=16, {large} at N=1024");
}

#[test]
fn identical_config_identical_samples() {
    let mc = McConfig {
        realizations: 3000,
        seed: 5,
        stream_id: 9,
    };
    let a = sample_snr_batch(&gains(), 100, PhaseModel::QuantizedBits(2), 1e4, &mc).unwrap();
    let b = sample_snr_batch(&gains(), 100, PhaseModel::QuantizedBits(2), 1e4, &mc).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
