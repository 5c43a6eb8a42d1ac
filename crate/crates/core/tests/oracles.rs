use lcmlimit::analytic::{g_func, mean_log_lcm, GMode, ThetaParams};
use lcmlimit::gausslimit::{simulate_cholesky, simulate_series, SeriesConfig};
use lcmlimit::numtheory::{lcm_log_exact, BigLcm, SieveTable};
use lcmlimit::rng::Stream;
use lcmlimit::sampler::{
    enumerate_exact_mean, log_lcm_indicator_sum, log_lcm_of_subset, sample_path, sample_subset,
    LcmAccumulator,
};
use proptest::prelude::*;

fn table() -> SieveTable {
    SieveTable::build(5_000).unwrap()
}

#[test]
fn psi_matches_big_integer_lcm() {
    let t = table();
    let mut lcm = BigLcm::new();
    for n in 1..=2_000u64 {
        lcm.push(n);
        let psi = t.chebyshev_psi(n as f64).unwrap();
        assert!((psi - lcm.ln()).abs() <= 1e-9 * lcm.ln().max(1.0), "n = {n}");
    }
}

#[test]
fn mean_matches_enumeration() {
    let t = table();
    for n in 1..=12u64 {
        for theta in [0.1, 0.5, 0.9] {
            let exact = enumerate_exact_mean(n, theta).unwrap();
            let fast = mean_log_lcm(n, ThetaParams::new(theta).unwrap(), &t).unwrap();
            assert!((fast - exact).abs() <= 1e-10 * exact.max(1.0), "n = {n}, theta = {theta}");
        }
    }
}

#[test]
fn mean_of_four_at_half() {
    let t = table();
    let m = mean_log_lcm(4, ThetaParams::new(0.5).unwrap(), &t).unwrap();
    assert!((m - 1.415_740_120_033_986).abs() < 1e-12);
}

#[test]
fn g_at_half() {
    let g = g_func(0.5, GMode::Closed).unwrap();
    assert!((g - 0.169_899).abs() < 5e-7);
}

#[test]
fn gaussian_batches_are_reproducible() {
    let theta = ThetaParams::new(0.3).unwrap();
    let grid = [0.5, 1.0];
    let config = SeriesConfig::with_tail(theta, &grid, 11, 1e-3).unwrap();
    let a = simulate_series(&config, 50).unwrap();
    let b = simulate_series(&config, 50).unwrap();
    assert_eq!(a.paths, b.paths);
    let c = simulate_cholesky(theta, &grid, 50, 11).unwrap();
    let d = simulate_cholesky(theta, &grid, 50, 11).unwrap();
    assert_eq!(c.paths, d.paths);
}

proptest! {
    #[test]
    fn accumulator_matches_big_integer(seed in any::<u64>(), n in 1u64..3_000, theta in 0.01f64..1.0) {
        let t = table();
        let sample = sample_subset(n, theta, &Stream::new(seed, 0)).unwrap();
        let fast = log_lcm_of_subset(&sample, &t).unwrap();
        let exact = lcm_log_exact(&sample.retained);
        let indicator = log_lcm_indicator_sum(&sample.retained, n, &t).unwrap();
        prop_assert!((fast - exact).abs() <= 1e-9 * exact.max(1.0));
        prop_assert!((indicator - exact).abs() <= 1e-9 * exact.max(1.0));
    }

    #[test]
    fn accumulator_ignores_order_and_duplicates(mut xs in proptest::collection::vec(1u64..2_000, 0..60)) {
        let t = table();
        let mut acc = LcmAccumulator::new(&t, 2_000).unwrap();
        for &x in &xs {
            acc.push(x);
        }
        let forward = acc.value();
        acc.reset();
        xs.reverse();
        for &x in xs.iter().chain(xs.iter()) {
            acc.push(x);
        }
        prop_assert!((acc.value() - forward).abs() <= 1e-9 * forward.max(1.0));
    }

    #[test]
    fn path_is_nondecreasing_and_ends_at_subset_value(seed in any::<u64>(), n in 10u64..4_000) {
        let t = table();
        let stream = Stream::new(seed, 3);
        let grid = [0.1, 0.3, 0.7, 1.0];
        let path = sample_path(n, 0.4, &grid, &stream, &t).unwrap();
        prop_assert!(path.values.windows(2).all(|w| w[0] <= w[1]));
        let whole = sample_subset(n, 0.4, &stream).unwrap();
        let end = log_lcm_of_subset(&whole, &t).unwrap();
        prop_assert!((path.values[3] - end).abs() <= 1e-12 * end.max(1.0));
    }

    #[test]
    fn streams_are_pure_functions_of_key(seed in any::<u64>(), replica in any::<u64>(), k in any::<u64>()) {
        let a = Stream::new(seed, replica);
        let b = Stream::new(seed, replica);
        prop_assert_eq!(a.word_at(k), b.word_at(k));
        let u = a.uniform_at(k);
        prop_assert!((0.0..1.0).contains(&u));
    }
}
