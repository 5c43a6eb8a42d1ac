//! Random subsets `A_n` of `{1, ..., n}`, exact `log LCM(A_n)`, and paths
//! `t -> log L_{floor(nt)}`.
//!
//! Element `k` is retained iff word `k` of the replica's [`Stream`] passes the
//! Bernoulli(`theta`) threshold, so a subset, a path and any other view of
//! the same `(seed, replica, n, theta)` see identical decisions.

use serde::{Deserialize, Serialize};

use crate::analytic::validate_grid;
use crate::numtheory::{lcm_log_exact, SieveTable};
use crate::rng::{BernoulliThreshold, Stream};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Largest `n` accepted by [`enumerate_exact_mean`].
pub const MAX_ENUMERATION_N: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSample {
    pub n: u64,
    pub theta: f64,
    /// Retained elements, increasing.
    pub retained: Vec<u64>,
    pub seed: u64,
    pub replica: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub n: u64,
    pub theta: f64,
    pub grid: Vec<f64>,
    /// `log L_{floor(n t_j)}` for each grid point.
    pub values: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

/// Split of `log L` into first-power and higher-power prime contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposedLogLcm {
    /// `sum_p log p * I_A(p)`.
    pub s1: f64,
    /// `sum_p sum_{k >= 2} log p * I_A(p^k)`.
    pub s2: f64,
    /// Part of `s1` from primes `p <= sqrt(n)`.
    pub s1_small: f64,
    /// Part of `s1` from primes `p > sqrt(n)`.
    pub s1_large: f64,
}

/// Validates `theta` in `(0, 1]` and returns its element threshold.
pub fn retention_threshold(theta: f64) -> Result<BernoulliThreshold> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(BernoulliThreshold::new(theta))
    } else {
        Err(Error::Domain(format!("retention probability must lie in (0, 1], got {theta}")))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("n must be positive".into()))
    } else {
        Ok(())
    }
}

fn check_table(n: u64, table: &SieveTable) -> Result<()> {
    if n > table.limit() {
        Err(Error::Range {
            what: "n",
            value: n as f64,
            limit: table.limit(),
        })
    } else {
        Ok(())
    }
}

pub fn sample_subset(n: u64, theta: f64, stream: &Stream) -> Result<SubsetSample> {
    check_n(n)?;
    let thr = retention_threshold(theta)?;
    let retained = (1..=n).filter(|&k| thr.accepts(stream.word_at(k))).collect();
    let origin = stream.origin();
    Ok(SubsetSample {
        n,
        theta,
        retained,
        seed: origin.seed,
        replica: origin.replica,
    })
}

/// Incremental `log LCM` by the maximum-prime-exponent method:
/// `log LCM(A) = sum_p (max_{a in A} v_p(a)) log p`.
///
/// Holds one byte per integer up to `n`; [`reset`](Self::reset) only
/// clears the primes actually touched, so one accumulator is reused across
/// replicas.
#[derive(Debug, Clone)]
pub struct LcmAccumulator<'a> {
    table: &'a SieveTable,
    max_exp: Vec<u8>,
    touched: Vec<u32>,
    total: CompensatedSum,
}

impl<'a> LcmAccumulator<'a> {
    pub fn new(table: &'a SieveTable, n: u64) -> Result<Self> {
        check_table(n, table)?;
        Ok(Self {
            table,
            max_exp: vec![0; n as usize + 1],
            touched: Vec::new(),
            total: CompensatedSum::new(),
        })
    }

    pub fn reset(&mut self) {
        for &p in &self.touched {
            self.max_exp[p as usize] = 0;
        }
        self.touched.clear();
        self.total = CompensatedSum::new();
    }

    /// Folds `a` into the LCM. `1 <= a <= n`.
    #[inline]
    pub fn push(&mut self, a: u64) {
        debug_assert!(a >= 1 && (a as usize) < self.max_exp.len());
        let mut r = a;
        while r > 1 {
            // r <= n <= limit, so spf is defined
            let p = self.table.spf(r).unwrap_or(r);
            let mut e = 0u8;
            while r % p == 0 {
                r /= p;
                e += 1;
            }
            let slot = &mut self.max_exp[p as usize];
            if e > *slot {
                if *slot == 0 {
                    self.touched.push(p as u32);
                }
                self.total.add(f64::from(e - *slot) * (p as f64).ln());
                *slot = e;
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.total.value()
    }

    /// `(prime, max exponent)` for every prime dividing the current LCM,
    /// in first-touched order.
    pub fn exponents(&self) -> impl Iterator<Item = (u64, u8)> + '_ {
        self.touched
            .iter()
            .map(move |&p| (u64::from(p), self.max_exp[p as usize]))
    }
}

pub fn log_lcm_of_subset(sample: &SubsetSample, table: &SieveTable) -> Result<f64> {
    let mut acc = LcmAccumulator::new(table, sample.n)?;
    for &a in &sample.retained {
        acc.push(a);
    }
    Ok(acc.value())
}

/// `log LCM(A) = sum_m Lambda(m) I_A(m)` with `I_A(m) = 1` iff `A` contains
/// a multiple of `m`. `O(n log n)` reference implementation.
pub fn log_lcm_indicator_sum(elements: &[u64], n: u64, table: &SieveTable) -> Result<f64> {
    check_n(n)?;
    check_table(n, table)?;
    let mut member = vec![false; n as usize + 1];
    for &a in elements {
        if a == 0 || a > n {
            return Err(Error::Domain(format!("element {a} outside [1, {n}]")));
        }
        member[a as usize] = true;
    }
    let mut acc = CompensatedSum::new();
    for (m, lp) in table.prime_powers_upto(n)? {
        if (m..=n).step_by(m as usize).any(|k| member[k as usize]) {
            acc.add(lp);
        }
    }
    Ok(acc.value())
}

/// Running `log L_k` recorded at each of the nondecreasing `counts`.
pub fn path_at_counts(
    n: u64,
    theta: f64,
    counts: &[u64],
    stream: &Stream,
    acc: &mut LcmAccumulator<'_>,
) -> Result<Vec<f64>> {
    check_n(n)?;
    let thr = retention_threshold(theta)?;
    if counts.windows(2).any(|w| w[1] < w[0]) || counts.last().is_some_and(|&c| c > n) {
        return Err(Error::Domain(format!("path counts must be nondecreasing and <= {n}")));
    }
    acc.reset();
    let mut values = Vec::with_capacity(counts.len());
    let mut k = 0u64;
    for &c in counts {
        while k < c {
            k += 1;
            if thr.accepts(stream.word_at(k)) {
                acc.push(k);
            }
        }
        values.push(acc.value());
    }
    Ok(values)
}

/// `floor(n t)` for each grid point.
pub fn grid_counts(n: u64, grid: &[f64]) -> Vec<u64> {
    grid.iter()
        .map(|&t| ((n as f64 * t).floor() as u64).min(n))
        .collect()
}

pub fn sample_path(
    n: u64,
    theta: f64,
    grid: &[f64],
    stream: &Stream,
    table: &SieveTable,
) -> Result<PathSample> {
    check_n(n)?;
    validate_grid(grid)?;
    let mut acc = LcmAccumulator::new(table, n)?;
    let values = path_at_counts(n, theta, &grid_counts(n, grid), stream, &mut acc)?;
    let origin = stream.origin();
    Ok(PathSample {
        n,
        theta,
        grid: grid.to_vec(),
        values,
        seed: origin.seed,
        replica: origin.replica,
    })
}

pub fn decompose_log_lcm(sample: &SubsetSample, table: &SieveTable) -> Result<DecomposedLogLcm> {
    let mut acc = LcmAccumulator::new(table, sample.n)?;
    for &a in &sample.retained {
        acc.push(a);
    }
    let mut small = CompensatedSum::new();
    let mut large = CompensatedSum::new();
    let mut higher = CompensatedSum::new();
    for (p, e) in acc.exponents() {
        let lp = (p as f64).ln();
        if p.saturating_mul(p) <= sample.n {
            small.add(lp);
        } else {
            large.add(lp);
        }
        if e > 1 {
            higher.add(f64::from(e - 1) * lp);
        }
    }
    let (s1_small, s1_large) = (small.value(), large.value());
    Ok(DecomposedLogLcm {
        s1: s1_small + s1_large,
        s2: higher.value(),
        s1_small,
        s1_large,
    })
}

/// `E log L_n` by summing over all `2^n` subsets with exact big-integer LCMs.
pub fn enumerate_exact_mean(n: u64, theta: f64) -> Result<f64> {
    check_n(n)?;
    if n > MAX_ENUMERATION_N {
        return Err(Error::Config(format!(
            "enumeration over 2^{n} subsets refused (n <= {MAX_ENUMERATION_N})"
        )));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta must lie in [0, 1], got {theta}")));
    }
    let mut acc = CompensatedSum::new();
    let mut elements = Vec::with_capacity(n as usize);
    for mask in 0u32..(1 << n) {
        elements.clear();
        elements.extend((0..n).filter(|&i| mask >> i & 1 == 1).map(|i| i + 1));
        let size = elements.len() as i32;
        let weight = theta.powi(size) * (1.0 - theta).powi(n as i32 - size);
        if weight > 0.0 {
            acc.add(weight * lcm_log_exact(&elements));
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::build_sieve;
    use proptest::prelude::*;

    #[test]
    fn full_retention_keeps_everything() {
        let s = sample_subset(5, 1.0, &Stream::new(1, 0)).unwrap();
        assert_eq!(s.retained, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn tiny_theta_is_almost_always_empty() {
        let nonempty = (0..10_000)
            .filter(|&r| !sample_subset(10, 1e-12, &Stream::new(3, r)).unwrap().retained.is_empty())
            .count();
        assert_eq!(nonempty, 0);
    }

    #[test]
    fn subset_size_is_binomial() {
        // 6 sigma band of Binomial(10^5, 1/2)
        for r in 0..20 {
            let s = sample_subset(100_000, 0.5, &Stream::new(17, r)).unwrap();
            let size = s.retained.len();
            assert!((49_051..=50_949).contains(&size), "{size}");
        }
    }

    #[test]
    fn invalid_parameters() {
        let st = Stream::new(0, 0);
        assert!(sample_subset(0, 0.5, &st).is_err());
        assert!(sample_subset(5, 0.0, &st).is_err());
        assert!(sample_subset(5, 1.5, &st).is_err());
        let table = build_sieve(100).unwrap();
        assert!(matches!(
            sample_path(101, 0.5, &[1.0], &st, &table),
            Err(Error::Range { .. })
        ));
        assert!(sample_path(50, 0.5, &[0.5, 0.2], &st, &table).is_err());
    }

    #[test]
    fn log_lcm_examples() {
        let table = build_sieve(100).unwrap();
        let mk = |retained: Vec<u64>| SubsetSample {
            n: 10,
            theta: 0.5,
            retained,
            seed: 0,
            replica: 0,
        };
        assert!((log_lcm_of_subset(&mk(vec![4, 6]), &table).unwrap() - 12f64.ln()).abs() < 1e-15);
        assert_eq!(log_lcm_of_subset(&mk(vec![]), &table).unwrap(), 0.0);
    }

    #[test]
    fn path_examples() {
        let table = build_sieve(100).unwrap();
        let st = Stream::new(5, 2);
        let p = sample_path(10, 1.0, &[0.5, 1.0], &st, &table).unwrap();
        assert!((p.values[0] - 60f64.ln()).abs() < 1e-14);
        assert!((p.values[1] - 2520f64.ln()).abs() < 1e-14);
        let p = sample_path(10, 0.5, &[0.0], &st, &table).unwrap();
        assert_eq!(p.values, vec![0.0]);
        let subset = sample_subset(77, 0.3, &st).unwrap();
        let p = sample_path(77, 0.3, &[1.0], &st, &table).unwrap();
        assert_eq!(p.values[0], log_lcm_of_subset(&subset, &table).unwrap());
    }

    #[test]
    fn full_path_value_equals_psi_cache_bitwise() {
        // same terms, same order, compensated: identical bits
        let table = build_sieve(50_000).unwrap().with_psi_cache();
        let p = sample_path(50_000, 1.0, &[1.0], &Stream::new(1, 1), &table).unwrap();
        assert_eq!(p.values[0], table.chebyshev_psi(50_000.0).unwrap());
    }

    #[test]
    fn decomposition_examples() {
        let table = build_sieve(100).unwrap();
        let d = decompose_log_lcm(
            &SubsetSample { n: 4, theta: 0.5, retained: vec![4], seed: 0, replica: 0 },
            &table,
        )
        .unwrap();
        assert!((d.s1 - 2f64.ln()).abs() < 1e-15 && (d.s2 - 2f64.ln()).abs() < 1e-15);
        let d = decompose_log_lcm(
            &SubsetSample { n: 50, theta: 0.5, retained: vec![47], seed: 0, replica: 0 },
            &table,
        )
        .unwrap();
        assert_eq!((d.s1, d.s2, d.s1_small), (47f64.ln(), 0.0, 0.0));
    }

    fn expected_s2(n: u64, theta: f64, table: &SieveTable) -> f64 {
        table
            .prime_powers_upto(n)
            .unwrap()
            .into_iter()
            .filter(|&(m, _)| !table.is_prime(m))
            .map(|(m, lp)| lp * (1.0 - (1.0 - theta).powi((n / m) as i32)))
            .sum()
    }

    #[test]
    fn higher_powers_match_expectation_and_shrink() {
        let n = 100_000u64;
        let table = build_sieve(n).unwrap();
        let (mut sum, mut sq) = (0.0, 0.0);
        for r in 0..100 {
            let s = sample_subset(n, 0.5, &Stream::new(8, r)).unwrap();
            let d = decompose_log_lcm(&s, &table).unwrap();
            let total = log_lcm_of_subset(&s, &table).unwrap();
            assert!((d.s1 + d.s2 - total).abs() < 1e-9 * total);
            assert_eq!(d.s1, d.s1_small + d.s1_large);
            sum += d.s2;
            sq += d.s2 * d.s2;
        }
        let mean = sum / 100.0;
        let se = ((sq / 100.0 - mean * mean) / 99.0).sqrt();
        let expected = expected_s2(n, 0.5, &table);
        assert!((mean - expected).abs() < 4.0 * se + 1e-9, "{mean} vs {expected}");
        let ratio = |n: u64| expected_s2(n, 0.5, &table) / (n as f64 * (n as f64).ln()).sqrt();
        assert!(ratio(100_000) < ratio(10_000) && ratio(10_000) < ratio(1_000));
    }

    #[test]
    fn enumeration_examples() {
        assert!((enumerate_exact_mean(2, 0.5).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(enumerate_exact_mean(1, 0.3).unwrap(), 0.0);
        // 16 subsets of {1,2,3,4}: (3/4) log 2 + (1/2) log 3 + (1/2) log 2
        let by_hand = 1.25 * 2f64.ln() + 0.5 * 3f64.ln();
        assert!((enumerate_exact_mean(4, 0.5).unwrap() - by_hand).abs() < 1e-15);
        assert!(matches!(enumerate_exact_mean(17, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn three_routes_agree_on_random_subsets() {
        let table = build_sieve(2000).unwrap();
        for r in 0..1000u64 {
            let st = Stream::new(2024, r);
            let n = 1 + st.word_at(0) % 2000;
            let theta = 0.02 + 0.96 * st.uniform_at(1 << 40);
            let s = sample_subset(n, theta, &st).unwrap();
            let fast = log_lcm_of_subset(&s, &table).unwrap();
            let ind = log_lcm_indicator_sum(&s.retained, n, &table).unwrap();
            let exact = lcm_log_exact(&s.retained);
            let scale = exact.max(1.0);
            assert!((fast - exact).abs() <= 1e-9 * scale, "r = {r}");
            assert!((ind - exact).abs() <= 1e-9 * scale, "r = {r}");
        }
    }

    proptest! {
        #[test]
        fn paths_are_monotone_and_dominated_by_psi(seed in any::<u64>(), n in 1u64..3000, theta in 0.01f64..1.0) {
            let table = build_sieve(3000).unwrap();
            let grid: Vec<f64> = (0..=20).map(|i| f64::from(i) / 20.0).collect();
            let p = sample_path(n, theta, &grid, &Stream::new(seed, 0), &table).unwrap();
            prop_assert_eq!(p.values[0], 0.0);
            for w in p.values.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            let psi = table.chebyshev_psi(n as f64).unwrap();
            prop_assert!(*p.values.last().unwrap() <= psi * (1.0 + 1e-12));
        }

        #[test]
        fn same_seed_same_subset(seed in any::<u64>(), replica in any::<u64>(), n in 1u64..500, theta in 0.01f64..=1.0) {
            let a = sample_subset(n, theta, &Stream::new(seed, replica)).unwrap();
            let b = sample_subset(n, theta, &Stream::new(seed, replica)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
