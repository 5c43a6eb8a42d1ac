//! Sieve tables, the von Mangoldt function, Chebyshev functions and a
//! big-integer LCM oracle.

use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Default upper bound on the sieve limit (4 bytes per entry).
pub const DEFAULT_SIEVE_CAP: u64 = 100_000_000;

/// Environment variable overriding [`DEFAULT_SIEVE_CAP`].
pub const SIEVE_CAP_ENV: &str = "LCMLIMIT_SIEVE_CAP";

/// Smallest-prime-factor table and prime list up to `limit`.
///
/// Immutable after construction and `Sync`, so one table is shared by all
/// replica workers.
#[derive(Debug, Clone)]
pub struct SieveTable {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u32>,
    psi_prefix: Option<Vec<f64>>,
}

/// Sieve cap from [`SIEVE_CAP_ENV`], falling back to [`DEFAULT_SIEVE_CAP`].
pub fn sieve_cap_from_env() -> Result<u64> {
    match std::env::var(SIEVE_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::Config(format!("{SIEVE_CAP_ENV}={v:?}: {e}"))),
        Err(_) => Ok(DEFAULT_SIEVE_CAP),
    }
}

pub fn build_sieve(limit: u64) -> Result<SieveTable> {
    SieveTable::build(limit)
}

impl SieveTable {
    pub fn build(limit: u64) -> Result<Self> {
        Self::build_with_cap(limit, DEFAULT_SIEVE_CAP)
    }

    /// Linear sieve: every composite is struck exactly once, by its
    /// smallest prime factor.
    pub fn build_with_cap(limit: u64, cap: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::Config(format!("sieve limit must be >= 2, got {limit}")));
        }
        if limit > cap || limit >= u64::from(u32::MAX) {
            return Err(Error::Config(format!(
                "sieve limit {limit} exceeds the memory cap {cap}"
            )));
        }
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::with_capacity(approx_prime_count(limit));
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let m = i * p as usize;
                if p > si || m > n {
                    break;
                }
                spf[m] = p;
            }
        }
        Ok(Self {
            limit,
            spf,
            primes,
            psi_prefix: None,
        })
    }

    /// Adds a cumulative `psi` table so [`chebyshev_psi`](Self::chebyshev_psi)
    /// becomes a lookup. Costs 8 bytes per entry.
    pub fn with_psi_cache(mut self) -> Self {
        let mut prefix = vec![0.0; self.limit as usize + 1];
        let mut acc = CompensatedSum::new();
        for m in 2..=self.limit {
            if let Some(lp) = self.prime_power_log(m) {
                acc.add(lp);
            }
            prefix[m as usize] = acc.value();
        }
        self.psi_prefix = Some(prefix);
        self
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Smallest prime factor of `m`, for `2 <= m <= limit`.
    #[inline]
    pub fn spf(&self, m: u64) -> Option<u64> {
        if m < 2 || m > self.limit {
            None
        } else {
            Some(u64::from(self.spf[m as usize]))
        }
    }

    pub fn is_prime(&self, m: u64) -> bool {
        self.spf(m) == Some(m)
    }

    /// Prime factorization of `1 <= m <= limit` as `(prime, exponent)` pairs
    /// in increasing prime order.
    pub fn factorize(&self, m: u64) -> Result<Vec<(u64, u32)>> {
        self.check_int("m", m)?;
        let mut out = Vec::new();
        let mut r = m as usize;
        while r > 1 {
            let p = self.spf[r] as usize;
            let mut e = 0;
            while r % p == 0 {
                r /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        Ok(out)
    }

    /// `log p` when `m = p^k` with `k >= 1`, assuming `2 <= m <= limit`.
    #[inline]
    fn prime_power_log(&self, m: u64) -> Option<f64> {
        let p = self.spf[m as usize] as u64;
        let mut r = m;
        while r % p == 0 {
            r /= p;
        }
        (r == 1).then(|| (p as f64).ln())
    }

    /// von Mangoldt function.
    pub fn mangoldt(&self, m: u64) -> Result<f64> {
        self.check_int("m", m)?;
        if m < 2 {
            return Ok(0.0);
        }
        Ok(self.prime_power_log(m).unwrap_or(0.0))
    }

    /// All prime powers `m <= n` with `log p`, sorted by `m`.
    pub fn prime_powers_upto(&self, n: u64) -> Result<Vec<(u64, f64)>> {
        self.check_int("n", n)?;
        let mut out = Vec::new();
        for &p in self.primes_upto(n) {
            let p = u64::from(p);
            let lp = (p as f64).ln();
            let mut q = p;
            while q <= n {
                out.push((q, lp));
                q *= p;
            }
        }
        out.sort_unstable_by_key(|&(m, _)| m);
        Ok(out)
    }

    /// Second Chebyshev function `psi(x) = sum_{k <= x} Lambda(k)`.
    pub fn chebyshev_psi(&self, x: f64) -> Result<f64> {
        let n = self.check_real("x", x)?;
        if let Some(prefix) = &self.psi_prefix {
            return Ok(prefix[n as usize]);
        }
        let mut acc = CompensatedSum::new();
        for &p in self.primes_upto(n) {
            let p = u64::from(p);
            let mut powers = 0u32;
            let mut q = p;
            while q <= n {
                powers += 1;
                q *= p;
            }
            acc.add(f64::from(powers) * (p as f64).ln());
        }
        Ok(acc.value())
    }

    /// First Chebyshev function `theta(x) = sum_{p <= x} log p`.
    pub fn chebyshev_theta(&self, x: f64) -> Result<f64> {
        let n = self.check_real("x", x)?;
        Ok(self
            .primes_upto(n)
            .iter()
            .map(|&p| f64::from(p).ln())
            .collect::<CompensatedSum>()
            .value())
    }

    /// `pi(x)`, the number of primes `<= x`.
    pub fn prime_count(&self, x: f64) -> Result<u64> {
        let n = self.check_real("x", x)?;
        Ok(self.primes_upto(n).len() as u64)
    }

    /// Primes `<= n`; `n` must already be range checked.
    pub fn primes_upto(&self, n: u64) -> &[u32] {
        let end = self.primes.partition_point(|&p| u64::from(p) <= n);
        &self.primes[..end]
    }

    fn check_int(&self, what: &'static str, m: u64) -> Result<()> {
        if m == 0 || m > self.limit {
            return Err(Error::Range {
                what,
                value: m as f64,
                limit: self.limit,
            });
        }
        Ok(())
    }

    fn check_real(&self, what: &'static str, x: f64) -> Result<u64> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::Domain(format!("{what} must be a nonnegative real, got {x}")));
        }
        if x > self.limit as f64 {
            return Err(Error::Range {
                what,
                value: x,
                limit: self.limit,
            });
        }
        Ok(x.floor() as u64)
    }
}

fn approx_prime_count(limit: u64) -> usize {
    let x = limit as f64;
    if x < 17.0 {
        8
    } else {
        (1.26 * x / x.ln()) as usize
    }
}

/// Natural logarithm of an arbitrary-size positive integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 960 {
        return x.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).ln() + shift as f64 * LN_2
}

/// Running LCM over arbitrary-precision integers.
#[derive(Debug, Clone)]
pub struct BigLcm {
    value: BigUint,
}

impl Default for BigLcm {
    fn default() -> Self {
        Self { value: BigUint::one() }
    }
}

impl BigLcm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, a: u64) {
        debug_assert!(a >= 1);
        let a = BigUint::from(a);
        let g = self.value.gcd(&a);
        self.value = &self.value / g * a;
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn ln(&self) -> f64 {
        ln_biguint(&self.value)
    }
}

/// `log LCM(elements)` computed exactly in big integers; `0` for the empty set.
pub fn lcm_log_exact(elements: &[u64]) -> f64 {
    let mut lcm = BigLcm::new();
    for &a in elements {
        lcm.push(a);
    }
    lcm.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_factor(m: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut r = m;
        let mut d = 2;
        while d * d <= r {
            let mut e = 0;
            while r % d == 0 {
                r /= d;
                e += 1;
            }
            if e > 0 {
                out.push((d, e));
            }
            d += 1;
        }
        if r > 1 {
            out.push((r, 1));
        }
        out
    }

    #[test]
    fn small_tables() {
        let t = build_sieve(10).unwrap();
        assert_eq!(t.primes(), &[2, 3, 5, 7]);
        let t = build_sieve(2).unwrap();
        assert_eq!(t.primes(), &[2]);
        assert_eq!(t.spf(2), Some(2));
    }

    #[test]
    fn rejects_bad_limits() {
        assert!(matches!(build_sieve(1), Err(Error::Config(_))));
        assert!(matches!(build_sieve(0), Err(Error::Config(_))));
        assert!(matches!(
            SieveTable::build_with_cap(1001, 1000),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn prime_count_one_million() {
        let t = build_sieve(1_000_000).unwrap();
        assert_eq!(t.prime_count(1e6).unwrap(), 78_498);
        assert_eq!(t.prime_count(10.0).unwrap(), 4);
        assert_eq!(t.prime_count(1.9).unwrap(), 0);
    }

    #[test]
    fn spf_invariants() {
        let t = build_sieve(100_000).unwrap();
        for m in 2..=100_000u64 {
            let p = t.spf(m).unwrap();
            assert_eq!(m % p, 0);
            assert!(t.is_prime(p));
            // nothing smaller divides m
            assert_eq!(trial_factor(m)[0].0, p);
        }
        let primes: Vec<u64> = (2..=100_000u64).filter(|&m| t.spf(m) == Some(m)).collect();
        assert_eq!(primes, t.primes().iter().map(|&p| u64::from(p)).collect::<Vec<_>>());
    }

    #[test]
    fn mangoldt_matches_trial_factorization() {
        let t = build_sieve(100_000).unwrap();
        assert_eq!(t.mangoldt(1).unwrap(), 0.0);
        for m in 2..=100_000u64 {
            let f = trial_factor(m);
            let expect = if f.len() == 1 { (f[0].0 as f64).ln() } else { 0.0 };
            assert_eq!(t.mangoldt(m).unwrap(), expect, "m = {m}");
            assert_eq!(t.factorize(m).unwrap(), f);
        }
    }

    #[test]
    fn mangoldt_examples() {
        let t = build_sieve(100).unwrap();
        assert!((t.mangoldt(8).unwrap() - 0.693_147).abs() < 1e-6);
        assert_eq!(t.mangoldt(12).unwrap(), 0.0);
        assert!(matches!(t.mangoldt(101), Err(Error::Range { .. })));
        assert!(matches!(t.mangoldt(0), Err(Error::Range { .. })));
    }

    #[test]
    fn chebyshev_examples() {
        let t = build_sieve(100).unwrap();
        assert!((t.chebyshev_psi(10.0).unwrap() - 2520f64.ln()).abs() < 1e-12);
        assert!((t.chebyshev_psi(10.0).unwrap() - 7.832_014).abs() < 1e-6);
        assert_eq!(t.chebyshev_psi(1.5).unwrap(), 0.0);
        assert_eq!(t.chebyshev_psi(2.0).unwrap(), LN_2);
        assert!((t.chebyshev_theta(10.0).unwrap() - 5.347_108).abs() < 1e-6);
        assert_eq!(t.chebyshev_theta(1.0).unwrap(), 0.0);
        assert!(matches!(t.chebyshev_psi(100.5), Err(Error::Range { .. })));
        assert!(matches!(t.chebyshev_theta(-1.0), Err(Error::Domain(_))));
        assert!(matches!(t.prime_count(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_cache_agrees_with_scan() {
        let plain = build_sieve(20_000).unwrap();
        let cached = plain.clone().with_psi_cache();
        for n in (0..=20_000u64).step_by(37) {
            let a = plain.chebyshev_psi(n as f64).unwrap();
            let b = cached.chebyshev_psi(n as f64).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "n = {n}");
        }
    }

    #[test]
    fn psi_minus_theta_is_nonnegative_and_steps_are_monotone() {
        let t = build_sieve(5_000).unwrap().with_psi_cache();
        let mut last = (0.0, 0.0);
        for n in 1..=5_000u64 {
            let psi = t.chebyshev_psi(n as f64).unwrap();
            let theta = t.chebyshev_theta(n as f64).unwrap();
            assert!(psi >= theta - 1e-9);
            assert!(psi >= last.0 && theta >= last.1);
            last = (psi, theta);
        }
    }

    #[test]
    fn psi_minus_theta_constant_trends_down() {
        let t = build_sieve(1_000_000).unwrap();
        let c: Vec<f64> = [1e3, 1e4, 1e5, 1e6]
            .iter()
            .map(|&n: &f64| {
                let d = t.chebyshev_psi(n).unwrap() - t.chebyshev_theta(n).unwrap();
                d / (n.sqrt() * n.ln().powi(2))
            })
            .collect();
        for w in c.windows(2) {
            assert!(w[1] <= w[0], "{c:?}");
        }
    }

    #[test]
    fn lcm_log_exact_examples() {
        assert!((lcm_log_exact(&[4, 6]) - 12f64.ln()).abs() < 1e-15);
        assert_eq!(lcm_log_exact(&[]), 0.0);
        assert_eq!(lcm_log_exact(&[1]), 0.0);
        let all: Vec<u64> = (1..=10).collect();
        assert!((lcm_log_exact(&all) - 2520f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_of_huge_integers() {
        // 2^5000 * 3
        let x = (BigUint::one() << 5000usize) * 3u32;
        let expect = 5000.0 * LN_2 + 3f64.ln();
        assert!((ln_biguint(&x) - expect).abs() / expect < 1e-15);
    }
}
