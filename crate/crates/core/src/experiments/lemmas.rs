use serde::Serialize;

use super::{require_table, ExperimentReport};
use crate::analytic::{covariance_overlap_series, h_func, ThetaParams, DEFAULT_TOL};
use crate::numtheory::SieveTable;
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Smallest sieve accepted by [`run_lemma_checks`].
pub const LEMMA_TABLE_LIMIT: u64 = 1_000_000;

/// Bound on the scaled prime tail.
pub const PRIME_TAIL_BOUND: f64 = 3.0;
/// Allowed relative distance from 1 of the variance and covariance sum ratios at `n = 10^6`.
pub const RATIO_TOL: f64 = 0.15;

// psi(x) <= 1.03883 x for all x > 0
const PSI_RATIO_BOUND: f64 = 1.03883;

/// `n^(k-1) sum_{p >= n} log p / p^k`: primes up to the table limit summed
/// exactly, the rest bounded by partial summation against `theta(x) <= 1.03883 x`.
pub fn prime_tail_scaled(table: &SieveTable, k: i32, n: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("prime tail needs k >= 2, got {k}")));
    }
    require_table("n", n, table)?;
    let limit = table.limit() as f64;
    let lo = table.primes().partition_point(|&p| u64::from(p) < n);
    let head = table.primes()[lo..]
        .iter()
        .map(|&p| {
            let p = f64::from(p);
            p.ln() / p.powi(k)
        })
        .collect::<CompensatedSum>()
        .value();
    let kf = f64::from(k);
    let tail = PSI_RATIO_BOUND * kf / ((kf - 1.0) * limit.powi(k - 1));
    Ok((n as f64).powi(k - 1) * (head + tail))
}

/// `sum_{p in (sqrt n, nt]} log^2 p (1-x)^floor(nt/p) / (t n log n h(1-x))`.
pub fn variance_sum_ratio(table: &SieveTable, n: u64, t: f64, x: f64) -> Result<f64> {
    let nt = (n as f64 * t).floor() as u64;
    require_table("n t", nt, table)?;
    let q = 1.0 - x;
    let root = (n as f64).sqrt();
    let sum = table
        .primes_upto(nt)
        .iter()
        .filter(|&&p| f64::from(p) > root)
        .map(|&p| {
            let lp = f64::from(p).ln();
            lp * lp * q.powi((nt / u64::from(p)) as i32)
        })
        .collect::<CompensatedSum>()
        .value();
    let nf = n as f64;
    Ok(sum / (t * nf * nf.ln() * h_func(q)?))
}

/// Normalized finite-`n` prime covariance sum
/// `sum_{p in (sqrt n, ns]} log^2 p (1-x)^floor(nt/p) (1 - (1-x)^floor(ns/p)) / (n log n)`
/// divided by its double-series limit, for `0 < s <= t <= 1`.
pub fn covariance_sum_ratio(table: &SieveTable, n: u64, t: f64, s: f64, x: f64) -> Result<f64> {
    let nf = n as f64;
    let (nt, ns) = ((nf * t).floor() as u64, (nf * s).floor() as u64);
    require_table("n t", nt, table)?;
    let q = 1.0 - x;
    let root = nf.sqrt();
    let sum = table
        .primes_upto(ns)
        .iter()
        .filter(|&&p| f64::from(p) > root)
        .map(|&p| {
            let pu = u64::from(p);
            let lp = f64::from(p).ln();
            lp * lp * q.powi((nt / pu) as i32) * (1.0 - q.powi((ns / pu) as i32))
        })
        .collect::<CompensatedSum>()
        .value();
    let limit = covariance_overlap_series(t, s, ThetaParams::new(x)?, DEFAULT_TOL)?;
    Ok(sum / (nf * nf.ln()) / limit)
}

/// `|sum_{p <= t} (1-x)^floor(t/p) log p - t h(1-x)| log(t+2) / t` at integer `t`.
pub fn weighted_psi_error(table: &SieveTable, t: u64, x: f64) -> Result<f64> {
    require_table("t", t, table)?;
    let q = 1.0 - x;
    let sum = table
        .primes_upto(t)
        .iter()
        .map(|&p| q.powi((t / u64::from(p)) as i32) * f64::from(p).ln())
        .collect::<CompensatedSum>()
        .value();
    let tf = t as f64;
    Ok((sum - tf * h_func(q)?).abs() * (tf + 2.0).ln() / tf)
}

fn shrinks_toward_one(ratios: &[f64]) -> bool {
    ratios
        .windows(2)
        .all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs())
}

/// Deterministic numeric checks of the four prime sum estimates.
pub fn run_lemma_checks(table: &SieveTable, seed: u64) -> Result<ExperimentReport> {
    if table.limit() < LEMMA_TABLE_LIMIT {
        return Err(Error::Range {
            what: "sieve limit for lemma checks",
            value: table.limit() as f64,
            limit: LEMMA_TABLE_LIMIT,
        });
    }
    #[derive(Serialize)]
    struct Params {
        x: f64,
        a1_n: [u64; 4],
        a2_n: [u64; 3],
        a4_t: [u64; 5],
        table_limit: u64,
    }
    let x = 0.5;
    let a1_n = [100, 1_000, 10_000, 100_000];
    let a2_n = [10_000, 100_000, 1_000_000];
    let a4_t = [100, 1_000, 10_000, 100_000, 1_000_000];
    let mut report = ExperimentReport::new(
        "lemmas",
        seed,
        Params { x, a1_n, a2_n, a4_t, table_limit: table.limit() },
    );

    for k in [2, 3] {
        let mut sup = 0.0f64;
        for n in a1_n {
            let v = prime_tail_scaled(table, k, n)?;
            report.stat(format!("prime_tail[k={k},n={n}]"), v);
            sup = sup.max(v);
        }
        report.below(format!("prime tail k = {k}: sup over n is bounded (< {PRIME_TAIL_BOUND})"), sup, PRIME_TAIL_BOUND);
    }

    for t in [0.5, 1.0] {
        let ratios = a2_n
            .iter()
            .map(|&n| variance_sum_ratio(table, n, t, x))
            .collect::<Result<Vec<_>>>()?;
        for (n, r) in a2_n.iter().zip(&ratios) {
            report.stat(format!("variance_sum_ratio[t={t},n={n}]"), *r);
        }
        let last = *ratios.last().unwrap();
        report.at_most(
            format!("variance sum t = {t}: ratio within {RATIO_TOL} of 1 at n = 10^6"),
            (last - 1.0).abs(),
            RATIO_TOL,
        );
        report.criterion(
            format!("variance sum t = {t}: ratio moves monotonically toward 1"),
            (last - 1.0).abs(),
            (ratios[0] - 1.0).abs(),
            shrinks_toward_one(&ratios),
        );
    }

    let (t, s) = (1.0, 0.5);
    let ratios = a2_n
        .iter()
        .map(|&n| covariance_sum_ratio(table, n, t, s, x))
        .collect::<Result<Vec<_>>>()?;
    for (n, r) in a2_n.iter().zip(&ratios) {
        report.stat(format!("covariance_sum_ratio[t={t},s={s},n={n}]"), *r);
    }
    let last = *ratios.last().unwrap();
    report.at_most(
        format!("covariance sum (t, s) = ({t}, {s}): ratio within {RATIO_TOL} of 1 at n = 10^6"),
        (last - 1.0).abs(),
        RATIO_TOL,
    );
    report.criterion(
        format!("covariance sum (t, s) = ({t}, {s}): ratio moves monotonically toward 1"),
        (last - 1.0).abs(),
        (ratios[0] - 1.0).abs(),
        shrinks_toward_one(&ratios),
    );

    let values = a4_t
        .iter()
        .map(|&t| weighted_psi_error(table, t, x))
        .collect::<Result<Vec<_>>>()?;
    for (t, v) in a4_t.iter().zip(&values) {
        report.stat(format!("weighted_psi_error[t={t}]"), *v);
    }
    let fitted = values.iter().copied().fold(0.0, f64::max);
    report.stat("A4_fitted_constant", fitted);
    report.criterion(
        "weighted psi error: all values finite",
        fitted,
        f64::INFINITY,
        values.iter().all(|v| v.is_finite()),
    );
    report.at_most(
        "weighted psi error: no growth in t (value at largest t <= value at smallest t)",
        *values.last().unwrap(),
        values[0],
    );
    let degenerate = weighted_psi_error(table, 1_000_000, 1.0)?;
    report.at_most("weighted psi error at x = 1: every term vanishes", degenerate, 0.0);
    Ok(report)
}
