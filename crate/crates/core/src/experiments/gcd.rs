use num_integer::Integer;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_replicas, require_table, ExperimentReport};
use crate::analytic::gcd_limit_mean;
use crate::numtheory::SieveTable;
use crate::rng::{Stream, DEFAULT_SEED};
use crate::stats::{ks_two_sample, moments};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

pub const GCD_KS_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcdParams {
    pub n: u64,
    pub replicas: usize,
    pub seed: u64,
    /// Primes `<= cutoff` enter the limit mean and the sampled `xi`.
    pub cutoff: u64,
}

impl Default for GcdParams {
    fn default() -> Self {
        Self {
            n: 1_000_000,
            replicas: 1_000_000,
            seed: DEFAULT_SEED,
            cutoff: 1_000_000,
        }
    }
}

/// Sampler for `xi = sum_p W_p log p`, where `W_p = min(Z_1p, Z_2p)` has
/// `P(W_p >= i) = p^(-2i)`.
///
/// Primes are grouped into blocks `[2^b, 2^(b+1))`. Within a block the
/// candidates for `W_p >= 1` are generated by geometric skips at the block's
/// largest rate `r = p_first^-2` and thinned to `p^-2`, which is exact and
/// touches only a handful of primes per draw.
#[derive(Debug, Clone)]
pub struct XiSampler {
    primes: Vec<f64>,
    blocks: Vec<(usize, usize, f64)>,
}

impl XiSampler {
    pub fn new(table: &SieveTable, cutoff: u64) -> Self {
        let primes: Vec<f64> = table.primes_upto(cutoff).iter().map(|&p| f64::from(p)).collect();
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < primes.len() {
            let top = 2.0 * primes[start].log2().floor().exp2();
            let end = start + primes[start..].partition_point(|&p| p < top);
            blocks.push((start, end, primes[start].powi(-2)));
            start = end;
        }
        Self { primes, blocks }
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(start, end, r) in &self.blocks {
            let log_miss = (-r).ln_1p();
            let mut i = start;
            loop {
                let skip = rng.next_open_uniform().ln() / log_miss;
                if skip >= (end - i) as f64 {
                    break;
                }
                i += skip as usize;
                let p = self.primes[i];
                let rate = p.powi(-2);
                if rng.random::<f64>() * r < rate {
                    let extra = (rng.next_open_uniform().ln() / rate.ln()).floor();
                    acc.add((1.0 + extra) * p.ln());
                }
                i += 1;
                if i >= end {
                    break;
                }
            }
        }
        acc.value()
    }
}

/// `m` draws of `xi` over primes `<= cutoff`; draw `r` uses substream 1 of
/// `(seed, r)`.
pub fn sample_xi(table: &SieveTable, cutoff: u64, m: usize, seed: u64) -> Result<Vec<f64>> {
    require_table("cutoff", cutoff, table)?;
    let sampler = XiSampler::new(table, cutoff);
    Ok((0..m as u64)
        .into_par_iter()
        .map(|r| sampler.sample(&mut Stream::new(seed, r).substream(1)))
        .collect())
}

/// `E log GCD(U_1, U_2)` for independent uniforms on `[n]`:
/// `sum_{m <= n} Lambda(m) (floor(n/m) / n)^2`.
fn finite_n_mean(n: u64, table: &SieveTable) -> Result<f64> {
    let nf = n as f64;
    Ok(table
        .prime_powers_upto(n)?
        .into_iter()
        .map(|(m, lp)| lp * ((n / m) as f64 / nf).powi(2))
        .collect::<CompensatedSum>()
        .value())
}

/// `log GCD(U_1, U_2)` for `m` independent uniform pairs on `[n]`, against the
/// limit mean and a sample of the limit `xi`.
pub fn run_gcd_limit(params: &GcdParams, table: &SieveTable) -> Result<ExperimentReport> {
    let GcdParams { n, replicas, seed, cutoff } = *params;
    require_table("n", n, table)?;
    require_table("cutoff", cutoff, table)?;
    require_replicas(replicas, 2)?;
    if n < 2 {
        return Err(Error::Domain("GCD experiment needs n >= 2".into()));
    }
    let pairs: Vec<(f64, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = Stream::new(seed, r);
            let a = rng.random_range(1..=n);
            let b = rng.random_range(1..=n);
            ((a.gcd(&b) as f64).ln(), a == b)
        })
        .collect();
    let logs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let equal = pairs.iter().filter(|p| p.1).count() as f64 / replicas as f64;
    let xi = sample_xi(table, cutoff, replicas, seed)?;
    let limit = gcd_limit_mean(table, cutoff)?;
    let finite = finite_n_mean(n, table)?;
    let mo = moments(&logs)?;
    let xo = moments(&xi)?;
    let ks = ks_two_sample(&logs, &xi)?;

    let mut report = ExperimentReport::new("gcd-limit", seed, params);
    report
        .stat_se("mean_log_gcd", mo.mean, mo.mean_se)
        .stat_se("mean_xi_sample", xo.mean, xo.mean_se)
        .stat("limit_mean", limit.value)
        .stat("limit_tail_bound", limit.tail_bound)
        .stat("finite_n_mean", finite)
        .stat("finite_n_defect", limit.value - finite)
        .stat("equal_pair_frequency", equal)
        .stat("ks_two_sample", ks)
        .at_most(
            "mean log GCD within 3 SE + tail bound of the limit mean",
            (mo.mean - limit.value).abs(),
            3.0 * mo.mean_se + limit.tail_bound,
        )
        .below(
            format!("two-sample KS between log GCD and sampled xi < {GCD_KS_TOL}"),
            ks,
            GCD_KS_TOL,
        );
    Ok(report)
}
