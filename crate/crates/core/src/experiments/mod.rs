//! Monte Carlo harnesses and numeric lemma checks.
//!
//! Every runner is a pure function of its parameters, seed and sieve table.
//! Replica `r` draws from [`Stream::new(seed, r)`](crate::rng::Stream::new),
//! replicas run in parallel but are collected in index order, and all
//! aggregation is sequential and compensated, so reports are identical
//! bit for bit across runs and thread counts.

mod clt;
mod gcd;
mod gp;
mod lemmas;
mod poisson;
mod report;
mod slln;

pub use clt::{run_clt, run_fclt, CltParams, FcltParams};
pub use gcd::{run_gcd_limit, sample_xi, GcdParams};
pub use gp::check_gaussian_batch;
pub use lemmas::{
    prime_tail_scaled, variance_sum_ratio, covariance_sum_ratio, weighted_psi_error, run_lemma_checks, LEMMA_TABLE_LIMIT,
};
pub use poisson::{
    dense_deficit, run_poisson_dense, run_poisson_sparse, DenseDeficit, PoissonRegime,
    PoissonRegimeParams,
};
pub use report::{Criterion, ExperimentReport, Statistic};
pub use slln::{run_slln, SllnParams};

pub use crate::stats::{ks_critical_1pct, ks_statistic, ks_two_sample};

use crate::numtheory::SieveTable;
use crate::{Error, Result};

fn require_table(what: &'static str, n: u64, table: &SieveTable) -> Result<()> {
    if n > table.limit() {
        Err(Error::Range {
            what,
            value: n as f64,
            limit: table.limit(),
        })
    } else {
        Ok(())
    }
}

fn require_replicas(m: usize, min: usize) -> Result<()> {
    if m < min {
        Err(Error::Config(format!("need at least {min} replicas, got {m}")))
    } else {
        Ok(())
    }
}

/// `sup_x |F_m(x) - Poisson(lambda) CDF(floor x)|` over `x = 0.5, 1.5, ..., 10.5`.
fn poisson_half_integer_distance(samples: &[f64], lambda: f64) -> Result<f64> {
    use statrs::distribution::{DiscreteCDF, Poisson};
    let pois = Poisson::new(lambda).map_err(|e| Error::Domain(e.to_string()))?;
    let points: Vec<f64> = (0..=10).map(|k| f64::from(k) + 0.5).collect();
    let ecdf = crate::stats::empirical_cdf_at(samples, &points);
    Ok(points
        .iter()
        .zip(&ecdf)
        .map(|(x, f)| (f - pois.cdf(x.floor() as u64)).abs())
        .fold(0.0, f64::max))
}
