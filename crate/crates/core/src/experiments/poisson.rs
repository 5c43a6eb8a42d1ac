use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{poisson_half_integer_distance, require_replicas, require_table, ExperimentReport};
use crate::numtheory::SieveTable;
use crate::rng::Stream;
use crate::sampler::{retention_threshold, LcmAccumulator};
use crate::stats::moments;
use crate::sum::CompensatedSum;
use crate::{Error, Result};

pub const SPARSE_CDF_TOL: f64 = 0.05;
pub const DENSE_CDF_TOL: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonRegime {
    /// `theta = lambda / n`.
    Sparse,
    /// `theta = 1 - lambda log n / n`.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRegimeParams {
    pub lambda: f64,
    pub n: u64,
    pub regime: PoissonRegime,
    /// Scales `lambda` inside `theta` only, for sensitivity runs; the
    /// reference Poisson law keeps `lambda`.
    pub multiplier: f64,
}

impl PoissonRegimeParams {
    pub fn new(lambda: f64, n: u64, regime: PoissonRegime) -> Self {
        Self {
            lambda,
            n,
            regime,
            multiplier: 1.0,
        }
    }

    pub fn theta(&self) -> Result<f64> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::Domain(format!(
                "multiplier must be positive, got {}",
                self.multiplier
            )));
        }
        let (lam, nf) = (self.lambda * self.multiplier, self.n as f64);
        let theta = match self.regime {
            PoissonRegime::Sparse => lam / nf,
            PoissonRegime::Dense => 1.0 - lam * nf.ln() / nf,
        };
        if theta > 0.0 && theta < 1.0 {
            Ok(theta)
        } else {
            Err(Error::Domain(format!(
                "{:?} regime with lambda = {lam}, n = {} gives theta = {theta} outside (0, 1)",
                self.regime, self.n
            )))
        }
    }

    /// Mean of the limiting Poisson law.
    pub fn limit_mean(&self) -> f64 {
        match self.regime {
            PoissonRegime::Sparse => self.lambda,
            PoissonRegime::Dense => self.lambda / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseDeficit {
    /// `psi(n) - log L_n = sum of Lambda(m) over m with no multiple retained`.
    pub deficit: f64,
    /// Some `k <= n/2` has no retained multiple.
    pub deficient_below_half: bool,
}

fn all_multiples_removed(m: u64, n: u64, removed: &[u64]) -> bool {
    let count = n / m;
    count as usize <= removed.len()
        && (1..=count).all(|j| removed.binary_search(&(j * m)).is_ok())
}

/// `psi(n) - log L_n` from the sorted complement `removed` of `A_n`: only
/// prime powers dividing a removed element can lose all their multiples.
pub fn dense_deficit(n: u64, removed: &[u64], table: &SieveTable) -> Result<DenseDeficit> {
    require_table("n", n, table)?;
    if removed.windows(2).any(|w| w[1] <= w[0]) || removed.first() == Some(&0) {
        return Err(Error::Domain("removed set must be strictly increasing and positive".into()));
    }
    if removed.last().is_some_and(|&a| a > n) {
        return Err(Error::Domain(format!("removed element above n = {n}")));
    }
    let mut candidates = Vec::new();
    for &a in removed {
        for (p, e) in table.factorize(a)? {
            let mut m = 1;
            for _ in 0..e {
                m *= p;
                candidates.push((m, p));
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    let mut deficit = CompensatedSum::new();
    for &(m, p) in &candidates {
        if all_multiples_removed(m, n, removed) {
            deficit.add((p as f64).ln());
        }
    }
    let deficient_below_half = removed
        .iter()
        .take_while(|&&k| 2 * k <= n)
        .any(|&k| all_multiples_removed(k, n, removed));
    Ok(DenseDeficit {
        deficit: deficit.value(),
        deficient_below_half,
    })
}

fn check_regime(params: &PoissonRegimeParams, want: PoissonRegime) -> Result<()> {
    if params.regime != want {
        return Err(Error::Config(format!(
            "expected the {want:?} regime, got {:?}",
            params.regime
        )));
    }
    Ok(())
}

/// `m` replicas of `log L_n / log n` with `theta = lambda / n`, against `Poisson(lambda)`.
pub fn run_poisson_sparse(
    params: &PoissonRegimeParams,
    replicas: usize,
    seed: u64,
    table: &SieveTable,
) -> Result<ExperimentReport> {
    check_regime(params, PoissonRegime::Sparse)?;
    let n = params.n;
    if n < 10_000 {
        return Err(Error::Config(format!("sparse regime needs n >= 10^4, got {n}")));
    }
    require_table("n", n, table)?;
    require_replicas(replicas, 2)?;
    let theta = params.theta()?;
    let thr = retention_threshold(theta)?;
    let log_n = (n as f64).ln();
    LcmAccumulator::new(table, n)?;
    let samples: Vec<(f64, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map_init(
            || LcmAccumulator::new(table, n).expect("checked above"),
            |acc, r| {
                let stream = Stream::new(seed, r);
                acc.reset();
                let mut empty = true;
                for k in 1..=n {
                    if thr.accepts(stream.word_at(k)) {
                        acc.push(k);
                        empty = false;
                    }
                }
                (acc.value() / log_n, empty)
            },
        )
        .collect();
    let stats: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let empty = samples.iter().filter(|s| s.1).count() as f64 / replicas as f64;
    let dist = poisson_half_integer_distance(&stats, params.lambda)?;
    let mo = moments(&stats)?;
    let p0 = (-params.lambda).exp();
    let p0_se = (p0 * (1.0 - p0) / replicas as f64).sqrt();

    #[derive(Serialize)]
    struct Params<'a> {
        #[serde(flatten)]
        regime: &'a PoissonRegimeParams,
        theta: f64,
        replicas: usize,
        seed: u64,
    }
    let mut report = ExperimentReport::new(
        "poisson-sparse",
        seed,
        Params { regime: params, theta, replicas, seed },
    );
    report
        .stat_se("statistic_mean", mo.mean, mo.mean_se)
        .stat("sup_half_integer_cdf_distance", dist)
        .stat_se("empty_set_frequency", empty, p0_se)
        .stat("poisson_zero_probability", p0)
        .below(
            format!("sup half-integer CDF distance to Poisson(lambda) < {SPARSE_CDF_TOL}"),
            dist,
            SPARSE_CDF_TOL,
        )
        .at_most(
            "empty-set frequency within 3 SE of exp(-lambda)",
            (empty - p0).abs(),
            3.0 * p0_se,
        );
    Ok(report)
}

/// `m` replicas of `(psi(n) - log L_n) / log n` with
/// `theta = 1 - lambda log n / n`, against `Poisson(lambda / 2)`.
pub fn run_poisson_dense(
    params: &PoissonRegimeParams,
    replicas: usize,
    seed: u64,
    table: &SieveTable,
) -> Result<ExperimentReport> {
    check_regime(params, PoissonRegime::Dense)?;
    let n = params.n;
    require_table("n", n, table)?;
    require_replicas(replicas, 2)?;
    let theta = params.theta()?;
    let thr = retention_threshold(theta)?;
    let log_n = (n as f64).ln();
    let samples: Vec<DenseDeficit> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let stream = Stream::new(seed, r);
            let removed: Vec<u64> = (1..=n).filter(|&k| !thr.accepts(stream.word_at(k))).collect();
            dense_deficit(n, &removed, table)
        })
        .collect::<Result<_>>()?;
    let stats: Vec<f64> = samples.iter().map(|d| d.deficit / log_n).collect();
    let deficient = samples.iter().filter(|d| d.deficient_below_half).count() as f64
        / replicas as f64;
    let lam = params.lambda * params.multiplier;
    let union_bound = lam * lam * log_n * log_n / (2.0 * n as f64);
    let dist = poisson_half_integer_distance(&stats, params.limit_mean())?;
    let mo = moments(&stats)?;

    #[derive(Serialize)]
    struct Params<'a> {
        #[serde(flatten)]
        regime: &'a PoissonRegimeParams,
        theta: f64,
        replicas: usize,
        seed: u64,
    }
    let mut report = ExperimentReport::new(
        "poisson-dense",
        seed,
        Params { regime: params, theta, replicas, seed },
    );
    report
        .stat("psi_n", table.chebyshev_psi(n as f64)?)
        .stat_se("statistic_mean", mo.mean, mo.mean_se)
        .stat("sup_half_integer_cdf_distance", dist)
        .stat("deficient_below_half_frequency", deficient)
        .stat("union_bound", union_bound)
        .below(
            format!("sup half-integer CDF distance to Poisson(lambda/2) < {DENSE_CDF_TOL}"),
            dist,
            DENSE_CDF_TOL,
        )
        .at_most(
            "frequency of a k <= n/2 without retained multiples <= 10 x union bound",
            deficient,
            10.0 * union_bound,
        );
    Ok(report)
}
