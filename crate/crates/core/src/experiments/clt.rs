use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{require_replicas, require_table, ExperimentReport};
use crate::analytic::{g_func, mean_log_lcm, CovarianceGrid, GMode, ThetaParams, DEFAULT_TOL};
use crate::numtheory::SieveTable;
use crate::rng::{Stream, DEFAULT_SEED};
use crate::sampler::{grid_counts, path_at_counts, retention_threshold, LcmAccumulator};
use crate::stats::{empirical_covariance, ks_critical_1pct, ks_statistic, moments};
use crate::{Error, Result};

pub const MAX_FCLT_GRID: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltParams {
    pub n: u64,
    pub theta: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Allowed relative error of the sample variance.
    pub variance_tol: f64,
}

impl Default for CltParams {
    fn default() -> Self {
        Self {
            n: 100_000,
            theta: 0.5,
            replicas: 2000,
            seed: DEFAULT_SEED,
            variance_tol: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcltParams {
    pub n: u64,
    pub theta: f64,
    pub grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// Allowed relative error of each covariance entry (or 3 SE if larger).
    pub covariance_tol: f64,
}

impl Default for FcltParams {
    fn default() -> Self {
        Self {
            n: 1_000_000,
            theta: 0.5,
            grid: vec![0.25, 0.5, 0.75, 1.0],
            replicas: 2000,
            seed: DEFAULT_SEED,
            covariance_tol: 0.15,
        }
    }
}

/// Runs `replicas` paths recorded at `counts`, in replica order.
pub(crate) fn simulate_paths(
    n: u64,
    theta: f64,
    counts: &[u64],
    replicas: usize,
    seed: u64,
    table: &SieveTable,
) -> Result<Vec<Vec<f64>>> {
    retention_threshold(theta)?;
    LcmAccumulator::new(table, n)?;
    (0..replicas as u64)
        .into_par_iter()
        .map_init(
            || LcmAccumulator::new(table, n).expect("checked above"),
            |acc, r| path_at_counts(n, theta, counts, &Stream::new(seed, r), acc),
        )
        .collect()
}

fn scale(n: u64) -> f64 {
    let nf = n as f64;
    (nf * nf.ln()).sqrt()
}

/// `m` values of `(log L_n - E log L_n) / sqrt(n log n)` against `N(0, g(1 - theta))`.
pub fn run_clt(params: &CltParams, table: &SieveTable) -> Result<ExperimentReport> {
    let &CltParams { n, theta, replicas, seed, variance_tol } = params;
    require_replicas(replicas, 100)?;
    require_table("n", n, table)?;
    if n < 2 {
        return Err(Error::Domain("CLT needs n >= 2".into()));
    }
    retention_threshold(theta)?;
    let raw: Vec<f64> = simulate_paths(n, theta, &[n], replicas, seed, table)?
        .into_iter()
        .map(|p| p[0])
        .collect();
    let (mean, g) = if theta == 1.0 {
        // log L_n is the deterministic log LCM(1..n)
        let full = simulate_paths(n, 1.0, &[n], 1, seed, table)?[0][0];
        (full, 0.0)
    } else {
        let th = ThetaParams::new(theta)?;
        (mean_log_lcm(n, th, table)?, g_func(1.0 - theta, GMode::Closed)?)
    };
    let z: Vec<f64> = raw.iter().map(|v| (v - mean) / scale(n)).collect();
    let mo = moments(&z)?;

    let mut report = ExperimentReport::new("clt", seed, params);
    report
        .stat("exact_mean_log_lcm", mean)
        .stat("g_limit_variance", g)
        .stat_se("standardized_mean", mo.mean, mo.mean_se)
        .stat_se("standardized_variance", mo.variance, mo.variance_se);
    if theta == 1.0 {
        let max_abs = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        report.at_most("degenerate case: every standardized value is zero", max_abs, 0.0);
    } else {
        let rel = (mo.variance / g - 1.0).abs();
        report.stat("variance_relative_error", rel);
        report.at_most(
            format!("sample variance within {variance_tol} relative of g(1 - theta)"),
            rel,
            variance_tol,
        );
        let normal = Normal::new(0.0, g.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
        let ks = ks_statistic(&z, |x| normal.cdf(x))?;
        report.stat("ks_statistic", ks);
        report.below(
            "KS distance to N(0, g(1 - theta)) below the 1% critical value",
            ks,
            ks_critical_1pct(replicas),
        );
    }
    Ok(report)
}

/// Standardized paths on a grid; empirical covariance against the limit kernel.
pub fn run_fclt(params: &FcltParams, table: &SieveTable) -> Result<ExperimentReport> {
    let FcltParams { n, theta, ref grid, replicas, seed, covariance_tol } = *params;
    require_replicas(replicas, 100)?;
    require_table("n", n, table)?;
    if grid.len() > MAX_FCLT_GRID {
        return Err(Error::Config(format!(
            "FCLT grid has {} points (at most {MAX_FCLT_GRID})",
            grid.len()
        )));
    }
    if n < 2 {
        return Err(Error::Domain("FCLT needs n >= 2".into()));
    }
    let th = ThetaParams::new(theta)?;
    let analytic = CovarianceGrid::build(th, grid, DEFAULT_TOL)?;
    let counts = grid_counts(n, grid);
    let means = counts
        .iter()
        .map(|&c| mean_log_lcm(c, th, table))
        .collect::<Result<Vec<_>>>()?;
    let s = scale(n);
    let paths: Vec<Vec<f64>> = simulate_paths(n, theta, &counts, replicas, seed, table)?
        .into_iter()
        .map(|p| p.iter().zip(&means).map(|(v, mu)| (v - mu) / s).collect())
        .collect();
    let est = empirical_covariance(&paths)?;
    let g = g_func(1.0 - theta, GMode::Closed)?;

    let mut report = ExperimentReport::new("fclt", seed, params);
    report.stat("g_limit_variance", g);
    for (j, &t) in grid.iter().enumerate() {
        report.stat_se(format!("variance[t={t}]"), est.matrix[(j, j)], est.se[(j, j)]);
        report.stat(format!("linear_law_g_t[t={t}]"), g * t);
    }
    for a in 0..grid.len() {
        for b in a..grid.len() {
            let (emp, ana, se) = (est.matrix[(a, b)], analytic.matrix[(a, b)], est.se[(a, b)]);
            report.stat_se(format!("covariance[{},{}]", grid[a], grid[b]), emp, se);
            report.stat(format!("limit_covariance[{},{}]", grid[a], grid[b]), ana);
            report.at_most(
                format!(
                    "cov({}, {}) within max({covariance_tol} relative, 3 SE) of the limit kernel",
                    grid[a], grid[b]
                ),
                (emp - ana).abs(),
                (covariance_tol * ana.abs()).max(3.0 * se),
            );
        }
    }
    let min_eig = est.matrix.clone().symmetric_eigen().eigenvalues.min();
    let max_se = est.se.max();
    report.stat("min_eigenvalue", min_eig);
    report.criterion(
        "empirical covariance PSD up to noise (min eigenvalue > -3 max SE)",
        min_eig,
        -3.0 * max_se,
        min_eig > -3.0 * max_se,
    );
    Ok(report)
}
