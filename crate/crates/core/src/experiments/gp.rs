use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::ExperimentReport;
use crate::analytic::{g_func, CovarianceGrid, GMode, DEFAULT_TOL};
use crate::gausslimit::{GaussianPathBatch, GpMethod};
use crate::stats::{ks_critical_1pct, ks_statistic};
use crate::Result;

/// Empirical covariance of a simulated batch against the analytic kernel,
/// and a KS check of the standardized marginal at the last grid point.
pub fn check_gaussian_batch(batch: &GaussianPathBatch) -> Result<ExperimentReport> {
    let name = match batch.method {
        GpMethod::Series => "gp-series",
        GpMethod::Cholesky => "gp-cholesky",
    };
    #[derive(Serialize)]
    struct Params<'a> {
        method: GpMethod,
        theta: f64,
        grid: &'a [f64],
        replicas: usize,
        i_max: Option<usize>,
        k_max: Option<usize>,
        truncation_bound: f64,
    }
    let prov = &batch.provenance;
    let mut report = ExperimentReport::new(
        name,
        prov.seed,
        Params {
            method: batch.method,
            theta: batch.theta.theta(),
            grid: &batch.grid,
            replicas: prov.replicas,
            i_max: prov.i_max,
            k_max: prov.k_max,
            truncation_bound: prov.truncation_bound,
        },
    );
    let grid = &batch.grid;
    let analytic = CovarianceGrid::build(batch.theta, grid, DEFAULT_TOL)?;
    if prov.replicas >= 2 {
        let est = batch.empirical_covariance()?;
        for a in 0..grid.len() {
            for b in a..grid.len() {
                let (emp, ana, se) = (est.matrix[(a, b)], analytic.matrix[(a, b)], est.se[(a, b)]);
                report.stat_se(format!("covariance[{},{}]", grid[a], grid[b]), emp, se);
                report.stat(format!("limit_covariance[{},{}]", grid[a], grid[b]), ana);
                report.at_most(
                    format!(
                        "cov({}, {}) within 3 SE + truncation bound of the limit kernel",
                        grid[a], grid[b]
                    ),
                    (emp - ana).abs(),
                    3.0 * se + prov.truncation_bound,
                );
            }
        }
    }
    let last = grid.len() - 1;
    let t = grid[last];
    if t > 0.0 && prov.replicas >= 2 {
        let sd = (g_func(batch.theta.q(), GMode::Closed)? * t).sqrt();
        let z: Vec<f64> = batch.column(last).iter().map(|v| v / sd).collect();
        let ks = ks_statistic(&z, |x| Normal::standard().cdf(x))?;
        report.stat("ks_statistic", ks);
        report.below(
            format!("KS of G({t}) / sqrt(g t) against N(0, 1) below the 1% critical value"),
            ks,
            ks_critical_1pct(prov.replicas),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::ThetaParams;
    use crate::gausslimit::{simulate_series, SeriesConfig, DEFAULT_SERIES_TAIL};

    #[test]
    fn series_marginal_is_gaussian() {
        let theta = ThetaParams::new(0.5).unwrap();
        let c = SeriesConfig::with_tail(theta, &[0.5, 1.0], 4, DEFAULT_SERIES_TAIL).unwrap();
        let r = check_gaussian_batch(&simulate_series(&c, 10_000).unwrap()).unwrap();
        assert_eq!(r.name, "gp-series");
        assert!(r.pass, "{}", r.to_json());
    }
}
