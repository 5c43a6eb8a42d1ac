//! Sample moments, covariance estimates with standard errors, and
//! Kolmogorov–Smirnov distances. All sums are compensated and run in index
//! order, so results depend only on the sample values and their order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    /// Standard error of `variance`, from the fourth central moment.
    pub variance_se: f64,
}

pub fn moments(xs: &[f64]) -> Result<Moments> {
    let m = xs.len();
    if m < 2 {
        return Err(Error::Domain(format!("need at least two samples, got {m}")));
    }
    let mf = m as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / mf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value();
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).collect::<CompensatedSum>().value() / mf;
    let variance = m2 / (mf - 1.0);
    let biased = m2 / mf;
    Ok(Moments {
        count: m,
        mean,
        variance,
        mean_se: (variance / mf).sqrt(),
        variance_se: ((m4 - biased * biased).max(0.0) / mf).sqrt(),
    })
}

/// Sample covariance matrix of `rows` (one row per replica) and the
/// standard error of every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub se: DMatrix<f64>,
}

pub fn empirical_covariance(rows: &[Vec<f64>]) -> Result<CovarianceEstimate> {
    let m = rows.len();
    if m < 2 {
        return Err(Error::Domain(format!("need at least two replicas, got {m}")));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Domain("replicas have different lengths".into()));
    }
    let mf = m as f64;
    let means: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).collect::<CompensatedSum>().value() / mf)
        .collect();
    let mut matrix = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let prods: Vec<f64> = rows
                .iter()
                .map(|r| (r[a] - means[a]) * (r[b] - means[b]))
                .collect();
            let sum = prods.iter().copied().collect::<CompensatedSum>().value();
            let c = sum / (mf - 1.0);
            let mean_prod = sum / mf;
            let spread = prods
                .iter()
                .map(|y| (y - mean_prod).powi(2))
                .collect::<CompensatedSum>()
                .value();
            let e = (spread / (mf - 1.0) / mf).sqrt();
            matrix[(a, b)] = c;
            matrix[(b, a)] = c;
            se[(a, b)] = e;
            se[(b, a)] = e;
        }
    }
    Ok(CovarianceEstimate { matrix, se })
}

/// `sup_x |F_m(x) - cdf(x)|` for the empirical CDF `F_m` of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("KS statistic of an empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// `sup_x |F(x) - G(x)|` for two empirical CDFs; tied values are stepped
/// over together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("KS statistic of an empty sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (ma, mb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / ma - j as f64 / mb).abs());
    }
    Ok(d)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

/// Empirical CDF of `samples` evaluated at each of `points`.
pub fn empirical_cdf_at(samples: &[f64], points: &[f64]) -> Vec<f64> {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    points
        .iter()
        .map(|&x| xs.partition_point(|&v| v <= x) as f64 / m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn ks_single_point_at_median() {
        let n = Normal::standard();
        assert!((ks_statistic(&[0.0], |x| n.cdf(x)).unwrap() - 0.5).abs() < 1e-15);
        assert!(ks_statistic(&[], |x| x).is_err());
    }

    #[test]
    fn ks_of_true_distribution_is_small() {
        let n = Normal::standard();
        let mut rng = Stream::new(99, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_statistic(&xs, |x| n.cdf(x)).unwrap() < ks_critical_1pct(10_000));
    }

    #[test]
    fn ks_against_own_empirical_cdf() {
        let xs = [0.3, -1.0, 2.5, 0.4, 7.0];
        let pts = xs.to_vec();
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ecdf = |x: f64| sorted.partition_point(|&v| v <= x) as f64 / 5.0;
        assert!(ks_statistic(&pts, ecdf).unwrap() <= 1.0 / 5.0 + 1e-15);
        assert_eq!(ks_two_sample(&xs, &xs).unwrap(), 0.0);
    }

    #[test]
    fn two_sample_ties() {
        assert_eq!(ks_two_sample(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0]).unwrap(), 1.0 / 3.0);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn moments_example() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_of_linear_pair() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let c = empirical_covariance(&rows).unwrap();
        assert!((c.matrix[(0, 1)] - 2.0 * c.matrix[(0, 0)]).abs() < 1e-12);
        assert_eq!(c.matrix[(0, 1)], c.matrix[(1, 0)]);
    }

    proptest! {
        #[test]
        fn ks_lies_in_unit_interval(xs in prop::collection::vec(-5.0f64..5.0, 1..200)) {
            let n = Normal::standard();
            let d = ks_statistic(&xs, |x| n.cdf(x)).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn two_sample_ks_is_symmetric(a in prop::collection::vec(0u8..10, 1..50), b in prop::collection::vec(0u8..10, 1..50)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert_eq!(ks_two_sample(&a, &b).unwrap(), ks_two_sample(&b, &a).unwrap());
        }
    }
}
