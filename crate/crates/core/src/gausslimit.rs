//! Simulation of the limit Gaussian process `G` on a finite grid.
//!
//! Two independent routes:
//!
//! * series: `G(t) = sum_i sum_{k >= i} a_ik B_i(t/k)` for independent
//!   Brownian motions `B_i`, each sampled exactly at the irregular points
//!   `t_j / k` by independent Gaussian increments;
//! * Cholesky: exact multivariate normal draws from the analytic kernel.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    limit_covariance, mean_inverse_geometric, validate_grid, CovarianceGrid, ThetaParams,
    DEFAULT_TOL, PIVOT_TOL,
};
use crate::rng::Stream;
use crate::stats::{empirical_covariance, CovarianceEstimate};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Default bound on the coefficient mass dropped by truncation.
pub const DEFAULT_SERIES_TAIL: f64 = 1e-4;
/// Largest number of Brownian evaluation points per replica.
pub const MAX_SERIES_POINTS: usize = 1 << 22;
/// Largest grid accepted by [`simulate_cholesky`].
pub const MAX_CHOLESKY_GRID: usize = 512;

/// `a_ik`: `theta^(1/2) (1-theta)^(i/2)` on the diagonal,
/// `-theta^(3/2) (1-theta)^(k-i/2-1)` for `k > i`.
pub fn series_coefficient(theta: ThetaParams, i: u64, k: u64) -> Result<f64> {
    if i == 0 || i > k {
        return Err(Error::Domain(format!("coefficient needs 1 <= i <= k, got i = {i}, k = {k}")));
    }
    let (t, q) = (theta.theta(), theta.q());
    let fi = i as f64;
    Ok(if k == i {
        t.sqrt() * q.powf(fi / 2.0)
    } else {
        -t.powf(1.5) * q.powf(k as f64 - fi / 2.0 - 1.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub theta: ThetaParams,
    pub grid: Vec<f64>,
    /// Number of Brownian motions.
    pub i_max: usize,
    /// Largest `k` in the inner sums.
    pub k_max: usize,
    pub seed: u64,
}

impl SeriesConfig {
    /// Smallest `i_max` and `k_max` whose [`tail_bound`](Self::tail_bound)
    /// is below `target`.
    pub fn with_tail(theta: ThetaParams, grid: &[f64], seed: u64, target: f64) -> Result<Self> {
        if !(target > 0.0) {
            return Err(Error::Domain(format!("tail target must be positive, got {target}")));
        }
        let sq = theta.q().sqrt();
        let mut i_max = 1;
        while outer_tail(theta, i_max) >= target / 2.0 {
            i_max += 1;
        }
        let mut k_max = i_max + 1;
        while inner_tail(theta, i_max, k_max) >= target / 2.0 {
            k_max += 1;
        }
        debug_assert!(sq < 1.0);
        let config = Self {
            theta,
            grid: grid.to_vec(),
            i_max,
            k_max,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.grid)?;
        if self.i_max < 1 || self.k_max < self.i_max + 1 {
            return Err(Error::Config(format!(
                "series truncation needs i_max >= 1 and k_max >= i_max + 1, got {} and {}",
                self.i_max, self.k_max
            )));
        }
        Ok(())
    }

    /// Bound on `sum |a_ik|` over the dropped terms: outer
    /// `(1-theta)^(i_max/2) / (1 - sqrt(1-theta))` plus inner
    /// `sqrt(theta) (1-theta)^(k_max - i_max/2) / (1 - sqrt(1-theta))`.
    pub fn tail_bound(&self) -> f64 {
        outer_tail(self.theta, self.i_max) + inner_tail(self.theta, self.i_max, self.k_max)
    }

    /// Evaluation points per replica.
    pub fn point_count(&self) -> usize {
        let per_t = (1..=self.i_max).map(|i| self.k_max + 1 - i).sum::<usize>();
        per_t * self.grid.len()
    }
}

fn outer_tail(theta: ThetaParams, i_max: usize) -> f64 {
    let q = theta.q();
    q.powf(i_max as f64 / 2.0) / (1.0 - q.sqrt())
}

fn inner_tail(theta: ThetaParams, i_max: usize, k_max: usize) -> f64 {
    let q = theta.q();
    theta.theta().sqrt() * q.powf(k_max as f64 - i_max as f64 / 2.0) / (1.0 - q.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpMethod {
    Series,
    Cholesky,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchProvenance {
    pub seed: u64,
    pub replicas: usize,
    pub i_max: Option<usize>,
    pub k_max: Option<usize>,
    /// Series: dropped coefficient mass. Cholesky: kernel entry error.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPathBatch {
    pub method: GpMethod,
    pub theta: ThetaParams,
    pub grid: Vec<f64>,
    /// One row per replica, one column per grid point.
    pub paths: Vec<Vec<f64>>,
    pub provenance: BatchProvenance,
}

impl GaussianPathBatch {
    pub fn empirical_covariance(&self) -> Result<CovarianceEstimate> {
        empirical_covariance(&self.paths)
    }

    /// Values at grid index `j` across replicas.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[j]).collect()
    }

    /// Wide CSV: header `path_id,t_1,...,t_G`, one row per path.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "path_id")?;
        for t in &self.grid {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
        for (id, path) in self.paths.iter().enumerate() {
            write!(w, "{id}")?;
            for v in path {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Long CSV with columns `t,path_id,value`.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,path_id,value")?;
        for (id, path) in self.paths.iter().enumerate() {
            for (t, v) in self.grid.iter().zip(path) {
                writeln!(w, "{t},{id},{v}")?;
            }
        }
        Ok(())
    }
}

// One Brownian motion's schedule: increments in time order, each feeding
// the coefficient-weighted value into a grid slot.
struct Schedule {
    // (sqrt of time increment, 0 for a repeated time; grid index; a_ik)
    steps: Vec<(f64, usize, f64)>,
}

fn schedules(config: &SeriesConfig) -> Result<Vec<Schedule>> {
    let points = config.point_count();
    if points > MAX_SERIES_POINTS {
        return Err(Error::Resource(format!(
            "series needs {points} Brownian points per replica (cap {MAX_SERIES_POINTS})"
        )));
    }
    (1..=config.i_max as u64)
        .map(|i| {
            let mut entries = Vec::new();
            for k in i..=config.k_max as u64 {
                let a = series_coefficient(config.theta, i, k)?;
                for (j, &t) in config.grid.iter().enumerate() {
                    if t > 0.0 {
                        entries.push((t / k as f64, j, a));
                    }
                }
            }
            entries.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut last = 0.0;
            let steps = entries
                .into_iter()
                .map(|(time, j, a)| {
                    let step = (time - last).sqrt();
                    last = time;
                    (step, j, a)
                })
                .collect();
            Ok(Schedule { steps })
        })
        .collect()
}

/// `m` replicas of the truncated series; replica `r` uses stream
/// `(seed, r)` and `B_i` its substream `i`.
pub fn simulate_series(config: &SeriesConfig, m: usize) -> Result<GaussianPathBatch> {
    config.validate()?;
    if m == 0 {
        return Err(Error::Domain("replica count must be positive".into()));
    }
    let plan = schedules(config)?;
    let g = config.grid.len();
    let paths = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let stream = Stream::new(config.seed, r);
            let mut path = vec![0.0; g];
            for (i, schedule) in plan.iter().enumerate() {
                let mut rng = stream.substream(i as u64 + 1);
                let mut b = 0.0;
                for &(step, j, a) in &schedule.steps {
                    if step > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        b += step * z;
                    }
                    path[j] += a * b;
                }
            }
            path
        })
        .collect();
    Ok(GaussianPathBatch {
        method: GpMethod::Series,
        theta: config.theta,
        grid: config.grid.clone(),
        paths,
        provenance: BatchProvenance {
            seed: config.seed,
            replicas: m,
            i_max: Some(config.i_max),
            k_max: Some(config.k_max),
            truncation_bound: config.tail_bound(),
        },
    })
}

/// `m` exact draws `L z` with `L L^T` the analytic covariance on `grid`.
pub fn simulate_cholesky(
    theta: ThetaParams,
    grid: &[f64],
    m: usize,
    seed: u64,
) -> Result<GaussianPathBatch> {
    if grid.len() > MAX_CHOLESKY_GRID {
        return Err(Error::Config(format!(
            "Cholesky grid of {} points exceeds {MAX_CHOLESKY_GRID}",
            grid.len()
        )));
    }
    if m == 0 {
        return Err(Error::Domain("replica count must be positive".into()));
    }
    let cov = CovarianceGrid::build(theta, grid, DEFAULT_TOL)?;
    let l = cov.cholesky(PIVOT_TOL)?;
    let g = grid.len();
    let paths = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = Stream::new(seed, r);
            let z = DVector::from_fn(g, |_, _| rng.sample::<f64, _>(StandardNormal));
            (&l * z).iter().copied().collect()
        })
        .collect();
    Ok(GaussianPathBatch {
        method: GpMethod::Cholesky,
        theta,
        grid: grid.to_vec(),
        paths,
        provenance: BatchProvenance {
            seed,
            replicas: m,
            i_max: None,
            k_max: None,
            truncation_bound: cov.truncation_error,
        },
    })
}

/// Largest entrywise gap between `Cov[G(t) + E(B(t/eta) | B)]`, computed as
/// the kernel plus `sum_{k,l} p_k p_l (t/k ^ s/l)`, and `(t ^ s) E[1/eta]`
/// for geometric `eta`.
pub fn check_representation_a(theta: ThetaParams, grid: &[f64], tol: f64) -> Result<f64> {
    validate_grid(grid)?;
    // evaluate well inside the tolerance being checked
    let eval_tol = tol * 1e-3;
    let w = theta.weights(eval_tol);
    let inv_mean = mean_inverse_geometric(theta);
    let mut worst = 0.0f64;
    for (a, &t) in grid.iter().enumerate() {
        for &s in &grid[a..] {
            let mut cross = CompensatedSum::new();
            for (k, pk) in w.iter().enumerate() {
                let tk = t / (k + 1) as f64;
                for (l, pl) in w.iter().enumerate() {
                    cross.add(pk * pl * tk.min(s / (l + 1) as f64));
                }
            }
            let lhs = limit_covariance(t, s, theta, eval_tol)? + cross.value();
            worst = worst.max((lhs - t.min(s) * inv_mean).abs());
        }
    }
    Ok(worst)
}

/// `sum_{i <= k ^ l} a_ik a_il - (p_k 1{k = l} - p_k p_l)`, maximal over
/// `k, l <= n`.
pub fn coefficient_identity_error(theta: ThetaParams, n: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 1..=n {
        for l in 1..=n {
            let mut s = 0.0;
            for i in 1..=k.min(l) {
                s += series_coefficient(theta, i, k)? * series_coefficient(theta, i, l)?;
            }
            let target = if k == l { theta.p(k) } else { 0.0 } - theta.p(k) * theta.p(l);
            worst = worst.max((s - target).abs());
        }
    }
    Ok(worst)
}

/// Entrywise `|A - B| / sqrt(se_A^2 + se_B^2)`, maximal over the matrix.
pub fn max_standardized_gap(a: &CovarianceEstimate, b: &CovarianceEstimate) -> f64 {
    let mut worst = 0.0f64;
    for (idx, x) in a.matrix.iter().enumerate() {
        let y = b.matrix[idx];
        let se = a.se[idx].hypot(b.se[idx]);
        let z = if se > 0.0 {
            (x - y).abs() / se
        } else if x == &y {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    worst
}

/// Analytic covariance on `grid` as a dense matrix.
pub fn analytic_matrix(theta: ThetaParams, grid: &[f64]) -> Result<DMatrix<f64>> {
    Ok(CovarianceGrid::build(theta, grid, DEFAULT_TOL)?.matrix)
}
