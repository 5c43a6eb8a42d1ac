use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_table, ExperimentReport};
use crate::analytic::{mean_inverse_geometric, ThetaParams};
use crate::numtheory::SieveTable;
use crate::rng::{Stream, DEFAULT_SEED};
use crate::sampler::{path_at_counts, retention_threshold, LcmAccumulator};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SllnParams {
    pub n_max: u64,
    pub theta: f64,
    /// Increasing sample sizes; the last one is `n_max`.
    pub checkpoints: Vec<u64>,
    /// Independent trajectories for the trend vote; trajectory 0 is primary.
    pub trajectories: usize,
    pub seed: u64,
    /// Allowed `|log L_n / n - limit|` at `n_max` on trajectory 0.
    pub tol: f64,
    /// Allowed `|psi(n_max) / n_max - 1|` for the full-set control.
    pub control_tol: f64,
}

impl Default for SllnParams {
    fn default() -> Self {
        Self {
            n_max: 1_000_000,
            theta: 0.5,
            checkpoints: vec![10_000, 100_000, 1_000_000],
            trajectories: 5,
            seed: DEFAULT_SEED,
            tol: 0.02,
            control_tol: 0.01,
        }
    }
}

/// `theta log(1/theta) / (1 - theta)`, extended by 1 at `theta = 1`.
fn slln_limit(theta: f64) -> Result<f64> {
    if theta == 1.0 {
        Ok(1.0)
    } else {
        Ok(mean_inverse_geometric(ThetaParams::new(theta)?))
    }
}

/// One nested trajectory per seed stream: `A_n` grows element by element, so
/// all checkpoints of a trajectory share one sample path.
pub fn run_slln(params: &SllnParams, table: &SieveTable) -> Result<ExperimentReport> {
    let SllnParams { n_max, theta, ref checkpoints, trajectories, seed, tol, control_tol } =
        *params;
    require_table("n_max", n_max, table)?;
    retention_threshold(theta)?;
    if trajectories == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    if checkpoints.is_empty()
        || checkpoints.windows(2).any(|w| w[1] <= w[0])
        || checkpoints[0] == 0
        || *checkpoints.last().unwrap() != n_max
    {
        return Err(Error::Config(format!(
            "checkpoints must be positive, strictly increasing and end at n_max = {n_max}"
        )));
    }
    let limit = slln_limit(theta)?;
    LcmAccumulator::new(table, n_max)?;
    let errors: Vec<Vec<f64>> = (0..trajectories as u64)
        .into_par_iter()
        .map_init(
            || LcmAccumulator::new(table, n_max).expect("checked above"),
            |acc, r| {
                let values = path_at_counts(n_max, theta, checkpoints, &Stream::new(seed, r), acc)?;
                Ok(values
                    .iter()
                    .zip(checkpoints)
                    .map(|(v, &n)| (v / n as f64 - limit).abs())
                    .collect())
            },
        )
        .collect::<Result<_>>()?;
    let mut acc = LcmAccumulator::new(table, n_max)?;
    let full = path_at_counts(n_max, 1.0, &[n_max], &Stream::new(seed, 0), &mut acc)?[0];
    let control = (full / n_max as f64 - 1.0).abs();

    let mut report = ExperimentReport::new("slln", seed, params);
    report.stat("limit", limit);
    for (r, errs) in errors.iter().enumerate() {
        for (n, e) in checkpoints.iter().zip(errs) {
            report.stat(format!("abs_error[trajectory={r},n={n}]"), *e);
        }
    }
    report.stat("control_psi_over_n", full / n_max as f64);
    let last = checkpoints.len() - 1;
    report.below(
        format!("|log L_n / n - limit| < {tol} at n = {n_max} (trajectory 0)"),
        errors[0][last],
        tol,
    );
    report.below(
        format!("full-set control |psi(n) / n - 1| < {control_tol} at n = {n_max}"),
        control,
        control_tol,
    );
    if checkpoints.len() > 1 {
        let shrinking = errors.iter().filter(|e| e[last] <= e[0]).count();
        report.criterion(
            format!(
                "error at n = {n_max} <= error at n = {} on a majority of trajectories",
                checkpoints[0]
            ),
            shrinking as f64,
            (trajectories / 2 + 1) as f64,
            2 * shrinking > trajectories,
        );
    }
    Ok(report)
}
