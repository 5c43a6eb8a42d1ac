//! Deterministic limit quantities: `h`, `g`, the covariance kernel of the
//! limit Gaussian process, exact means of `log L_n`, and the mean of the
//! GCD limit.
//!
//! Geometric series over `p_k = theta (1 - theta)^(k-1)` are truncated at
//! the smallest `K` with `(1 - theta)^K / theta < tol`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::psd_cholesky;
use crate::numtheory::SieveTable;
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Default absolute tolerance for truncated series.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default pivot tolerance for covariance Cholesky factorizations.
pub const PIVOT_TOL: f64 = 1e-10;

const TAYLOR_SWITCH: f64 = 1e-4;
const TAYLOR_TERMS: u32 = 8;

/// Retention probability `theta` strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ThetaParams(f64);

impl ThetaParams {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta < 1.0 {
            Ok(Self(theta))
        } else {
            Err(Error::Domain(format!("theta must lie in (0, 1), got {theta}")))
        }
    }

    #[inline]
    pub fn theta(self) -> f64 {
        self.0
    }

    /// Removal probability `1 - theta`.
    #[inline]
    pub fn q(self) -> f64 {
        1.0 - self.0
    }

    /// Geometric weight `p_k = theta (1 - theta)^(k-1)`, `k >= 1`.
    #[inline]
    pub fn p(self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        self.0 * self.q().powf((k - 1) as f64)
    }

    /// Smallest `K` with `(1 - theta)^K / theta < tol`.
    pub fn truncation_index(self, tol: f64) -> usize {
        let q = self.q();
        // K > ln(theta tol) / ln q
        let k = ((self.0 * tol).ln() / q.ln()).floor() as usize + 1;
        let mut k = k.max(1);
        while q.powf(k as f64) / self.0 >= tol {
            k += 1;
        }
        while k > 1 && q.powf((k - 1) as f64) / self.0 < tol {
            k -= 1;
        }
        k
    }

    /// `(p_1, ..., p_K)` for the truncation index of `tol`.
    pub fn weights(self, tol: f64) -> Vec<f64> {
        (1..=self.truncation_index(tol) as u64).map(|k| self.p(k)).collect()
    }
}

impl TryFrom<f64> for ThetaParams {
    type Error = Error;
    fn try_from(theta: f64) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<ThetaParams> for f64 {
    fn from(t: ThetaParams) -> f64 {
        t.0
    }
}

fn check_unit_interval(name: &str, z: f64) -> Result<()> {
    if (0.0..1.0).contains(&z) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1), got {z}")))
    }
}

fn check_time(name: &str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {t}")))
    }
}

/// `h(z) = sum_{k>=1} z^k / (k (k+1)) = 1 + ((1 - z) / z) log(1 - z)`.
pub fn h_func(z: f64) -> Result<f64> {
    check_unit_interval("z", z)?;
    if z < TAYLOR_SWITCH {
        return Ok(h_partial(z, TAYLOR_TERMS as usize));
    }
    Ok(1.0 + (1.0 - z) / z * (-z).ln_1p())
}

/// `sum_{k=1}^{terms} z^k / (k (k+1))`.
pub fn h_partial(z: f64, terms: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut zk = 1.0;
    for k in 1..=terms {
        zk *= z;
        let k = k as f64;
        acc.add(zk / (k * (k + 1.0)));
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GMode {
    Closed,
    Series,
}

/// Variance function `g(z) = sum_{k>=1} z^k (1 - z^k) / (k (k+1))`;
/// `Var G(t) = g(1 - theta) t`.
pub fn g_func(z: f64, mode: GMode) -> Result<f64> {
    check_unit_interval("z", z)?;
    Ok(match mode {
        GMode::Closed => g_closed(z),
        GMode::Series => g_series(z, 1e-17),
    })
}

fn g_closed(z: f64) -> f64 {
    if z < TAYLOR_SWITCH {
        return g_partial(z, TAYLOR_TERMS as usize);
    }
    // log(1-z) + (1+z) log(1+z) regrouped as log(1-z^2) + z log(1+z):
    // the two O(z^2) pieces cancel to O(z^3) with far less rounding than
    // the O(z) pieces of the original grouping.
    let bracket = (-z * z).ln_1p() + z * z.ln_1p();
    (z - 1.0) / (z * z) * bracket
}

fn g_partial(z: f64, terms: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut zk = 1.0;
    for k in 1..=terms {
        zk *= z;
        let k = k as f64;
        acc.add(zk * (1.0 - zk) / (k * (k + 1.0)));
    }
    acc.value()
}

fn g_series(z: f64, tol: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let mut acc = CompensatedSum::new();
    let mut zk = 1.0;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        zk *= z;
        acc.add(zk * (1.0 - zk) / (k * (k + 1.0)));
        // remaining terms are below z^{k+1} / ((k+1)(k+2)(1-z))
        if zk * z / ((k + 1.0) * (k + 2.0) * (1.0 - z)) < tol {
            break;
        }
    }
    acc.value()
}

/// Exact `E log L_n` from the indicator identity:
/// `sum_{m <= n} Lambda(m) (1 - (1 - theta)^floor(n/m))`.
///
/// Also evaluates the psi-weighted form
/// `theta sum_k psi(n/k) (1 - theta)^(k-1)` and fails with
/// [`Error::Numerical`] if the two disagree beyond `1e-9` relative.
pub fn mean_log_lcm(n: u64, theta: ThetaParams, table: &SieveTable) -> Result<f64> {
    let indicator = mean_log_lcm_indicator(n, theta, table)?;
    let weighted = mean_log_lcm_psi_weighted(n, theta, table, PsiWeighting::Shifted)?;
    if (indicator - weighted).abs() > 1e-9 * indicator.abs().max(1e-300) {
        return Err(Error::Numerical(format!(
            "mean of log L_{n}: indicator form {indicator} and psi-weighted form {weighted} disagree"
        )));
    }
    Ok(indicator)
}

/// Indicator form of `E log L_n` only.
pub fn mean_log_lcm_indicator(n: u64, theta: ThetaParams, table: &SieveTable) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let ln_q = (-theta.theta()).ln_1p();
    let mut acc = CompensatedSum::new();
    for (m, lp) in table.prime_powers_upto(n)? {
        let j = (n / m) as f64;
        acc.add(lp * -(j * ln_q).exp_m1());
    }
    Ok(acc.value())
}

/// Exponent convention for the psi-weighted mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiWeighting {
    /// `theta sum_k psi(n/k) (1 - theta)^(k-1)`, equal to the indicator form.
    Shifted,
    /// `theta sum_k psi(n/k) (1 - theta)^k`, i.e. `(1 - theta)` times the above.
    Unshifted,
}

pub fn mean_log_lcm_psi_weighted(
    n: u64,
    theta: ThetaParams,
    table: &SieveTable,
    weighting: PsiWeighting,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    if n > table.limit() {
        return Err(Error::Range {
            what: "n",
            value: n as f64,
            limit: table.limit(),
        });
    }
    // local psi prefix over 0..=n
    let mut psi = vec![0.0; n as usize + 1];
    let mut acc = CompensatedSum::new();
    for m in 2..=n {
        let lm = table.mangoldt(m)?;
        if lm > 0.0 {
            acc.add(lm);
        }
        psi[m as usize] = acc.value();
    }
    let q = theta.q();
    let offset = match weighting {
        PsiWeighting::Shifted => 1.0,
        PsiWeighting::Unshifted => 0.0,
    };
    let mut total = CompensatedSum::new();
    for k in 1..=n / 2 {
        let w = q.powf(k as f64 - offset);
        if w == 0.0 {
            break;
        }
        total.add(psi[(n / k) as usize] * w);
    }
    Ok(theta.theta() * total.value())
}

/// `E[1 / G_theta] = theta log(1/theta) / (1 - theta)` for geometric `G_theta` on `{1, 2, ...}`.
pub fn mean_inverse_geometric(theta: ThetaParams) -> f64 {
    let t = theta.theta();
    -(t * (t - 1.0).ln_1p()) / (1.0 - t)
}

/// Covariance kernel of the limit process,
/// `E[G(t) G(s)] = sum_k (t/k ^ s/k) p_k - sum_{k,l} (t/k ^ s/l) p_k p_l`.
/// Absolute error below `2 tol`.
pub fn limit_covariance(t: f64, s: f64, theta: ThetaParams, tol: f64) -> Result<f64> {
    check_time("t", t)?;
    check_time("s", s)?;
    check_tol(tol)?;
    let (hi, lo) = if t >= s { (t, s) } else { (s, t) };
    if lo == 0.0 {
        return Ok(0.0);
    }
    let k_max = theta.truncation_index(tol);
    let mut diag = CompensatedSum::new();
    for k in 1..=k_max as u64 {
        diag.add(lo / k as f64 * theta.p(k));
    }
    Ok(diag.value() - cross_min_sum_ordered(hi, lo, theta, k_max))
}

/// `sum_{k,l >= 1} (t/k ^ s/l) p_k p_l = E[t/eta_1 ^ s/eta_2]` for independent
/// geometric `eta_1, eta_2`. Absolute error below `2 tol`.
pub fn cross_min_sum(t: f64, s: f64, theta: ThetaParams, tol: f64) -> Result<f64> {
    check_time("t", t)?;
    check_time("s", s)?;
    check_tol(tol)?;
    let (hi, lo) = if t >= s { (t, s) } else { (s, t) };
    if lo == 0.0 {
        return Ok(0.0);
    }
    Ok(cross_min_sum_ordered(hi, lo, theta, theta.truncation_index(tol)))
}

// For each k the inner sum over l splits at L = ceil(lo k / hi): below it
// the minimum is hi/k, from it on lo/l. Both halves are geometric partial
// sums, so the cost is O(K) rather than O(K^2).
fn cross_min_sum_ordered(hi: f64, lo: f64, theta: ThetaParams, k_max: usize) -> f64 {
    let inv_mean = mean_inverse_geometric(theta);
    // prefix[l] = sum_{j <= l} p_j / j
    let mut prefix = Vec::with_capacity(k_max + 2);
    prefix.push(0.0);
    let mut acc = CompensatedSum::new();
    for j in 1..=(k_max as u64 + 1) {
        acc.add(theta.p(j) / j as f64);
        prefix.push(acc.value());
    }
    let mut total = CompensatedSum::new();
    for k in 1..=k_max as u64 {
        let split = ((lo * k as f64) / hi).ceil().max(1.0);
        let below_mass = -((split - 1.0) * (-theta.theta()).ln_1p()).exp_m1();
        let upper_tail = if split as usize <= k_max + 1 {
            (inv_mean - prefix[split as usize - 1]).max(0.0)
        } else {
            0.0
        };
        let inner = hi / k as f64 * below_mass + lo * upper_tail;
        total.add(theta.p(k) * inner);
    }
    total.value()
}

/// `C_1(t, s) = E(s/eta_1 - t/eta_2)^+ = sum_{k,l} p_k p_l (s/k - t/l)^+`
/// for `0 < s <= t <= 1`, by direct truncated double sum.
pub fn c1_positive_part(t: f64, s: f64, theta: ThetaParams, tol: f64) -> Result<f64> {
    if !(s > 0.0 && s <= t && t <= 1.0) {
        return Err(Error::Domain(format!(
            "c1 requires 0 < s <= t <= 1, got t = {t}, s = {s}"
        )));
    }
    check_tol(tol)?;
    let w = theta.weights(tol);
    let mut total = CompensatedSum::new();
    for (k, pk) in w.iter().enumerate() {
        let a = s / (k + 1) as f64;
        for (l, pl) in w.iter().enumerate() {
            let d = a - t / (l + 1) as f64;
            if d > 0.0 {
                total.add(pk * pl * d);
            }
        }
    }
    Ok(total.value())
}

/// The interval-overlap double series to which the normalized finite-`n`
/// prime covariance sum converges (`x` in the role of `theta`):
/// `sum_j (1 - (1-x)^j) sum_{i in (tj/s - 1, tj/s + t/s)} (1-x)^i
///  (t/i ^ s/j - t/(i+1) v s/(j+1))^+`, for `0 < s <= t <= 1`.
pub fn covariance_overlap_series(t: f64, s: f64, x: ThetaParams, tol: f64) -> Result<f64> {
    if !(s > 0.0 && s <= t && t <= 1.0) {
        return Err(Error::Domain(format!(
            "overlap series requires 0 < s <= t <= 1, got t = {t}, s = {s}"
        )));
    }
    check_tol(tol)?;
    let q = x.q();
    let ratio = t / s;
    let j_max = x.truncation_index(tol) as u64;
    let mut total = CompensatedSum::new();
    for j in 1..=j_max {
        let jf = j as f64;
        let outer = -(jf * (-x.theta()).ln_1p()).exp_m1();
        let lo = ((ratio * jf - 1.0).floor() + 1.0).max(1.0) as u64;
        let hi = (ratio * (jf + 1.0)).ceil() as u64;
        for i in lo..hi.max(lo) {
            let fi = i as f64;
            let len = (t / fi).min(s / jf) - (t / (fi + 1.0)).max(s / (jf + 1.0));
            if len > 0.0 {
                total.add(outer * q.powf(fi) * len);
            }
        }
    }
    Ok(total.value())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

/// Mean of the GCD limit, `sum_p log p / (p^2 - 1) = sum_m Lambda(m) / m^2`,
/// as a partial sum over primes `<= cutoff` plus a bound on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcdLimitMean {
    pub value: f64,
    /// Upper bound on the omitted tail, `(1 + log cutoff) / cutoff`.
    pub tail_bound: f64,
}

pub fn gcd_limit_mean(table: &SieveTable, cutoff: u64) -> Result<GcdLimitMean> {
    if cutoff < 2 || cutoff > table.limit() {
        return Err(Error::Range {
            what: "cutoff",
            value: cutoff as f64,
            limit: table.limit(),
        });
    }
    let value = table
        .primes_upto(cutoff)
        .iter()
        .map(|&p| {
            let p = f64::from(p);
            p.ln() / (p * p - 1.0)
        })
        .collect::<CompensatedSum>()
        .value();
    let c = cutoff as f64;
    Ok(GcdLimitMean {
        value,
        tail_bound: (1.0 + c.ln()) / c,
    })
}

/// Analytic covariance matrix of the limit process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGrid {
    pub theta: ThetaParams,
    pub grid: Vec<f64>,
    pub matrix: DMatrix<f64>,
    /// Upper bound on the absolute error of every entry.
    pub truncation_error: f64,
}

/// Checks a time grid: nonempty, strictly increasing, inside `[0, 1]`.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    for &t in grid {
        check_time("grid point", t)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!("time grid must be strictly increasing: {grid:?}")));
    }
    Ok(())
}

impl CovarianceGrid {
    pub fn build(theta: ThetaParams, grid: &[f64], tol: f64) -> Result<Self> {
        validate_grid(grid)?;
        let n = grid.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let c = limit_covariance(grid[i], grid[j], theta, tol)?;
                matrix[(i, j)] = c;
                matrix[(j, i)] = c;
            }
        }
        Ok(Self {
            theta,
            grid: grid.to_vec(),
            matrix,
            truncation_error: 2.0 * tol,
        })
    }

    /// Lower Cholesky factor; a negative pivot is reported with the grid.
    pub fn cholesky(&self, pivot_tol: f64) -> Result<DMatrix<f64>> {
        psd_cholesky(&self.matrix, pivot_tol).map_err(|e| {
            Error::Numerical(format!(
                "covariance not PSD at grid index {} (t = {}): pivot {:e}, theta = {}, grid = {:?}",
                e.index,
                self.grid[e.index],
                e.pivot,
                self.theta.theta(),
                self.grid
            ))
        })
    }
}
