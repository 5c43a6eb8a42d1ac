//! End-to-end acceptance suite: one line per criterion, non-zero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use lcmlimit::analytic::{g_func, h_func, mean_log_lcm, GMode, ThetaParams};
use lcmlimit::experiments::{
    run_clt, run_fclt, run_gcd_limit, run_lemma_checks, run_poisson_dense, run_poisson_sparse,
    run_slln, CltParams, ExperimentReport, FcltParams, GcdParams, PoissonRegime,
    PoissonRegimeParams, SllnParams,
};
use lcmlimit::gausslimit::{
    check_representation_a, coefficient_identity_error, max_standardized_gap, simulate_cholesky,
    simulate_series, SeriesConfig, DEFAULT_SERIES_TAIL,
};
use lcmlimit::numtheory::{BigLcm, SieveTable};
use lcmlimit::rng::DEFAULT_SEED;
use lcmlimit::sampler::enumerate_exact_mean;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn from_report(report: &ExperimentReport) -> Outcome {
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} (observed {}, threshold {})", c.description, c.observed, c.threshold))
        .collect();
    let detail = if failed.is_empty() {
        report
            .criteria
            .iter()
            .map(|c| format!("{:.4e} vs {:.4e}", c.observed, c.threshold))
            .collect::<Vec<_>>()
            .join("; ")
    } else {
        format!("failed: {}", failed.join("; "))
    };
    outcome(report.pass, detail)
}

fn within_budget(out: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    let ok = elapsed <= budget;
    outcome(
        out.pass && ok,
        format!("{} [{:.1}s, budget {}s]", out.detail, elapsed.as_secs_f64(), budget.as_secs()),
    )
}

fn psi_oracle(table: &SieveTable) -> Outcome {
    let mut lcm = BigLcm::new();
    let mut worst = 0.0f64;
    for n in 1..=10_000u64 {
        lcm.push(n);
        let exact = lcm.ln();
        let psi = table.chebyshev_psi(n as f64).unwrap();
        let rel = if exact == 0.0 { psi.abs() } else { (psi - exact).abs() / exact };
        worst = worst.max(rel);
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.3e} over n <= 10^4"))
}

fn exact_mean(table: &SieveTable) -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=14u64 {
        for theta in [0.2, 0.5, 0.8] {
            let oracle = enumerate_exact_mean(n, theta).unwrap();
            let fast = mean_log_lcm(n, ThetaParams::new(theta).unwrap(), table).unwrap();
            let rel = if oracle == 0.0 { fast.abs() } else { (fast - oracle).abs() / oracle };
            worst = worst.max(rel);
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.3e}"))
}

fn closed_forms() -> Outcome {
    let mut series_gap = 0.0f64;
    let mut identity_gap = 0.0f64;
    for i in 1..=99 {
        let z = f64::from(i) / 100.0;
        let closed = g_func(z, GMode::Closed).unwrap();
        let series = g_func(z, GMode::Series).unwrap();
        series_gap = series_gap.max((closed - series).abs());
        let via_h = h_func(z).unwrap() - h_func(z * z).unwrap();
        identity_gap = identity_gap.max((closed - via_h).abs());
    }
    outcome(
        series_gap < 1e-12 && identity_gap < 1e-12,
        format!("closed vs series {series_gap:.3e}; g - (h(z) - h(z^2)) {identity_gap:.3e}"),
    )
}

fn criterion_of(report: &ExperimentReport, prefix: &str) -> Outcome {
    let picked: Vec<_> = report
        .criteria
        .iter()
        .filter(|c| c.description.starts_with(prefix))
        .collect();
    let pass = !picked.is_empty() && picked.iter().all(|c| c.pass);
    let detail = picked
        .iter()
        .map(|c| format!("{}: {:.4e} vs {:.4e}", c.description, c.observed, c.threshold))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn gaussian_cross_validation() -> Outcome {
    let theta = ThetaParams::new(0.5).unwrap();
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let config = SeriesConfig::with_tail(theta, &grid, DEFAULT_SEED, DEFAULT_SERIES_TAIL).unwrap();
    let series = simulate_series(&config, 100_000).unwrap();
    let chol = simulate_cholesky(theta, &grid, 100_000, DEFAULT_SEED ^ 1).unwrap();
    let gap = max_standardized_gap(
        &series.empirical_covariance().unwrap(),
        &chol.empirical_covariance().unwrap(),
    );
    let coeff = [0.1, 0.5, 0.9]
        .iter()
        .map(|&t| coefficient_identity_error(ThetaParams::new(t).unwrap(), 50).unwrap())
        .fold(0.0, f64::max);
    outcome(
        gap <= 3.0 && coeff <= 1e-12,
        format!(
            "max |series - cholesky| / combined SE {gap:.3} (limit 3; i_max {}, k_max {}); coefficient identity {coeff:.3e}",
            config.i_max, config.k_max
        ),
    )
}

fn representation_a() -> Outcome {
    let grid: Vec<f64> = (1..=10).map(|i| f64::from(i) / 10.0).collect();
    let worst = [0.1, 0.5, 0.9]
        .iter()
        .map(|&t| check_representation_a(ThetaParams::new(t).unwrap(), &grid, 1e-8).unwrap())
        .fold(0.0, f64::max);
    outcome(worst < 1e-8, format!("max covariance discrepancy {worst:.3e}"))
}

fn sparse_params() -> PoissonRegimeParams {
    PoissonRegimeParams::new(2.0, 1_000_000, PoissonRegime::Sparse)
}

fn dense_params() -> PoissonRegimeParams {
    PoissonRegimeParams::new(1.0, 1_000_000, PoissonRegime::Dense)
}

// Reduced configurations of every report, run twice under each worker count.
fn reports_at_width(table: &SieveTable, workers: usize) -> Vec<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| {
        let clt = CltParams { n: 20_000, replicas: 200, ..CltParams::default() };
        let fclt = FcltParams { n: 20_000, replicas: 200, ..FcltParams::default() };
        let slln = SllnParams {
            n_max: 100_000,
            checkpoints: vec![1000, 10_000, 100_000],
            ..SllnParams::default()
        };
        let sparse = PoissonRegimeParams::new(2.0, 20_000, PoissonRegime::Sparse);
        let dense = PoissonRegimeParams::new(1.0, 20_000, PoissonRegime::Dense);
        let gcd = GcdParams { n: 100_000, replicas: 20_000, cutoff: 100_000, ..GcdParams::default() };
        let theta = ThetaParams::new(0.5).unwrap();
        let grid = [0.25, 0.5, 1.0];
        let config = SeriesConfig::with_tail(theta, &grid, 5, DEFAULT_SERIES_TAIL).unwrap();
        vec![
            run_clt(&clt, table).unwrap().to_json(),
            run_fclt(&fclt, table).unwrap().to_json(),
            run_slln(&slln, table).unwrap().to_json(),
            run_poisson_sparse(&sparse, 300, 5, table).unwrap().to_json(),
            run_poisson_dense(&dense, 300, 5, table).unwrap().to_json(),
            run_gcd_limit(&gcd, table).unwrap().to_json(),
            run_lemma_checks(table, 5).unwrap().to_json(),
            serde_json::to_string(&simulate_series(&config, 500).unwrap()).unwrap(),
            serde_json::to_string(&simulate_cholesky(theta, &grid, 500, 5).unwrap()).unwrap(),
        ]
    })
}

fn reproducibility(table: &SieveTable) -> Outcome {
    let first = reports_at_width(table, 1);
    let again = reports_at_width(table, 1);
    let wide = reports_at_width(table, 4);
    let same = first == again && first == wide;
    outcome(
        same,
        format!("{} reports byte-identical across repeats and 1 vs 4 workers: {same}", first.len()),
    )
}

fn main() {
    let table = SieveTable::build(1_000_000).unwrap().with_psi_cache();
    let secs = Duration::from_secs;
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, out: Outcome| {
        println!("criterion {id:2} [{}] {name}: {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        results.push((id, name, out));
    };

    let t = Instant::now();
    let out = psi_oracle(&table);
    record(1, "psi equals log LCM(1..n)", within_budget(out, t.elapsed(), secs(30)));

    let t = Instant::now();
    let out = exact_mean(&table);
    record(2, "exact mean equals enumeration", within_budget(out, t.elapsed(), secs(120)));

    record(3, "closed forms of g and h", closed_forms());

    let t = Instant::now();
    let clt = run_clt(&CltParams::default(), &table).unwrap();
    let elapsed = t.elapsed();
    record(
        4,
        "variance scaling",
        within_budget(criterion_of(&clt, "sample variance"), elapsed, secs(300)),
    );
    record(5, "normality", criterion_of(&clt, "KS distance"));

    let fclt = run_fclt(&FcltParams::default(), &table).unwrap();
    record(6, "FCLT covariance", criterion_of(&fclt, "cov("));

    record(7, "Gaussian process cross-validation", gaussian_cross_validation());
    record(8, "representation (a)", representation_a());

    let t = Instant::now();
    let slln = run_slln(&SllnParams::default(), &table).unwrap();
    record(9, "strong law", within_budget(from_report(&slln), t.elapsed(), secs(60)));

    let sparse = run_poisson_sparse(&sparse_params(), 5000, DEFAULT_SEED, &table).unwrap();
    record(10, "Poisson sparse", from_report(&sparse));

    let dense = run_poisson_dense(&dense_params(), 5000, DEFAULT_SEED, &table).unwrap();
    record(11, "Poisson dense", criterion_of(&dense, "sup half-integer"));

    let gcd = run_gcd_limit(&GcdParams::default(), &table).unwrap();
    record(12, "GCD limit", from_report(&gcd));

    let t = Instant::now();
    let lemmas = run_lemma_checks(&table, DEFAULT_SEED).unwrap();
    record(13, "prime sum estimates", within_budget(from_report(&lemmas), t.elapsed(), secs(300)));

    record(14, "reproducibility", reproducibility(&table));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
