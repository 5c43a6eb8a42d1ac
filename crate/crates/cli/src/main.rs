//! `lcmlimit` command-line front end.
//!
//! Exit codes: 0 all criteria pass, 1 a criterion failed, 2 usage or
//! configuration error, 3 resource error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lcmlimit::analytic::{
    g_func, mean_log_lcm, mean_log_lcm_psi_weighted, GMode, PsiWeighting, ThetaParams,
};
use lcmlimit::experiments::{
    check_gaussian_batch, run_clt, run_fclt, run_gcd_limit, run_lemma_checks, run_poisson_dense,
    run_poisson_sparse, run_slln, CltParams, ExperimentReport, FcltParams, GcdParams,
    PoissonRegime, PoissonRegimeParams, SllnParams, LEMMA_TABLE_LIMIT,
};
use lcmlimit::gausslimit::{
    simulate_cholesky, simulate_series, GaussianPathBatch, SeriesConfig, DEFAULT_SERIES_TAIL,
};
use lcmlimit::numtheory::{sieve_cap_from_env, SieveTable, SIEVE_CAP_ENV};
use lcmlimit::rng::DEFAULT_SEED;
use lcmlimit::sampler::{enumerate_exact_mean, MAX_ENUMERATION_N};
use lcmlimit::Error;

#[derive(Debug, Parser)]
#[command(
    name = "lcmlimit",
    version,
    about = "Limit theorems for the LCM of a random subset of {1, ..., n}",
    after_help = format!(
        "Exit codes: 0 pass, 1 criterion failed, 2 usage/config error, 3 resource error.\n\
         The sieve size is capped by ${SIEVE_CAP_ENV} (default 10^8)."
    )
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed; replica r draws from stream (seed, r)
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (reports default to json, figures to csv)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the resolved parameters and exit
    #[arg(long, global = true)]
    dry_run: bool,
    /// Record wall-clock seconds in the report
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Series,
    Cholesky,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Central limit theorem for log L_n
    Clt {
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 2000)]
        replicas: usize,
        /// Allowed relative error of the sample variance
        #[arg(long, default_value_t = 0.15)]
        variance_tol: f64,
    },
    /// Covariance of the standardized path against the limit kernel
    Fclt {
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 2000)]
        replicas: usize,
        /// Allowed relative error per covariance entry (or 3 SE if larger)
        #[arg(long, default_value_t = 0.15)]
        covariance_tol: f64,
    },
    /// Strong law: log L_n / n along nested trajectories
    Slln {
        #[arg(long, default_value_t = 1_000_000)]
        n_max: u64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Comma-separated sample sizes ending at n-max
        #[arg(long, value_delimiter = ',', default_values_t = [10_000u64, 100_000, 1_000_000])]
        checkpoints: Vec<u64>,
        #[arg(long, default_value_t = 5)]
        trajectories: usize,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, default_value_t = 0.01)]
        control_tol: f64,
    },
    /// Poisson limit of log L_n / log n for theta = lambda / n
    PoissonSparse(PoissonArgs),
    /// Poisson limit of (psi(n) - log L_n) / log n for theta = 1 - lambda log n / n
    PoissonDense(PoissonArgs),
    /// log GCD of two uniform integers against its limit
    GcdLimit {
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 1_000_000)]
        replicas: usize,
        /// Primes up to this bound enter the limit (default: n)
        #[arg(long)]
        cutoff: Option<u64>,
    },
    /// Limit process by its Brownian series representation
    GpSeries {
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        /// Number of Brownian motions (default: from --tail)
        #[arg(long)]
        i_max: Option<usize>,
        /// Inner truncation (default: from --tail)
        #[arg(long)]
        k_max: Option<usize>,
        /// Bound on the dropped coefficient mass
        #[arg(long, default_value_t = DEFAULT_SERIES_TAIL)]
        tail: f64,
    },
    /// Limit process by Cholesky factorization of its covariance
    GpCholesky {
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
    },
    /// Numeric checks of the prime sum estimates used by the limit theorems
    Lemmas,
    /// Exact E log L_n
    Mean {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        theta: f64,
    },
    /// CSV of theta -> g(1 - theta)
    FigureG {
        #[arg(long, default_value_t = 99)]
        points: usize,
    },
    /// CSV of sample paths of the limit process
    FigurePaths {
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 3)]
        paths: usize,
        /// Grid intervals on [0, 1]
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Method::Series)]
        method: Method,
    },
}

#[derive(Debug, Clone, Args)]
struct GridArgs {
    /// Comma-separated increasing times in [0, 1]
    #[arg(long, value_delimiter = ',', conflicts_with = "grid_count")]
    grid: Option<Vec<f64>>,
    /// Use the grid k / count, k = 1..count
    #[arg(long)]
    grid_count: Option<usize>,
}

impl GridArgs {
    fn resolve(&self, default: &[f64]) -> Vec<f64> {
        match (&self.grid, self.grid_count) {
            (Some(g), _) => g.clone(),
            (None, Some(c)) => (1..=c).map(|k| k as f64 / c as f64).collect(),
            (None, None) => default.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct PoissonArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, default_value_t = 5000)]
    replicas: usize,
    /// Scales lambda inside theta only
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
}

#[derive(Debug)]
enum Failure {
    Criteria,
    Usage(String),
    Resource(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Resource(_) => Failure::Resource(e.to_string()),
            Error::Numerical(_) => {
                eprintln!("error: {e}");
                Failure::Criteria
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Resource(format!("i/o: {e}"))
    }
}

type Outcome = std::result::Result<(), Failure>;

/// The invocation as typed, minus flags that do not affect results.
fn invocation() -> String {
    let mut parts = vec!["lcmlimit".to_owned()];
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--workers" | "--out" => {
                args.next();
            }
            "--timing" => {}
            s if s.starts_with("--workers=") || s.starts_with("--out=") => {}
            _ => parts.push(a),
        }
    }
    parts.join(" ")
}

struct Ctx<'a> {
    common: &'a Common,
    started: Instant,
}

impl Ctx<'_> {
    fn sink(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.common.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn dry_run(&self, name: &str, params: serde_json::Value) -> Outcome {
        let resolved = json!({
            "command": name,
            "seed": self.common.seed,
            "params": params,
        });
        println!("{}", serde_json::to_string_pretty(&resolved).expect("json"));
        Ok(())
    }

    fn emit(&self, mut report: ExperimentReport) -> Outcome {
        report.invocation = Some(invocation());
        if self.common.timing {
            report.wall_clock_seconds = Some(self.started.elapsed().as_secs_f64());
        }
        let mut w = self.sink()?;
        match self.common.format.unwrap_or(Format::Json) {
            Format::Json => writeln!(w, "{}", report.to_json())?,
            Format::Csv => {
                writeln!(w, "name,value,se")?;
                for s in &report.statistics {
                    let se = s.se.map(|v| v.to_string()).unwrap_or_default();
                    writeln!(w, "\"{}\",{},{}", s.name, s.value, se)?;
                }
            }
        }
        w.flush()?;
        for c in &report.criteria {
            eprintln!("[{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.description);
        }
        if report.pass {
            Ok(())
        } else {
            Err(Failure::Criteria)
        }
    }

    fn emit_batch(&self, batch: &GaussianPathBatch) -> Outcome {
        if self.common.format == Some(Format::Csv) {
            let mut w = self.sink()?;
            batch.write_csv(&mut w)?;
            w.flush()?;
            return Ok(());
        }
        self.emit(check_gaussian_batch(batch)?)
    }

    fn csv_only(&self) -> Outcome {
        match self.common.format {
            Some(Format::Json) => Err(Failure::Usage("figure output is CSV only".into())),
            _ => Ok(()),
        }
    }
}

fn table(limit: u64) -> Result<SieveTable, Failure> {
    let cap = sieve_cap_from_env()?;
    Ok(SieveTable::build_with_cap(limit.max(2), cap)?)
}

fn run(cmd: &Command, ctx: &Ctx<'_>) -> Outcome {
    let seed = ctx.common.seed;
    let dry = ctx.common.dry_run;
    match cmd {
        &Command::Clt { n, theta, replicas, variance_tol } => {
            let p = CltParams { n, theta, replicas, seed, variance_tol };
            if dry {
                return ctx.dry_run("clt", serde_json::to_value(&p).expect("json"));
            }
            ctx.emit(run_clt(&p, &table(n)?)?)
        }
        Command::Fclt { n, theta, grid, replicas, covariance_tol } => {
            let p = FcltParams {
                n: *n,
                theta: *theta,
                grid: grid.resolve(&FcltParams::default().grid),
                replicas: *replicas,
                seed,
                covariance_tol: *covariance_tol,
            };
            if dry {
                return ctx.dry_run("fclt", serde_json::to_value(&p).expect("json"));
            }
            ctx.emit(run_fclt(&p, &table(*n)?)?)
        }
        Command::Slln { n_max, theta, checkpoints, trajectories, tol, control_tol } => {
            let p = SllnParams {
                n_max: *n_max,
                theta: *theta,
                checkpoints: checkpoints.clone(),
                trajectories: *trajectories,
                seed,
                tol: *tol,
                control_tol: *control_tol,
            };
            if dry {
                return ctx.dry_run("slln", serde_json::to_value(&p).expect("json"));
            }
            ctx.emit(run_slln(&p, &table(*n_max)?)?)
        }
        Command::PoissonSparse(a) | Command::PoissonDense(a) => {
            let (name, regime, lambda) = match cmd {
                Command::PoissonSparse(_) => ("poisson-sparse", PoissonRegime::Sparse, 2.0),
                _ => ("poisson-dense", PoissonRegime::Dense, 1.0),
            };
            let mut p = PoissonRegimeParams::new(a.lambda.unwrap_or(lambda), a.n, regime);
            p.multiplier = a.multiplier;
            let theta = p.theta()?;
            if dry {
                return ctx.dry_run(
                    name,
                    json!({ "regime": p, "theta": theta, "replicas": a.replicas }),
                );
            }
            let t = table(a.n)?;
            let report = match regime {
                PoissonRegime::Sparse => run_poisson_sparse(&p, a.replicas, seed, &t)?,
                PoissonRegime::Dense => run_poisson_dense(&p, a.replicas, seed, &t)?,
            };
            ctx.emit(report)
        }
        &Command::GcdLimit { n, replicas, cutoff } => {
            let p = GcdParams { n, replicas, seed, cutoff: cutoff.unwrap_or(n) };
            if dry {
                return ctx.dry_run("gcd-limit", serde_json::to_value(&p).expect("json"));
            }
            ctx.emit(run_gcd_limit(&p, &table(n.max(p.cutoff))?)?)
        }
        Command::GpSeries { theta, grid, replicas, i_max, k_max, tail } => {
            let th = ThetaParams::new(*theta)?;
            let grid = grid.resolve(&[0.2, 0.4, 0.6, 0.8, 1.0]);
            let mut config = SeriesConfig::with_tail(th, &grid, seed, *tail)?;
            if let Some(i) = i_max {
                config.i_max = *i;
            }
            if let Some(k) = k_max {
                config.k_max = *k;
            } else if config.k_max <= config.i_max {
                config.k_max = config.i_max + 1;
            }
            config.validate()?;
            if dry {
                return ctx.dry_run(
                    "gp-series",
                    json!({
                        "config": config,
                        "replicas": replicas,
                        "tail_bound": config.tail_bound(),
                        "points_per_replica": config.point_count(),
                    }),
                );
            }
            ctx.emit_batch(&simulate_series(&config, *replicas)?)
        }
        Command::GpCholesky { theta, grid, replicas } => {
            let th = ThetaParams::new(*theta)?;
            let grid = grid.resolve(&[0.2, 0.4, 0.6, 0.8, 1.0]);
            if dry {
                return ctx.dry_run(
                    "gp-cholesky",
                    json!({ "theta": th, "grid": grid, "replicas": replicas }),
                );
            }
            ctx.emit_batch(&simulate_cholesky(th, &grid, *replicas, seed)?)
        }
        Command::Lemmas => {
            if dry {
                return ctx.dry_run("lemmas", json!({ "table_limit": LEMMA_TABLE_LIMIT }));
            }
            ctx.emit(run_lemma_checks(&table(LEMMA_TABLE_LIMIT)?, seed)?)
        }
        &Command::Mean { n, theta } => {
            if dry {
                return ctx.dry_run("mean", json!({ "n": n, "theta": theta }));
            }
            mean(ctx, n, theta)
        }
        &Command::FigureG { points } => {
            ctx.csv_only()?;
            if dry {
                return ctx.dry_run("figure-g", json!({ "points": points }));
            }
            if points == 0 {
                return Err(Failure::Usage("--points must be positive".into()));
            }
            let mut w = ctx.sink()?;
            writeln!(w, "theta,g")?;
            for i in 1..=points {
                let theta = i as f64 / (points + 1) as f64;
                writeln!(w, "{theta},{}", g_func(1.0 - theta, GMode::Closed)?)?;
            }
            w.flush()?;
            Ok(())
        }
        &Command::FigurePaths { theta, paths, steps, method } => {
            ctx.csv_only()?;
            let th = ThetaParams::new(theta)?;
            if steps == 0 || paths == 0 {
                return Err(Failure::Usage("--steps and --paths must be positive".into()));
            }
            let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
            if dry {
                return ctx.dry_run(
                    "figure-paths",
                    json!({ "theta": theta, "paths": paths, "steps": steps, "method": format!("{method:?}").to_lowercase() }),
                );
            }
            let batch = match method {
                Method::Series => {
                    let config = SeriesConfig::with_tail(th, &grid, seed, DEFAULT_SERIES_TAIL)?;
                    simulate_series(&config, paths)?
                }
                Method::Cholesky => simulate_cholesky(th, &grid, paths, seed)?,
            };
            let mut w = ctx.sink()?;
            batch.write_long_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn mean(ctx: &Ctx<'_>, n: u64, theta: f64) -> Outcome {
    let (value, shifted, enumerated) = if theta == 1.0 {
        let t = table(n)?;
        let psi = t.chebyshev_psi(n as f64)?;
        (psi, psi, None)
    } else {
        let th = ThetaParams::new(theta)?;
        let t = table(n)?;
        let value = mean_log_lcm(n, th, &t)?;
        let shifted = mean_log_lcm_psi_weighted(n, th, &t, PsiWeighting::Shifted)?;
        let enumerated = if n <= MAX_ENUMERATION_N {
            Some(enumerate_exact_mean(n, theta)?)
        } else {
            None
        };
        (value, shifted, enumerated)
    };
    let mut w = ctx.sink()?;
    match ctx.common.format {
        Some(Format::Json) => {
            let out = json!({
                "n": n,
                "theta": theta,
                "mean": value,
                "psi_weighted": shifted,
                "enumeration": enumerated,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&out).expect("json"))?;
        }
        Some(Format::Csv) => {
            writeln!(w, "n,theta,mean")?;
            writeln!(w, "{n},{theta},{value}")?;
        }
        None => writeln!(w, "{value:.6}")?,
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        common: &cli.common,
        started: Instant::now(),
    };
    let result = match cli.common.workers {
        Some(0) => Err(Failure::Usage("--workers must be positive".into())),
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| run(&cli.command, &ctx)),
            Err(e) => Err(Failure::Resource(e.to_string())),
        },
        None => run(&cli.command, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criteria) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Resource(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
