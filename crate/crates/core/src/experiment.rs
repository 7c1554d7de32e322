//! Seeded Monte Carlo sweeps: simulate many replicas of a chain at several
//! trajectory lengths, run an estimator on each and aggregate the relative
//! errors against the exact gap.
//!
//! Replica `r` at every length uses seed `base_seed + r`. Replicas run on a
//! rayon pool (capped by `GAPESTIM_THREADS`) and are reduced in replica
//! order, so reports are identical across runs and thread counts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{self, MarkovChain};
use crate::doubling::{self, DoublingConfig, SampleSizeParams};
use crate::error::{Error, Result};
use crate::hks::{self, HksParams};
use crate::trajectory::{self, Start};

pub const SPEC_VERSION: u32 = 1;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "GAPESTIM_THREADS";

/// Column header of the report CSV.
pub const CSV_HEADER: &str =
    "chain,estimator,t,replicas,failed,success_rate,median_rel_error,p90_rel_error,mean_skip,gamma,pi_star,t0,t1";

/// A chain family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ChainSpec {
    TwoState { p: f64, q: f64 },
    LazyCycle { n: usize },
    Complete { n: usize },
    RandomReversible { n: usize, seed: u64, laziness: f64 },
    File { path: PathBuf },
}

impl ChainSpec {
    pub fn build(&self) -> Result<MarkovChain> {
        match self {
            ChainSpec::TwoState { p, q } => chain::make_two_state(*p, *q),
            ChainSpec::LazyCycle { n } => chain::make_lazy_cycle(*n),
            ChainSpec::Complete { n } => chain::make_complete_graph(*n),
            ChainSpec::RandomReversible { n, seed, laziness } => chain::make_random_reversible(*n, *seed, *laziness),
            ChainSpec::File { path } => MarkovChain::load(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Hks,
    Doubling,
}

impl Estimator {
    fn name(self) -> &'static str {
        match self {
            Estimator::Hks => "hks",
            Estimator::Doubling => "doubling",
        }
    }
}

/// A sweep description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub version: u32,
    pub chain: ChainSpec,
    /// Trajectory lengths (transitions), strictly ascending.
    pub lengths: Vec<usize>,
    pub replicas: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub estimator: Estimator,
    #[serde(default)]
    pub start: Start,
    /// Doubling settings; `epsilon` also sets the success criterion and
    /// `epsilon`, `delta` and `c` feed the oracle `t0` and `t1` columns.
    #[serde(default)]
    pub config: DoublingConfig,
    /// Path prefix for `<prefix>.csv` and `<prefix>.json`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SPEC_VERSION {
            return Err(Error::Validation(format!(
                "unsupported spec version {} (expected {SPEC_VERSION})",
                self.version
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be >= 1".into()));
        }
        if self.lengths.is_empty() {
            return Err(Error::InvalidParameter("lengths must not be empty".into()));
        }
        if self.lengths[0] == 0 || self.lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("lengths must be positive and strictly ascending".into()));
        }
        self.config.validate()
    }
}

/// What one replica produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub seed: u64,
    pub estimate: Option<f64>,
    pub rel_error: Option<f64>,
    pub skip: Option<u64>,
    pub terminated_normally: Option<bool>,
    pub error: Option<String>,
}

/// Aggregates for one trajectory length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: usize,
    pub replicas: usize,
    pub failed: usize,
    /// Fraction of all replicas with `|estimate / gamma - 1| < epsilon`.
    pub success_rate: f64,
    pub median_rel_error: f64,
    pub p90_rel_error: f64,
    pub mean_skip: f64,
    pub elapsed_ms: u128,
    pub outcomes: Vec<ReplicaOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub chain: String,
    pub estimator: Estimator,
    pub n: usize,
    pub gamma: f64,
    pub pi_star: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub t0: Option<u64>,
    pub t1: Option<u64>,
    pub rows: Vec<ReportRow>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "NaN".to_string()
    }
}

impl ExperimentReport {
    /// The CSV table; identical specs give byte-identical output.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&self.chain),
                self.estimator.name(),
                r.t,
                r.replicas,
                r.failed,
                fmt_float(r.success_rate),
                fmt_float(r.median_rel_error),
                fmt_float(r.p90_rel_error),
                fmt_float(r.mean_skip),
                fmt_float(self.gamma),
                fmt_float(self.pi_star),
                opt(self.t0),
                opt(self.t1),
            );
        }
        out
    }

    pub fn write_outputs(&self, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv = prefix.with_extension("csv");
        let json = prefix.with_extension("json");
        fs::write(&csv, self.to_csv())?;
        fs::write(&json, serde_json::to_string_pretty(self)?)?;
        Ok((csv, json))
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q.clamp(0.0, 1.0) * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        if threads == 0 {
            return Err(Error::InvalidParameter(format!("{THREADS_ENV} must be >= 1")));
        }
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))
}

fn run_replica(spec: &ExperimentSpec, c: &MarkovChain, gamma: f64, t: usize, replica: usize) -> ReplicaOutcome {
    let seed = spec.base_seed.wrapping_add(replica as u64);
    let mut outcome = ReplicaOutcome {
        replica,
        seed,
        estimate: None,
        rel_error: None,
        skip: None,
        terminated_normally: None,
        error: None,
    };
    let result = trajectory::simulate(c, t, seed, spec.start).and_then(|tr| match spec.estimator {
        Estimator::Hks => hks::estimate_gap(&tr, c.n()).map(|e| (e.gamma_hat, 1, true)),
        Estimator::Doubling => doubling::estimate_gamma(&tr, c.n(), &spec.config)
            .map(|r| (r.gamma_tilde.expect("estimate_gamma fills gamma_tilde"), r.a, r.terminated_normally)),
    });
    match result {
        Ok((est, a, normal)) => {
            outcome.estimate = Some(est);
            outcome.rel_error = Some((est / gamma - 1.0).abs());
            outcome.skip = Some(a);
            outcome.terminated_normally = Some(normal);
        }
        Err(e) => outcome.error = Some(format!("{}: {e}", e.kind())),
    }
    outcome
}

/// Runs every (length, replica) pair of the spec and aggregates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let c = spec.chain.build()?;
    let gamma = chain::exact_gap(&c)?.get();
    if gamma <= 0.0 {
        return Err(Error::Validation("chain has zero spectral gap".into()));
    }
    let cfg = &spec.config;
    let t0 = doubling::t0_steps(&SampleSizeParams {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        gamma,
        pi_star: c.pi_star(),
        n: c.n(),
        c: cfg.c,
    })
    .ok();
    let t1 = hks::t1_steps(&HksParams {
        c: cfg.c,
        delta: cfg.delta,
        n: c.n(),
        pi_star: c.pi_star(),
        gamma,
        epsilon: cfg.epsilon,
    })
    .ok();

    let pool = thread_pool()?;
    let mut rows = Vec::with_capacity(spec.lengths.len());
    for &t in &spec.lengths {
        let started = Instant::now();
        let mut outcomes: Vec<ReplicaOutcome> = pool.install(|| {
            (0..spec.replicas)
                .into_par_iter()
                .map(|r| run_replica(spec, &c, gamma, t, r))
                .collect()
        });
        outcomes.sort_by_key(|o| o.replica);
        rows.push(aggregate(t, outcomes, cfg.epsilon, started.elapsed().as_millis()));
    }

    Ok(ExperimentReport {
        chain: c.label().to_string(),
        estimator: spec.estimator,
        n: c.n(),
        gamma,
        pi_star: c.pi_star(),
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        c: cfg.c,
        t0,
        t1,
        rows,
    })
}

fn aggregate(t: usize, outcomes: Vec<ReplicaOutcome>, epsilon: f64, elapsed_ms: u128) -> ReportRow {
    let replicas = outcomes.len();
    let mut errors: Vec<f64> = outcomes.iter().filter_map(|o| o.rel_error).collect();
    errors.sort_by(f64::total_cmp);
    let failed = replicas - errors.len();
    let successes = errors.iter().filter(|&&e| e < epsilon).count();
    let skips: Vec<u64> = outcomes.iter().filter_map(|o| o.skip).collect();
    let mean_skip = if skips.is_empty() {
        f64::NAN
    } else {
        skips.iter().map(|&a| a as f64).sum::<f64>() / skips.len() as f64
    };
    ReportRow {
        t,
        replicas,
        failed,
        success_rate: successes as f64 / replicas as f64,
        median_rel_error: quantile(&errors, 0.5),
        p90_rel_error: quantile(&errors, 0.9),
        mean_skip,
        elapsed_ms,
        outcomes,
    }
}
