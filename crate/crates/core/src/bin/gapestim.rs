use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gapestim::chain::{self, MarkovChain};
use gapestim::doubling::{self, DoublingConfig, SampleSizeParams};
use gapestim::experiment::{self, ChainSpec, ExperimentSpec};
use gapestim::hks::{self, HksParams};
use gapestim::selfcheck;
use gapestim::trajectory::{self, Start, Trajectory};
use gapestim::Error;

#[derive(Parser)]
#[command(name = "gapestim", version, about = "Estimate the spectral gap of a reversible Markov chain from one trajectory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it in the text format.
    Simulate {
        #[command(flatten)]
        chain: ChainArgs,
        /// Number of transitions.
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `stationary` or a state index.
        #[arg(long, default_value = "stationary")]
        start: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plug-in gap estimate of a trajectory file.
    Estimate {
        #[arg(long)]
        traj: PathBuf,
        /// State count; defaults to the trajectory header.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Doubling estimate of a trajectory file. Pass a chain to also check
    /// the sample-size guarantee.
    Doubling {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        chain: OptionalChainArgs,
    },
    /// Exact gap, stationary law and sample-size thresholds of a chain.
    Oracle {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a Monte Carlo sweep described by a JSON spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Output prefix; overrides the spec's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the deterministic identity and inequality suites.
    Selfcheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    TwoState,
    LazyCycle,
    Complete,
    RandomReversible,
    File,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[command(flatten)]
    params: ChainParams,
}

#[derive(Args)]
struct OptionalChainArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[command(flatten)]
    params: ChainParams,
}

#[derive(Args)]
struct ChainParams {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// State count for the lazy-cycle, complete and random-reversible families.
    #[arg(long = "states")]
    states: Option<usize>,
    /// Seed for the random-reversible family.
    #[arg(long)]
    chain_seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    laziness: f64,
    /// JSON chain file for `--family file`.
    #[arg(long)]
    chain_file: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Absolute constant of the error bound.
    #[arg(long = "c", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.31)]
    threshold: f64,
    #[arg(long, default_value_t = 100)]
    min_skipped_length: usize,
    #[arg(long)]
    max_k: Option<u32>,
}

impl ConfigArgs {
    fn config(&self) -> DoublingConfig {
        DoublingConfig {
            threshold_stop: self.threshold,
            epsilon: self.epsilon,
            delta: self.delta,
            c: self.c,
            max_k: self.max_k,
            min_skipped_length: self.min_skipped_length,
            ..DoublingConfig::default()
        }
    }
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn missing(flag: &str, family: &str) -> CliError {
    CliError::Usage(format!("--{flag} is required for --family {family}"))
}

impl ChainParams {
    fn spec(&self, family: Family) -> CliResult<ChainSpec> {
        Ok(match family {
            Family::TwoState => ChainSpec::TwoState {
                p: self.p.ok_or_else(|| missing("p", "two-state"))?,
                q: self.q.ok_or_else(|| missing("q", "two-state"))?,
            },
            Family::LazyCycle => ChainSpec::LazyCycle { n: self.states.ok_or_else(|| missing("states", "lazy-cycle"))? },
            Family::Complete => ChainSpec::Complete { n: self.states.ok_or_else(|| missing("states", "complete"))? },
            Family::RandomReversible => ChainSpec::RandomReversible {
                n: self.states.ok_or_else(|| missing("states", "random-reversible"))?,
                seed: self.chain_seed.unwrap_or(0),
                laziness: self.laziness,
            },
            Family::File => ChainSpec::File { path: self.chain_file.clone().ok_or_else(|| missing("chain-file", "file"))? },
        })
    }
}

fn state_count(tr: &Trajectory, n: Option<usize>) -> CliResult<usize> {
    n.or(tr.n)
        .ok_or_else(|| CliError::Usage("state count unknown: pass --n or use a trajectory with an n= header".into()))
}

fn oracle_json(c: &MarkovChain, cfg: &DoublingConfig) -> CliResult<Value> {
    let gamma = chain::exact_gap(c)?.get();
    let sample = SampleSizeParams {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        gamma,
        pi_star: c.pi_star(),
        n: c.n(),
        c: cfg.c,
    };
    let hks_params = HksParams { c: cfg.c, delta: cfg.delta, n: c.n(), pi_star: c.pi_star(), gamma, epsilon: cfg.epsilon };
    let (t0, k_gamma, delta_gamma) = if gamma > 0.0 {
        (
            Some(doubling::t0_steps(&sample)?),
            Some(doubling::k_gamma(gamma)?),
            Some(doubling::delta_split(cfg.delta, gamma)?),
        )
    } else {
        (None, None, None)
    };
    let t1 = if gamma > 0.0 { Some(hks::t1_steps(&hks_params)?) } else { None };
    Ok(json!({
        "chain": c.label(),
        "n": c.n(),
        "gamma": gamma,
        "pi": c.pi(),
        "pi_star": c.pi_star(),
        "spectrum": c.symmetrized_spectrum()?,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "C": cfg.c,
        "C0": doubling::C0_FACTOR * cfg.c,
        "t0": t0,
        "t1": t1,
        "k_gamma": k_gamma,
        "delta_gamma": delta_gamma,
    }))
}

fn print_json(v: &Value) {
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(io::stdout(), "{}", serde_json::to_string_pretty(v).expect("values serialize"));
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Simulate { chain, t, seed, start, out } => {
            let c = chain.params.spec(chain.family)?.build()?;
            let start: Start = start.parse()?;
            let tr = trajectory::simulate(&c, t, seed, start)?;
            tr.save(&out)?;
            print_json(&json!({
                "path": out,
                "chain": c.label(),
                "n": c.n(),
                "t": tr.steps(),
                "seed": seed,
                "start": start.to_string(),
            }));
        }
        Command::Estimate { traj, n } => {
            let tr = Trajectory::load(&traj)?;
            let n = state_count(&tr, n)?;
            let est = hks::estimate_gap(&tr, n)?;
            print_json(&serde_json::to_value(est).map_err(Error::from)?);
        }
        Command::Doubling { traj, n, cfg, chain } => {
            let tr = Trajectory::load(&traj)?;
            let n = state_count(&tr, n)?;
            let cfg = cfg.config();
            let res = doubling::estimate_gamma(&tr, n, &cfg)?;
            let mut out = serde_json::to_value(&res).map_err(Error::from)?;
            if let Some(family) = chain.family {
                let c = chain.params.spec(family)?.build()?;
                if c.n() != n {
                    return Err(Error::Validation(format!("chain has {} states, trajectory uses n={n}", c.n())).into());
                }
                let gamma = chain::exact_gap(&c)?.get();
                let check = doubling::guarantee_check(&cfg, gamma, c.pi_star(), n, tr.steps() as u64)?;
                out["guarantee"] = serde_json::to_value(check).map_err(Error::from)?;
                out["gamma"] = json!(gamma);
            }
            print_json(&out);
        }
        Command::Oracle { chain, cfg } => {
            let c = chain.params.spec(chain.family)?.build()?;
            print_json(&oracle_json(&c, &cfg.config())?);
        }
        Command::Experiment { spec, out } => {
            let spec = ExperimentSpec::load(&spec)?;
            let report = experiment::run_experiment(&spec)?;
            let prefix = out.or(spec.output.clone()).unwrap_or_else(|| PathBuf::from("experiment"));
            let (csv, json_path) = report.write_outputs(&prefix)?;
            print!("{}", report.to_csv());
            eprintln!("wrote {} and {}", csv.display(), json_path.display());
        }
        Command::Selfcheck => {
            let suites = selfcheck::run_all();
            let mut all = true;
            for s in &suites {
                let verdict = if s.passed() { "PASS" } else { "FAIL" };
                all &= s.passed();
                println!(
                    "{verdict}  {:<48} cells={:<8} violations={:<4} worst={:.6e}",
                    s.name, s.cells, s.violations, s.worst
                );
            }
            println!("{}", if all { "selfcheck: all suites PASS" } else { "selfcheck: FAILED" });
            return Ok(all);
        }
    }
    Ok(true)
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            report_error("UsageError", &msg);
            ExitCode::from(2)
        }
        Err(CliError::Lib(e)) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::from(if e.is_validation() { 3 } else { 1 })
        }
    }
}
