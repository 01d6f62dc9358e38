use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qsdfv::experiment::{
    compare, read_csv, run, write_csv, write_deltas, ChainSource, ExperimentConfig, Mode, QsdMethod,
};
use qsdfv::Result;

/// Quasi-stationary distributions and Fleming-Viot particle experiments.
#[derive(Parser)]
#[command(name = "qsdfv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the QSD.
    SolveQsd(RunArgs),
    /// Integrate the survival-conditioned law up to --t.
    Evolve(RunArgs),
    /// Estimate the particle profile at --t over independent replicas.
    Simulate(RunArgs),
    /// Time-average one long particle trajectory.
    Stationary(RunArgs),
    /// Draw exact stationary samples by coupling from the past.
    PerfectSample(RunArgs),
    /// Check type, covariance and coupling bounds; exit status 2 on violation.
    VerifyBounds(RunArgs),
    /// Profile error against the conditioned law across --N.
    Sweep(RunArgs),
    /// Join two reports on (state, N, t) and list their differences.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Power,
    Yaglom,
}

#[derive(Args)]
struct RunArgs {
    /// Chain spec (JSON).
    #[arg(long, conflicts_with = "builder", required_unless_present = "builder")]
    chain: Option<PathBuf>,
    /// Built-in chain: two_state_example, symmetric_two_state, single_state, asymmetric_walk.
    #[arg(long)]
    builder: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "L")]
    l: Option<usize>,
    /// Absorption rate for symmetric_two_state and single_state.
    #[arg(long)]
    c: Option<f64>,
    /// Particle counts, comma separated.
    #[arg(long = "N", value_delimiter = ',', default_value = "100")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "burn-in", default_value_t = 10.0)]
    burn_in: f64,
    #[arg(long, default_value_t = 1e4)]
    horizon: f64,
    /// Initial state label (default: the first state).
    #[arg(long)]
    start: Option<String>,
    #[arg(long, value_enum, default_value = "power")]
    method: Method,
    /// ODE step for evolve.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Largest tracked type for verify-bounds.
    #[arg(long = "k-max", default_value_t = 5)]
    k_max: u32,
    /// Repetitions per N for sweep.
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Batch count for stationary standard errors.
    #[arg(long, default_value_t = qsdfv::fv::DEFAULT_BATCHES)]
    batches: usize,
}

impl RunArgs {
    fn config(self, mode: Mode) -> (ExperimentConfig, Option<PathBuf>) {
        let chain = match (self.chain, self.builder) {
            (Some(path), _) => ChainSource::Spec(path),
            (None, Some(name)) => ChainSource::Builder {
                name,
                p: self.p,
                l: self.l,
                c: self.c,
            },
            (None, None) => unreachable!("clap requires --chain or --builder"),
        };
        let mut cfg = ExperimentConfig::new(chain, mode, self.seed);
        cfg.n_list = self.n;
        cfg.t = self.t;
        cfg.replicas = self.replicas;
        cfg.tol = self.tol;
        cfg.burn_in = self.burn_in;
        cfg.horizon = self.horizon;
        cfg.start = self.start;
        cfg.method = match self.method {
            Method::Power => QsdMethod::Power,
            Method::Yaglom => QsdMethod::Yaglom,
        };
        cfg.step = self.step;
        cfg.k_max = self.k_max;
        cfg.repetitions = self.repetitions;
        cfg.batches = self.batches;
        (cfg, self.out)
    }
}

fn sink(out: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn configure_threads() {
    if let Some(n) = std::env::var("QSDFV_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if the pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Returns whether a bound or comparison was violated.
fn execute(cli: Cli) -> Result<bool> {
    let (args, mode) = match cli.command {
        Command::Compare { a, b, tol, out } => {
            let ra = read_csv(File::open(a)?)?;
            let rb = read_csv(File::open(b)?)?;
            let deltas = compare(&ra, &rb, tol)?;
            write_deltas(&deltas, sink(out)?)?;
            return Ok(deltas.iter().any(|d| d.flagged));
        }
        Command::SolveQsd(a) => (a, Mode::SolveQsd),
        Command::Evolve(a) => (a, Mode::Evolve),
        Command::Simulate(a) => (a, Mode::Simulate),
        Command::Stationary(a) => (a, Mode::Stationary),
        Command::PerfectSample(a) => (a, Mode::PerfectSample),
        Command::VerifyBounds(a) => (a, Mode::VerifyBounds),
        Command::Sweep(a) => (a, Mode::Sweep),
    };
    let (cfg, out) = args.config(mode);
    let result = run(&cfg)?;
    write_csv(&result.rows, sink(out)?)?;
    for v in &result.violations {
        eprintln!("bound violated: {v}");
    }
    Ok(!result.violations.is_empty())
}

fn main() -> ExitCode {
    // Status 2 is reserved for violated bounds, so usage errors exit with 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    match execute(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
