//! `rdsjump`: seed-stamped experiment runs emitting CSV and a JSON manifest.

mod commands;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rdsjump_core::{Builtin, ReactionNetwork};

#[derive(Parser)]
#[command(name = "rdsjump", version, about = "Reaction jump processes driven by common noise")]
struct Cli {
    /// Worker threads for seed sweeps (0 = one per core).
    #[arg(long, global = true, env = "RDSJUMP_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct NetArgs {
    /// Builtin network (`birth_death`, `schloegl`) or path to a JSON definition.
    #[arg(long, default_value = "birth_death")]
    pub net: String,

    /// Comma-separated rate constants for a builtin network.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
}

impl NetArgs {
    pub fn load(&self) -> Result<ReactionNetwork> {
        if let Ok(b) = self.net.parse::<Builtin>() {
            let rates = self.rates.as_deref().unwrap_or(b.default_rates());
            return Ok(ReactionNetwork::builtin(b, rates)?);
        }
        if self.rates.is_some() {
            bail!("--rates applies to builtin networks only; put rates in the definition file");
        }
        let path = PathBuf::from(&self.net);
        ReactionNetwork::from_json_file(&path).with_context(|| format!("loading network {}", path.display()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Which {
    One,
    TwoDiag,
    TwoOff,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Rule {
    Bracketed,
    Window,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Model {
    BirthDeath,
    Schloegl,
}

impl Model {
    pub fn builtin(self) -> Builtin {
        match self {
            Model::BirthDeath => Builtin::BirthDeath,
            Model::Schloegl => Builtin::Schloegl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

#[derive(Subcommand)]
enum Command {
    /// One realization of the augmented chain: n, T_n, X_n.
    Simulate {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial state, one count per species.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        x0: Vec<u64>,
        /// Number of jumps.
        #[arg(long, conflicts_with = "t_end")]
        steps: Option<u64>,
        /// Time horizon instead of a jump count.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-point motion driven by one noise realization.
    Twopoint {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        x0: u64,
        #[arg(long)]
        y0: u64,
        #[arg(long, default_value_t = 1000)]
        n_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synchronization frequencies over seeds `seed..seed+seeds`.
    SyncSweep {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        /// File with one `x0,y0` pair per line, or an inline list like `0:2,5:10`.
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        n_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationary distribution of the one- or two-point chain.
    Stationary {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 200)]
        nmax: u64,
        #[arg(long, value_enum, default_value = "one")]
        which: Which,
        #[arg(long, default_value_t = rdsjump_core::stationary::DEFAULT_STATIONARY_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial sums of the stationary product series.
    Zeta {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 200)]
        xmax: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pullback attractor fibers `{a0, a1}` for a range of seeds.
    Attractor {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        pullback: PullbackArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Also verify the period-two orbit relation over this many shifts per seed.
        #[arg(long, default_value_t = 0)]
        orbit_shifts: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean sample measure over seeds, compared with the one-point stationary law.
    SampleMeasure {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        pullback: PullbackArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        /// Truncation of the reference stationary distribution.
        #[arg(long, default_value_t = 200)]
        reference_nmax: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deterministic reference computations.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Data files behind one of the reference figures.
    Report {
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
pub struct PullbackArgs {
    /// Largest pullback depth.
    #[arg(long, default_value_t = rdsjump_core::attractor::DEFAULT_PULLBACK_DEPTH)]
    pub n_max: u64,
    /// Consecutive depths that must agree.
    #[arg(long, default_value_t = rdsjump_core::attractor::DEFAULT_WINDOW)]
    pub window: u64,
    #[arg(long, value_enum, default_value = "bracketed")]
    pub rule: Rule,
    /// Upper bracketing start for the bracketed rule (default: from the stationary tail).
    #[arg(long)]
    pub ceiling: Option<u64>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Two-term linear recursion: unbounded growth for p0 > 0, identically zero for p0 = 0.
    Lemma {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        d: i64,
        #[arg(long)]
        p0: f64,
        #[arg(long, default_value_t = 30)]
        xmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reaction rate equation integrated with RK4.
    Rre {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long)]
        c0: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equilibria of the reaction rate equation with their stability.
    Equilibria {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    use commands::*;
    match cli.command {
        Command::Simulate { net, seed, x0, steps, t_end, out } => {
            simulate(argv, &net, seed, x0, steps, t_end, out.as_deref())
        }
        Command::Twopoint { net, seed, x0, y0, n_max, out } => twopoint(argv, &net, seed, x0, y0, n_max, out.as_deref()),
        Command::SyncSweep { net, seed, seeds, pairs, n_max, out } => {
            sync_sweep(argv, &net, seed, seeds, pairs.as_deref(), n_max, out.as_deref())
        }
        Command::Stationary { net, nmax, which, tol, out } => stationary(argv, &net, nmax, which, tol, out.as_deref()),
        Command::Zeta { net, xmax, out } => zeta(argv, &net, xmax, out.as_deref()),
        Command::Attractor { net, pullback, seed, seeds, orbit_shifts, out } => {
            attractor(argv, &net, &pullback, seed, seeds, orbit_shifts, out.as_deref())
        }
        Command::SampleMeasure { net, pullback, seed, seeds, reference_nmax, out } => {
            sample_measure(argv, &net, &pullback, seed, seeds, reference_nmax, out.as_deref())
        }
        Command::Oracle { which } => match which {
            OracleCommand::Lemma { alpha, d, p0, xmax, out } => lemma(argv, alpha, d, p0, xmax, out.as_deref()),
            OracleCommand::Rre { model, rates, c0, t_end, dt, out } => {
                rre(argv, model.builtin(), rates, c0, t_end, dt, out.as_deref())
            }
            OracleCommand::Equilibria { model, rates, out } => equilibria(argv, model.builtin(), rates, out.as_deref()),
        },
        Command::Report { experiment, seed, out_dir } => report::run(argv, experiment, seed, &out_dir),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(cli, argv)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
