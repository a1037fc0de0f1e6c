use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chimps::harness::{self, ExperimentConfig, ExperimentKind, THREADS_ENV};
use chimps::Error;

/// Matrix product state simulation of random quantum circuits.
#[derive(Parser)]
#[command(name = "chimps", version, after_help = format!("Worker threads are taken from {THREADS_ENV} unless --deterministic is set."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brick-wall circuit on a chain, one run per chi.
    #[command(name = "run-1d")]
    Run1d(Flags),
    /// Grid circuit with grouped tensors; several --grouping values enable
    /// split-and-merge scheduling.
    #[command(name = "run-2d")]
    Run2d(Flags),
    /// Gaussian tensor ensemble estimate of the per-gate fidelity.
    RunGte(Flags),
    /// Truncated run next to the exact state vector.
    CompareExact(Flags),
    /// Draw bitstrings from a truncated state.
    Sample(Flags),
    /// Porter-Thomas distance and XEB of the exact state at every depth.
    PtTest(Flags),
    /// Fidelity and XEB decay under noisy two-qubit gates.
    XebNoise(Flags),
    /// Residual error per gate against chi.
    Sweep(Flags),
    /// Run whatever experiment a config file describes.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Flags {
    /// TOML config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short = 'n')]
    n: Option<usize>,
    /// Grid spec: sycamore54, 5x4 or column heights such as 5,4,5.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, short = 'D')]
    depth: Option<usize>,
    /// Bond dimension cap(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    chi: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Two-qubit gate: CZ, CX, iSWAP, iS_pi/6, ...
    #[arg(long)]
    gate: Option<String>,
    /// Grouping such as [4,2,2,4]; repeat for several.
    #[arg(long)]
    grouping: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    beta: Option<usize>,
    /// Number of consecutive circuit seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Per-gate fidelities for xeb-noise, comma separated.
    #[arg(long, value_delimiter = ',')]
    noise: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for the circuit, logs and tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow long runs and checkpoint the state after every cycle.
    #[arg(long)]
    extended: bool,
    /// Single-threaded execution.
    #[arg(long)]
    deterministic: bool,
}

fn kind_of(cmd: &Command) -> Option<(ExperimentKind, &Flags)> {
    let k = match cmd {
        Command::Run1d(f) => (ExperimentKind::Run1d, f),
        Command::Run2d(f) => (ExperimentKind::Run2d, f),
        Command::RunGte(f) => (ExperimentKind::RunGte, f),
        Command::CompareExact(f) => (ExperimentKind::CompareExact, f),
        Command::Sample(f) => (ExperimentKind::Sample, f),
        Command::PtTest(f) => (ExperimentKind::PtTest, f),
        Command::XebNoise(f) => (ExperimentKind::XebNoise, f),
        Command::Sweep(f) => (ExperimentKind::Sweep, f),
        Command::Run { .. } => return None,
    };
    Some(k)
}

fn build_config(kind: ExperimentKind, f: &Flags) -> chimps::Result<ExperimentConfig> {
    let mut cfg = match &f.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind != kind {
                return Err(Error::Config(format!(
                    "{} describes a {} experiment, not {}",
                    path.display(),
                    cfg.kind.name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => {
            let seed = f.seed.ok_or_else(|| Error::Config("--seed is required".into()))?;
            ExperimentConfig::new(kind, seed)
        }
    };
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if f.n.is_some() {
        cfg.n_qubits = f.n;
    }
    if f.grid.is_some() {
        cfg.grid = f.grid.clone();
    }
    if f.depth.is_some() {
        cfg.depth = f.depth;
    }
    if !f.chi.is_empty() {
        cfg.chi = f.chi.clone();
    }
    if let Some(g) = &f.gate {
        cfg.gate = g.clone();
    }
    if !f.grouping.is_empty() {
        cfg.grouping = f.grouping.clone();
    }
    if let Some(v) = f.trials {
        cfg.trials = v;
    }
    if let Some(v) = f.beta {
        cfg.beta = v;
    }
    if f.seeds.is_some() {
        cfg.seeds = f.seeds;
    }
    if !f.noise.is_empty() {
        cfg.noise = f.noise.clone();
    }
    if let Some(v) = f.samples {
        cfg.samples = v;
    }
    if f.out.is_some() {
        cfg.out = f.out.clone();
    }
    cfg.extended |= f.extended;
    cfg.deterministic |= f.deterministic;
    Ok(cfg)
}

fn execute(cli: Cli) -> chimps::Result<()> {
    let cfg = match &cli.command {
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if out.is_some() {
                cfg.out = out.clone();
            }
            cfg
        }
        cmd => {
            let (kind, flags) = kind_of(cmd).expect("experiment subcommand");
            build_config(kind, flags)?
        }
    };
    let artifacts = harness::run(&cfg)?;
    if let Some(summary) = artifacts.table("summary") {
        print!("{}", summary.to_text());
    }
    if let Some(dir) = &cfg.out {
        for path in artifacts.write(dir, &cfg)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => {
            eprintln!("chimps: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("chimps: {e}");
            ExitCode::FAILURE
        }
    }
}
