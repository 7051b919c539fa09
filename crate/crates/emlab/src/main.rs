//! `emlab` batch CLI: runs one configured experiment per invocation and
//! writes CSV/JSON artifacts plus a digest manifest.
//!
//! Exit codes: 0 on success, 1 on runtime failure (including failing
//! validate checks), 2 on an invalid config or invocation.

use clap::{Args, Parser, Subcommand};
use emlab::runner::{resolve_workers, run_with_manifest, with_worker_pool, Job};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "emlab",
    version,
    about = "Desk-scale experiments on purity decay and the limits of error mitigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (JSON, or TOML with a .toml extension).
    #[arg(long)]
    config: PathBuf,

    /// Output directory for artifacts (default: config `out`, then `.`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (default: EMLAB_WORKERS, then the CPU count).
    #[arg(long)]
    workers: Option<usize>,

    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Purity decay sweep over an (n, depth) grid.
    Decay(CommonArgs),
    /// Amplitude-damping decay of relative entropy to the mixed state.
    Nonunital(CommonArgs),
    /// Weak error mitigation with shot-cost accounting.
    Mitigate(CommonArgs),
    /// Fano copy-count chart driven by a purity decay sweep.
    Bounds(CommonArgs),
    /// Sampling-vs-statistical-query parity contrast.
    Parity(CommonArgs),
    /// Oracle-equivalence suite with a pass/fail table.
    Validate(CommonArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Decay(a) => ("decay", a),
            Command::Nonunital(a) => ("nonunital", a),
            Command::Mitigate(a) => ("mitigate", a),
            Command::Bounds(a) => ("bounds", a),
            Command::Parity(a) => ("parity", a),
            Command::Validate(a) => ("validate", a),
        }
    }
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (subcommand, args) = cli.command.split();

    // Phase 1: anything wrong with the invocation or config exits 2.
    let mut job = match Job::load(subcommand, &args.config) {
        Ok(job) => job,
        Err(e) => {
            eprintln!("emlab: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        job.override_seed(seed);
    }
    let workers = match resolve_workers(args.workers) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("emlab: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out_dir = job.out_dir(args.out.as_deref());

    // Phase 2: runtime failures exit 1.
    match with_worker_pool(workers, || run_with_manifest(&job, &out_dir)) {
        Ok(artifacts) => {
            for line in &artifacts.lines {
                println!("{line}");
            }
            if artifacts.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(e) => {
            eprintln!("emlab: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
