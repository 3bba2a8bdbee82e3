use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod commands;
mod config;
mod output;

use commands::{GenSpectrumArgs, Lambda2Args, LocalizeArgs, RankBoundArgs, SffArgs, StabilityArgs, SwArgs};

#[derive(Parser, Debug)]
#[command(name = "twolocal", version, about = "Ensemble sweeps for spectral 2-localization")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
pub struct Global {
    /// Base seed; realization i uses the stream derived from (seed, i).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON file with default values for any flag; flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample target spectra.
    GenSpectrum(GenSpectrumArgs),
    /// Localize GOE targets over a range of sizes.
    Localize(LocalizeArgs),
    /// Iterated Schrieffer-Wolff rotation of one Hamiltonian.
    Sw(SwArgs),
    /// Metric spectrum and eigenoperators of a stored localization result.
    Stability(StabilityArgs),
    /// Spectral form factor of stored or freshly sampled spectra.
    Sff(SffArgs),
    /// Diagonal-approximation lambda_2 over Ising minima.
    Lambda2(Lambda2Args),
    /// Projector rank lower bound for a basis.
    RankBound(RankBoundArgs),
}

/// Some realizations failed; their errors are in the output directory.
#[derive(Debug)]
pub struct PartialFailure {
    pub failed: usize,
    pub total: usize,
}

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} runs failed", self.failed, self.total)
    }
}

impl std::error::Error for PartialFailure {}

fn run(cli: Cli) -> Result<()> {
    let file = config::load(cli.global.config.as_deref())?;
    let (global, global_echo) = config::merge(&cli.global, &file)?;
    if let Some(jobs) = global.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    let ctx = commands::Context {
        seed: global.seed.unwrap_or(0),
        out: global.out.clone().unwrap_or_else(|| PathBuf::from("twolocal-out")),
        file,
        global_echo,
    };
    match cli.command {
        Command::GenSpectrum(a) => commands::gen_spectrum(&ctx, a),
        Command::Localize(a) => commands::localize(&ctx, a),
        Command::Sw(a) => commands::sw(&ctx, a),
        Command::Stability(a) => commands::stability(&ctx, a),
        Command::Sff(a) => commands::sff(&ctx, a),
        Command::Lambda2(a) => commands::lambda2(&ctx, a),
        Command::RankBound(a) => commands::rank_bound(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<PartialFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
