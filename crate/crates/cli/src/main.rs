//! `farfield`: batch front-end for enhancement, simulation, scoring, ROVER
//! and the fusion demo.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure. The log level comes from `FARFIELD_LOG`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::score::ScoreMode;
use config::PipelineConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "farfield",
    version,
    about = "Far-field multi-speaker speech toolkit"
)]
struct Cli {
    /// Pipeline configuration (TOML); unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// WPE + GSS enhancement of every diarized segment in a manifest.
    Enhance { manifest: PathBuf },
    /// Simulated meeting from a mixture plan and a room description.
    Simulate { plan: PathBuf, room: PathBuf },
    /// cpCER over transcript files or DER over RTTM files.
    Score {
        #[arg(long, value_enum)]
        mode: ScoreMode,
        reference: PathBuf,
        hypothesis: PathBuf,
    },
    /// ROVER fusion of hypothesis files.
    Rover {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Forward pass of the audio-visual fusion model on FTOY features.
    FuseDemo {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        video: PathBuf,
        /// Parameter bundle; drawn from the seed when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Comma-separated label ids for the CTC loss.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<usize>>,
    },
}

fn require_out(out: &Option<PathBuf>, verb: &str) -> CliResult<PathBuf> {
    out.clone()
        .ok_or_else(|| CliError::Usage(format!("{verb} needs --out <DIR>")))
}

fn run(cli: Cli) -> CliResult<u8> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let cfg = PipelineConfig::load(cli.config.as_deref(), cli.seed)?;
    match &cli.command {
        Command::Enhance { manifest } => {
            let out = require_out(&cli.out, "enhance")?;
            commands::enhance::run(manifest, &cfg, &out)
        }
        Command::Simulate { plan, room } => {
            let out = require_out(&cli.out, "simulate")?;
            commands::simulate::run(plan, room, &cfg, &out).map(|_| 0)
        }
        Command::Score {
            mode,
            reference,
            hypothesis,
        } => commands::score::run(*mode, reference, hypothesis, &cfg).map(|_| 0),
        Command::Rover { files } => {
            commands::rover::run(files, &cfg, cli.out.as_deref()).map(|_| 0)
        }
        Command::FuseDemo {
            audio,
            video,
            params,
            labels,
        } => {
            let args = commands::fuse::FuseArgs {
                audio,
                video,
                params: params.as_deref(),
                labels: labels.as_deref(),
            };
            commands::fuse::run(&args, &cfg, cli.out.as_deref()).map(|_| 0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FARFIELD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
