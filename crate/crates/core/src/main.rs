use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rftrack::error::{Error, Result};
use rftrack::tracker::{run_episode, EpisodeConfig, Method, Profile, RunOptions};

#[derive(Parser)]
#[command(name = "rftrack", version, about = "Echo-conditioned diffusion tracker for multi-target RF sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one tracking episode and write its outputs.
    Run {
        /// JSON overlay applied on top of the selected profile.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Base profile: desk or paper.
        #[arg(long, default_value = "desk")]
        profile: String,
        /// Comma-separated subset of ddpm,music,esprit,cnn,kf.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Save a checkpoint every N blocks (0 disables).
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            profile,
            methods,
            checkpoint_every,
            resume,
        } => {
            let profile: Profile = profile.parse()?;
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = EpisodeConfig::from_json_over(&EpisodeConfig::profile(profile), &text)?;
            let methods = methods
                .map(|ms| ms.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>>>())
                .transpose()?;
            let opts = RunOptions {
                methods,
                checkpoint_every,
                resume,
            };
            let summary = run_episode(cfg, seed, &out, &opts)?;
            for m in &summary.methods {
                println!(
                    "{:<7} inference angle RSSE {:.4} rad, distance RSSE {:.3} m",
                    m.method.to_string(),
                    m.infer_angle,
                    m.infer_dist
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
