use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_rl::agents::AGENT_NAMES;
use hybrid_rl::env::ENV_NAMES;
use hybrid_rl::harness::{
    replay, resolve_out_dir, run_experiment, write_outputs, ExperimentConfig, OutputFormat, RunOptions,
};
use hybrid_rl::Error;

/// Hybrid offline/online RL experiments.
#[derive(Debug, Parser)]
#[command(name = "hybrid-rl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a TOML or JSON config (a path, or a name under ./configs).
    Run {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List registered environments.
    ListEnvs,
    /// List registered agents.
    ListAgents,
    /// Check a config without running it.
    Validate { config: String },
    /// Re-run the experiment recorded in a manifest and compare CSV hashes.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Output root; defaults to the config's output_dir, then $HYBRID_RL_OUT, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, default_value = "both")]
    format: OutputFormat,
}

fn locate(config: &str) -> PathBuf {
    let direct = PathBuf::from(config);
    if direct.exists() {
        return direct;
    }
    ["toml", "json"]
        .iter()
        .map(|ext| Path::new("configs").join(format!("{config}.{ext}")))
        .find(|p| p.exists())
        .unwrap_or(direct)
}

fn load(config: &str) -> Result<ExperimentConfig, Error> {
    let path = locate(config);
    if !path.exists() {
        return Err(Error::Config(format!("config `{config}` not found")));
    }
    ExperimentConfig::load(&path)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::ListEnvs => ENV_NAMES.iter().for_each(|n| println!("{n}")),
        Command::ListAgents => AGENT_NAMES.iter().for_each(|n| println!("{n}")),
        Command::Validate { config } => {
            let cfg = load(&config)?;
            cfg.resolve()?;
            println!("{}: ok", cfg.name);
        }
        Command::Run { config, overrides } => {
            let mut cfg = load(&config)?;
            if let Some(t) = overrides.trials {
                cfg.trials = t;
            }
            if let Some(s) = overrides.seed {
                cfg.base_seed = s;
            }
            let root = resolve_out_dir(overrides.out.as_deref(), cfg.output_dir.as_deref());
            let options = RunOptions {
                parallel: overrides.parallel,
                format: overrides.format,
            };
            log::info!("running {} with {} trials", cfg.name, cfg.trials);
            let output = run_experiment(&cfg, &options)?;
            let dir = write_outputs(&output, &root)?;
            println!(
                "{}: {} files in {} ({:.2}s)",
                cfg.name,
                output.files.len() + 1,
                dir.display(),
                output.manifest.total_seconds
            );
        }
        Command::Replay { manifest, parallel } => {
            let n = replay(&manifest, parallel)?;
            println!("replay ok: {n} CSV hashes match");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
