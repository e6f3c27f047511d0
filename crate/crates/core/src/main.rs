use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semloc::bench::{self, ModelKind, TrialConfig};

#[derive(Parser)]
#[command(name = "semloc", version, about = "Semantic vs geometric particle-filter localization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of trials with one measurement model.
    Run {
        /// JSON trial configuration; builtin defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Master seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both models on identical seeds and report the timing ratio.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map utilities.
    Map {
        #[command(subcommand)]
        command: MapCommand,
    },
}

#[derive(Subcommand)]
enum MapCommand {
    /// Write the builtin block world as a map file.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<PathBuf>, seed: Option<u64>) -> semloc::Result<TrialConfig> {
    let mut cfg = match path {
        Some(p) => TrialConfig::load(p)?,
        None => TrialConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> semloc::Result<()> {
    match cli.command {
        Command::Run {
            config,
            model,
            trials,
            seed,
            out,
        } => {
            let mut cfg = load_config(config, seed)?;
            if let Some(model) = model {
                cfg.model = model;
            }
            let report = bench::run_batch(&cfg, trials, Some(&out))?;
            println!(
                "{}: {} trials, mean final error {:.3} m, mean weight-update time {:.0} ns",
                report.model,
                report.trials.len(),
                report.mean_final_error,
                report.mean_weight_update_ns
            );
        }
        Command::Compare {
            config,
            trials,
            seed,
            out,
        } => {
            let cfg = load_config(config, seed)?;
            let cmp = bench::compare_models(&cfg, trials, Some(&out))?;
            println!("semantic mean weight-update time:  {:.0} ns", cmp.semantic.mean_weight_update_ns);
            println!("geometric mean weight-update time: {:.0} ns", cmp.geometric.mean_weight_update_ns);
            println!("ratio geometric/semantic: {:.3}", cmp.time_ratio);
        }
        Command::Map {
            command: MapCommand::Export { out },
        } => {
            let map = bench::build_block_world();
            std::fs::write(&out, map.to_json()).map_err(|e| semloc::Error::Io { path: out, source: e })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
