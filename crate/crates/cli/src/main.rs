use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semiper_cli::config::ExperimentConfig;
use semiper_cli::run::{self, CliError};

#[derive(Parser)]
#[command(name = "semiper", version, about = "Periodic solutions of forced damped evolution equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load(path: &PathBuf) -> Result<(Vec<u8>, ExperimentConfig), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_slice(&bytes).map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())))?;
    config.validate().map_err(CliError::InvalidConfig)?;
    Ok((bytes, config))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let Command::Run { config, out, seed, threads } = cli.command;
    let (bytes, cfg) = load(&config)?;
    if let Some(k) = threads {
        if k == 0 {
            return Err(CliError::InvalidConfig("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::InvalidConfig(e.to_string()))?;
    }
    let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output));
    let seed = seed.unwrap_or(cfg.seed);
    let manifest = run::run(&config, &bytes, &cfg, &out, seed)?;
    println!("{}: {} files written to {}", cfg.name, manifest.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
