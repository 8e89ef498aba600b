use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plapvar::cli::{load_config, run};

#[derive(Parser)]
#[command(name = "plap-var", version, about = "p-Laplacian variational solver and hypothesis audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Validate a config file and print the resolved configuration.
    CheckConfig { file: PathBuf },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PLAPVAR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("PLAPVAR_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match cli.command {
        Command::CheckConfig { file } => match load_config(&file) {
            Ok(config) => {
                print!("{}", config.to_manifest());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", file.display());
                ExitCode::from(1)
            }
        },
        Command::Run {
            config,
            out,
            seed,
            quiet,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            match run(&cfg) {
                Ok(outcome) => {
                    if !quiet {
                        for line in &outcome.summary {
                            println!("{line}");
                        }
                        println!("outputs in {}", outcome.out_dir.display());
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
