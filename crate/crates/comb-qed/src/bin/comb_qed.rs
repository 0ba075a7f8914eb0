//! `comb-qed`: run or validate JSON experiment configs.
//!
//! Exit codes: 0 success, 1 config/validation error, 2 numerical failure,
//! 3 I/O error. Logging is controlled by the COMB_QED_LOG environment
//! variable (error, warn, info, debug, trace).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use comb_qed::config::parse_config;
use comb_qed::{runner, CombError};

#[derive(Parser)]
#[command(name = "comb-qed", version, about = "Atomic-frequency-comb cavity QED simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config and write its artifacts.
    Run {
        /// Path to the JSON config.
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads for sweeps; 0 = one per CPU.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Run tag recorded in the summary; all computations are deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parse and validate a config without running it.
    Validate {
        /// Path to the JSON config.
        config: PathBuf,
    },
}

fn exit_code_for(err: &CombError) -> u8 {
    match err {
        CombError::Validation(_) | CombError::Config(_) => 1,
        CombError::Io(_) => 3,
        _ => 2,
    }
}

fn load(path: &PathBuf) -> Result<comb_qed::config::ExperimentConfig, (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (3u8, format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| (exit_code_for(&e), e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("COMB_QED_LOG", "warn"),
    )
    .init();

    let cli = Cli::parse();
    let outcome: Result<(), (u8, String)> = match cli.command {
        Command::Validate { config } => load(&config).map(|cfg| {
            println!("ok: {} ({})", config.display(), cfg.kind());
        }),
        Command::Run {
            config,
            out,
            jobs,
            seed,
        } => load(&config).and_then(|cfg| {
            match runner::run(&cfg, &out, jobs, seed) {
                Ok(summary) => {
                    for name in &summary.outputs {
                        println!("wrote {}", out.join(name).display());
                    }
                    if summary.failures.is_empty() {
                        Ok(())
                    } else {
                        let detail = summary
                            .failures
                            .iter()
                            .map(|f| format!("  [{}] {}: {}", f.index, f.label, f.error))
                            .collect::<Vec<_>>()
                            .join("\n");
                        Err((
                            2,
                            format!(
                                "{} sweep point(s) failed:\n{detail}",
                                summary.failures.len()
                            ),
                        ))
                    }
                }
                Err(e) => Err((exit_code_for(&e), e.to_string())),
            }
        }),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
