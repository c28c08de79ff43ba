use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use revanneal_cli::config::Command;
use revanneal_cli::{compare_models, gap_scan, point_count, prepare, run, CliError};

/// Reverse quantum annealing of the ferromagnetic p-spin model.
///
/// Exit codes: 0 success, 1 invalid configuration, 2 runtime failure.
/// `REVANNEAL_WORKERS` overrides the worker thread count.
#[derive(Parser)]
#[command(name = "revanneal", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the sweep in a config file (TOML, or a previous manifest.json).
    Run { config: PathBuf },
    /// Minimal gap and low-lying spectrum of the configured problem.
    GapScan { config: PathBuf },
    /// Maximum P0 versus n for collective and independent dephasing.
    CompareModels { config: PathBuf },
    /// Check a config without computing anything.
    Validate { config: PathBuf },
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Run { config } => {
            let r = prepare(&config, Command::Run)?;
            let out = run(&r)?;
            println!("wrote {}", out.display());
        }
        Cmd::GapScan { config } => {
            let r = prepare(&config, Command::GapScan)?;
            let (out, s, g) = gap_scan(&r)?;
            println!("s_delta = {s:.6}, gap = {g:.6} GHz");
            println!("wrote {}", out.display());
        }
        Cmd::CompareModels { config } => {
            let r = prepare(&config, Command::CompareModels)?;
            let (out, rows) = compare_models(&r)?;
            for row in rows {
                println!(
                    "n = {} {:<11} max P0 = {:.4} ± {:.4} at s_inv = {}",
                    row.n, row.model, row.point.p0, row.point.stderr, row.point.s_inv
                );
            }
            println!("wrote {}", out.display());
        }
        Cmd::Validate { config } => {
            let r = prepare(&config, Command::Validate)?;
            println!("ok: {} points", point_count(&r, Command::Validate));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
