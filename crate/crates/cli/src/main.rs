//! `gharm` — config-driven experiments with harmonic functions, level sets,
//! and Laplace operators on metric graphs.
//!
//! Commands:
//! * `run --config <path> [--out <dir>] [--quiet]` — execute the command
//!   named in the config (solve | measure | levelset | spectrum | compare |
//!   diverge) and write CSV outputs.
//! * `sweep --config <path> [--out <dir>] [--quiet]` — one CSV row per grid
//!   point of the configured parameter; `GH_THREADS` caps the number of
//!   concurrent workers.
//! * `verify [--quiet]` — run the named invariant suite, one pass/fail line
//!   per check.
//!
//! Exit codes: 0 success, 2 schema violation, 3 numerical failure.

mod commands;
mod config;
mod csvout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{CliError, Config};

#[derive(Parser)]
#[command(name = "gharm", version, about = "harmonic analysis on metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides out.dir from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a parameter sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the invariant verification suite.
    Verify {
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, quiet } => run_config(&config, out.as_deref(), quiet, false),
        Command::Sweep { config, out, quiet } => run_config(&config, out.as_deref(), quiet, true),
        Command::Verify { quiet } => commands::run_verify(quiet),
    };
    ExitCode::from(code as u8)
}

fn run_config(
    path: &std::path::Path,
    out: Option<&std::path::Path>,
    quiet: bool,
    sweep: bool,
) -> i32 {
    let cfg = match Config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    if sweep && cfg.command != "sweep" {
        eprintln!("error: sweep subcommand requires command = \"sweep\" in the config");
        return 2;
    }
    if !sweep && cfg.command == "sweep" {
        eprintln!("error: use the sweep subcommand for command = \"sweep\"");
        return 2;
    }
    let base = path.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    let outputs = match commands::run_command(&cfg, &base) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    let dir = cfg.out_dir(out);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return CliError::Numerical(String::new()).exit_code();
    }
    for (name, content) in &outputs.files {
        let target = dir.join(name);
        if let Err(e) = std::fs::write(&target, content) {
            eprintln!("error: cannot write {}: {e}", target.display());
            return CliError::Numerical(String::new()).exit_code();
        }
        if !quiet {
            println!("wrote {}", target.display());
        }
    }
    if !quiet {
        for note in &outputs.notes {
            println!("{note}");
        }
    }
    0
}
