use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

use segsolve::config::{parse_config_for, Command};
use segsolve::error::Error;
use segsolve::run::{config_digest, error_json, execute};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Solve,
    Sweep,
    Parabolic,
    Fb1d,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Sweep => Command::Sweep,
            Cmd::Parabolic => Command::Parabolic,
            Cmd::Fb1d => Command::Fb1d,
        }
    }
}

/// Nonlocal segregation solver.
///
/// Worker threads can be capped with SEGSOLVE_THREADS.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SEGSOLVE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("SEGSOLVE_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config_for(&text, Some(args.command.into())) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(out) = &args.out {
                let report = json!({
                    "status": "error",
                    "provenance": { "config_sha256": config_digest(&text), "version": env!("CARGO_PKG_VERSION") },
                    "error": error_json(&e),
                });
                let written = std::fs::create_dir_all(out)
                    .and_then(|_| std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report).unwrap() + "\n"));
                if let Err(io) = written {
                    eprintln!("error: cannot write report: {io}");
                }
            }
            return ExitCode::from(2);
        }
    };
    let out = args.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match execute(&cfg, &text, &out) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Io(_)) {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
