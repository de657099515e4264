mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::{Cli, CliCommand, Command, RunConfig, UsageError};

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_FAILED: u8 = 3;

fn to_config(cmd: CliCommand) -> Result<RunConfig> {
    let (command, opts) = match cmd {
        CliCommand::PlotTract(o) => (Command::PlotTract, o),
        CliCommand::Trace(o) => (Command::Trace, o),
        CliCommand::VerifyExpansion(o) => (Command::VerifyExpansion, o),
        CliCommand::VerifyConvexity(o) => (Command::VerifyConvexity, o),
        CliCommand::Cover(o) => (Command::Cover, o),
        CliCommand::Harmonic(o) => (Command::Harmonic, o),
        CliCommand::SlowOrbit(o) => (Command::SlowOrbit, o),
        CliCommand::Classify(o) => (Command::Classify, o),
        CliCommand::Run { config } => return RunConfig::load(&config),
    };
    Ok(RunConfig { command, opts })
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("TRACTORIA_THREADS") {
        let n: usize = match v.trim().parse() {
            Ok(n) if n > 0 => n,
            _ => return config::usage(format!("TRACTORIA_THREADS must be a positive integer, got '{v}'")),
        };
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    init_threads()?;
    let cfg = to_config(cli.command)?;
    let out = commands::run(&cfg)?;
    match (&cfg.opts.out, cfg.command) {
        (Some(p), Command::PlotTract) => {
            let p = p.with_extension("json");
            std::fs::write(&p, &out.json).with_context(|| format!("writing {}", p.display()))?;
            std::io::stdout().write_all(out.json.as_bytes())?;
        }
        (Some(p), _) => std::fs::write(p, &out.json).with_context(|| format!("writing {}", p.display()))?,
        (None, _) => std::io::stdout().write_all(out.json.as_bytes())?,
    }
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("checks failed");
            ExitCode::from(EXIT_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_ERROR)
            }
        }
    }
}
