//! `dampwave` command line: forward, oracle, identity, invert, convergence.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dampwave", version, about = "Damped wave equation: forward traces, identity checks, inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Forward,
    Oracle,
    Identity,
    Invert,
    Convergence,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for one profile and write trace.csv.
    Forward(Overrides),
    /// Closed-form trace for constant damping.
    Oracle(Overrides),
    /// Term-by-term identity for profile and profile2; writes breakdown.csv.
    Identity(Overrides),
    /// Layer stripping (and optional Gauss–Newton) on a trace.
    Invert(Overrides),
    /// Trace error and observed order over a sequence of steps.
    Convergence(Overrides),
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T", value_name = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write a gnuplot script next to the CSV files.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<dampwave::Error> for Failure {
    fn from(e: dampwave::Error) -> Self {
        if e.is_numeric() {
            Self::numeric(e.to_string())
        } else {
            Self::config(e.to_string())
        }
    }
}

fn command_name(kind: CommandKind) -> &'static str {
    match kind {
        CommandKind::Forward => "forward",
        CommandKind::Oracle => "oracle",
        CommandKind::Identity => "identity",
        CommandKind::Invert => "invert",
        CommandKind::Convergence => "convergence",
    }
}

fn prepare(kind: CommandKind, o: &Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != command_name(kind) {
            return Err(Failure::config(format!(
                "config is for command {c:?}, not {:?}",
                command_name(kind)
            )));
        }
    }
    if o.horizon.is_some() {
        cfg.horizon = o.horizon;
    }
    if o.h.is_some() {
        cfg.h = o.h;
    }
    if o.out_dir.is_some() {
        cfg.out_dir = o.out_dir.clone();
    }
    cfg.emit_plot_script |= o.plot;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (kind, o) = match &cli.command {
        Command::Forward(o) => (CommandKind::Forward, o),
        Command::Oracle(o) => (CommandKind::Oracle, o),
        Command::Identity(o) => (CommandKind::Identity, o),
        Command::Invert(o) => (CommandKind::Invert, o),
        Command::Convergence(o) => (CommandKind::Convergence, o),
    };
    let cfg = prepare(kind, o)?;
    match kind {
        CommandKind::Forward => commands::forward(&cfg),
        CommandKind::Oracle => commands::oracle(&cfg),
        CommandKind::Identity => commands::identity(&cfg),
        CommandKind::Invert => commands::invert(&cfg),
        CommandKind::Convergence => commands::convergence(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
