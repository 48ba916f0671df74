//! `snn`: train, evaluate and explain superposable neural networks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod args;
mod commands;
mod config;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snn_core::Error;

use commands::{baseline, demo, eval, explain, expand, rank, toy, train};

#[derive(Debug, Parser)]
#[command(name = "snn", version, about = "Superposable neural networks for susceptibility mapping")]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, env = "SNN_THREADS")]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the composite-feature manifest.
    Expand(expand::ExpandArgs),
    /// Rank composite features by tournament and forward-select them.
    Rank(rank::RankArgs),
    /// Run the full training pipeline and save the model.
    Train(train::TrainCmdArgs),
    /// Score a saved model: metrics, ROC and success-rate curves.
    Eval(eval::EvalArgs),
    /// Contribution curves, window maps and normalized contribution ranks.
    Explain(explain::ExplainArgs),
    /// Train and score a comparison model.
    Baseline {
        #[command(subcommand)]
        kind: baseline::BaselineKind,
    },
    /// Boolean toy problem: feature isolation and coefficient recovery.
    Toy(toy::ToyArgs),
    /// Generate a synthetic raster scene and run every step on it.
    Demo(demo::DemoArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Io { .. } | Error::Parse { .. } | Error::Data(_) | Error::Model(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn hint(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "check the flags (see --help) and the --config file",
        Error::Io { .. } | Error::Parse { .. } => "check that the input files exist and are well formed",
        Error::Data(_) => "check the dataset contents and the split settings",
        Error::Model(_) => "the model file is missing, corrupt or from an incompatible version",
        Error::Numerical(_) => "try another --seed, more epochs or fewer neurons",
    }
}

fn dispatch(command: &Command) -> snn_core::Result<()> {
    match command {
        Command::Expand(a) => expand::run(a),
        Command::Rank(a) => rank::run(a),
        Command::Train(a) => train::run(a).map(drop),
        Command::Eval(a) => eval::run(a).map(drop),
        Command::Explain(a) => explain::run(a),
        Command::Baseline { kind } => baseline::run(kind).map(drop),
        Command::Toy(a) => toy::run(a).map(drop),
        Command::Demo(a) => demo::run(a).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}\nhint: {}", hint(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
