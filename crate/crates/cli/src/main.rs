//! `stnet`: one binary binding slicing, corruption, model building, cost
//! analysis, training, evaluation, and report joining into reproducible
//! experiment runs. Every command writes a manifest next to its outputs.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "stnet",
    version,
    about = "Multi-stream networks over intensity slices: build, corrupt, train, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split an image into intensity slices (raw planar RGB in and out)
    Slice(commands::SliceArgs),
    /// Corrupt an image set, or print the severity parameter table
    Corrupt(commands::CorruptArgs),
    /// Build an initialized model checkpoint from a model name
    Build(commands::BuildArgs),
    /// Report parameter and FLOPs costs for a model name
    Analyze(commands::AnalyzeArgs),
    /// Train a model and write checkpoint plus loss history
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint on clean and corrupted data
    Eval(commands::EvalArgs),
    /// Join aug/no-aug evaluation reports into augmentation boosts
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Slice(args) => commands::slice(args),
        Command::Corrupt(args) => commands::corrupt(args),
        Command::Build(args) => commands::build(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
