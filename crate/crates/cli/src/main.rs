use clap::{Parser, Subcommand};

use mixreg_cli::commands::{
    cmd_evaluate, cmd_fit, cmd_select, cmd_simulate, cmd_wavelet, exit_code_for, EvaluateArgs,
    FitArgs, SelectArgs, SimulateArgs, WaveletArgs,
};

/// Cluster observations by the regression relationship between responses and
/// predictors: simulate benchmark data, build model collections by the
/// lasso-mle / lasso-rank procedures (and their group-lasso variants), select
/// a model by the slope heuristic or BIC, evaluate against ground truth, and
/// project functional data onto wavelet bases.
#[derive(Parser)]
#[command(name = "mixreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labeled dataset from a benchmark or custom design.
    Simulate(SimulateArgs),
    /// Build a model collection with one of the four procedures.
    Fit(FitArgs),
    /// Select one model from a fitted collection.
    Select(SelectArgs),
    /// Report ARI / KL / TR-FR / MAPE for a fitted model.
    Evaluate(EvaluateArgs),
    /// Project functional CSV data onto a wavelet basis.
    Wavelet(WaveletArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Select(args) => cmd_select(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Wavelet(args) => cmd_wavelet(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code_for(&err));
    }
}
