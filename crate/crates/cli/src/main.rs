use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catalytic::experiments::{
    emit_plot_script, error_json, exit, exit_code, run_experiment, ExperimentKind, PlotKind, THREADS_ENV,
};
use catalytic::Error;
use clap::{Args, Parser, Subcommand};

/// Mutually catalytic branching random walks: exact simulation,
/// continuous-state integration and oracle checks.
#[derive(Debug, Parser)]
#[command(name = "catalytic", version, after_help = format!(
    "Exit codes: 0 success, 2 invalid config, 3 check failed, 4 internal error.\n\
     {THREADS_ENV}=<n> sets the default worker count."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Suppress the summary on stdout.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact particle simulation.
    Simulate(RunArgs),
    /// Euler-Maruyama paths of the field system or the limit diffusion.
    SimulateSde(RunArgs),
    /// Dump spectral transition probabilities and Green functions.
    Kernels(RunArgs),
    /// Compare simulated moments to the closed-form oracles.
    MomentsCheck(RunArgs),
    /// Estimate the probability that both types survive.
    Coexistence(RunArgs),
    /// Finite-system-scheme comparison against the limit diffusion.
    Fss(RunArgs),
    /// Monte Carlo check of the self-duality relation.
    DualityCheck(RunArgs),
    /// Write a plotting script for an existing result table.
    Plot {
        /// CSV produced by one of the run subcommands.
        csv: PathBuf,
        /// moments, coexistence, fss or kernels.
        #[arg(short, long)]
        kind: String,
    },
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("{}", error_json(err));
    ExitCode::from(exit_code(err) as u8)
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": "config_read",
                    "exit_code": exit::VALIDATION,
                    "messages": [format!("{}: {e}", args.config.display())],
                })
            );
            return ExitCode::from(exit::VALIDATION as u8);
        }
    };
    match run_experiment(kind, &text, &args.out) {
        Ok(outcome) => {
            if !args.quiet {
                for line in &outcome.report {
                    println!("{line}");
                }
                println!("outputs written to {}", args.out.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}

fn plot(csv: &Path, kind: &str) -> ExitCode {
    let Some(kind) = PlotKind::parse(kind) else {
        return fail(&Error::Config(vec![format!(
            "kind: expected moments, coexistence, fss or kernels, got `{kind}`"
        )]));
    };
    match emit_plot_script(csv, kind) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::SimulateSde(a) => (ExperimentKind::SimulateSde, a),
        Command::Kernels(a) => (ExperimentKind::Kernels, a),
        Command::MomentsCheck(a) => (ExperimentKind::MomentsCheck, a),
        Command::Coexistence(a) => (ExperimentKind::Coexistence, a),
        Command::Fss(a) => (ExperimentKind::Fss, a),
        Command::DualityCheck(a) => (ExperimentKind::DualityCheck, a),
        Command::Plot { csv, kind } => return plot(csv, kind),
    };
    execute(kind, args)
}
