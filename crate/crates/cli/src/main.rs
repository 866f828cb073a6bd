use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lrbs_cli::config::ExperimentKind;
use lrbs_cli::{parse_config, run_experiment, CliError, RunOptions};

/// Simulation lab for a locally regulated branching system on a lattice
/// torus: stochastic runs, the deterministic lattice skeleton, two-copy
/// couplings, a two-species variant and oriented-percolation diagnostics.
#[derive(Parser)]
#[command(name = "lrbs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (line-oriented `key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "lrbs-out")]
    out: PathBuf,
    /// Emit SVG plots alongside the data artifacts.
    #[arg(long)]
    plots: bool,
    /// Worker threads (0 = all cores). Artifacts are identical either way.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Stochastic single-species trajectories.
    Simulate(CommonArgs),
    /// Deterministic lattice iteration and convergence certification.
    Cml(CommonArgs),
    /// Two-copy coupling on shared noise.
    Couple(CommonArgs),
    /// Two competing species.
    #[command(name = "two-species")]
    TwoSpecies(CommonArgs),
    /// Shrinking invariant interval sequences of the single-site map.
    Logistic(CommonArgs),
    /// Adversarial colonization sandbox.
    Lemma7(CommonArgs),
    /// Oriented site percolation analysis.
    Percolation(CommonArgs),
    /// Survival and good-block density across on-site coefficients.
    #[command(name = "survival-sweep")]
    SurvivalSweep(CommonArgs),
    /// Coexistence fraction across cross-competition strengths.
    #[command(name = "coexistence-sweep")]
    CoexistenceSweep(CommonArgs),
    /// Long runs from two initial laws with window-marginal histograms.
    #[command(name = "complete-convergence")]
    CompleteConvergence(CommonArgs),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &CommonArgs) {
        match self {
            Command::Simulate(a) => (ExperimentKind::Simulate, a),
            Command::Cml(a) => (ExperimentKind::Cml, a),
            Command::Couple(a) => (ExperimentKind::Couple, a),
            Command::TwoSpecies(a) => (ExperimentKind::TwoSpecies, a),
            Command::Logistic(a) => (ExperimentKind::Logistic, a),
            Command::Lemma7(a) => (ExperimentKind::Lemma7, a),
            Command::Percolation(a) => (ExperimentKind::Percolation, a),
            Command::SurvivalSweep(a) => (ExperimentKind::SurvivalSweep, a),
            Command::CoexistenceSweep(a) => (ExperimentKind::CoexistenceSweep, a),
            Command::CompleteConvergence(a) => (ExperimentKind::CompleteConvergence, a),
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let text = std::fs::read_to_string(&args.config)?;
    let config = parse_config(&text)?;
    if config.kind != kind {
        return Err(CliError::ExperimentMismatch {
            config: config.kind.name().to_string(),
            command: kind.name().to_string(),
        });
    }
    print!("{}", config.echo());
    let options = RunOptions { out_dir: args.out.clone(), plots: args.plots, threads: args.threads };
    let written = run_experiment(&config, &options)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    if kind == ExperimentKind::Logistic {
        // the logistic preset prints its sequences
        let path = args.out.join("logistic.csv");
        if let Ok(csv) = std::fs::read_to_string(path) {
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
