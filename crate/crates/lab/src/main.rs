use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cofra::{emit_report, run_experiment, ExperimentConfig, ExperimentKind, Format};

/// Numerical experiments on densities of coherent frames.
///
/// The ball enumeration budget can be overridden with COFRA_BALL_BUDGET.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth, annular decay and Følner diagnostics of a group.
    Geometry(RunArgs),
    /// Orthogonality, dimension lemma and coefficient checks.
    RepCheck(RunArgs),
    /// Frame / Riesz bounds, separation and duals.
    Frame(RunArgs),
    /// Counting bounds, densities and error exponents.
    Density(RunArgs),
    /// Hole-radius falsification.
    Hole(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Only write the JSON report.
    #[arg(long)]
    json_only: bool,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<bool> {
    let (mut config, base) = match &args.config {
        Some(path) => (
            ExperimentConfig::load(path)?,
            path.parent().map(PathBuf::from).unwrap_or_default(),
        ),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    config = config.with_env_overrides()?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .context("thread pool")?;
    let output = run_experiment(kind, &config, &base)?;
    let formats: &[Format] = if args.json_only { &[Format::Json] } else { &[Format::Json, Format::Csv] };
    emit_report(&output, &args.out, formats)?;
    for c in &output.report.checks {
        let verdict = match (c.pass, c.diagnostic) {
            (true, _) => "pass",
            (false, true) => "diag",
            (false, false) => "FAIL",
        };
        println!("{verdict:4} {}", c.name);
    }
    println!("{}: {}", kind.name(), if output.report.pass { "pass" } else { "FAIL" });
    Ok(output.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Geometry(a) => (ExperimentKind::Geometry, a),
        Command::RepCheck(a) => (ExperimentKind::RepCheck, a),
        Command::Frame(a) => (ExperimentKind::Frame, a),
        Command::Density(a) => (ExperimentKind::Density, a),
        Command::Hole(a) => (ExperimentKind::Hole, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
