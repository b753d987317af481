use std::path::PathBuf;
use std::process::ExitCode;

use assist_core::harness::config::{parse_algorithms, parse_seeds};
use assist_core::harness::{emit_plot, run_experiment, ExperimentKind, RunConfig};
use assist_core::Error;
use clap::{Args, Parser, Subcommand};

/// Two-party assisted learning experiments.
#[derive(Parser)]
#[command(name = "assist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised runs: assist and the baselines on a classification task.
    Dl(RunArgs),
    /// Policy-gradient runs on CartPole environments.
    Rl(RunArgs),
    /// Stationarity bound check on the quadratic pair.
    Theory(RunArgs),
    /// Privacy sweep over `privacy.epsilons`.
    Dp(RunArgs),
    /// Render SVG curves from a metrics CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, e.g. 0,1,2.
    #[arg(long)]
    seeds: Option<String>,
    /// `all` or a comma-separated list of assist, centralized, learner_only, fedavg.
    #[arg(long)]
    algorithms: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics CSV written by one of the run subcommands.
    #[arg(long)]
    input: PathBuf,
    /// Directory for the SVG files; defaults to the directory of the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Columns to plot, comma-separated. Defaults to every metric column with data.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::InsufficientRecords { .. }
        | Error::CsvCell { .. }
        | Error::MissingColumn(_) => 2,
        Error::Divergence { .. } => 3,
        Error::Verification(_) => 4,
        _ => 1,
    }
}

fn build_config(kind: ExperimentKind, args: RunArgs) -> assist_core::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load_for(Some(kind), path)?,
        None => RunConfig::for_experiment(kind),
    };
    if let Some(out) = args.out {
        config.out = out;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = parse_seeds(&seeds)?;
    }
    if let Some(algorithms) = args.algorithms {
        parse_algorithms(&algorithms)?;
        config.algorithms = algorithms;
    }
    Ok(config)
}

fn run(cli: Cli) -> assist_core::Result<()> {
    let (kind, args) = match cli.command {
        Command::Dl(a) => (ExperimentKind::Dl, a),
        Command::Rl(a) => (ExperimentKind::Rl, a),
        Command::Theory(a) => (ExperimentKind::Theory, a),
        Command::Dp(a) => (ExperimentKind::Dp, a),
        Command::Plot(p) => {
            let out = p
                .out
                .or_else(|| p.input.parent().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            for f in emit_plot(&p.input, &out, p.metrics.as_deref())? {
                println!("{}", f.display());
            }
            return Ok(());
        }
    };
    let config = build_config(kind, args)?;
    let path = run_experiment(&config)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
