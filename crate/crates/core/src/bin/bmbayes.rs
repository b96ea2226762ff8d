use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use boltzmann_bayes::experiments::{run_experiment, ExperimentConfig, ExperimentKind, RunSpec};
use boltzmann_bayes::params::{Approximator, Method};

/// Approximate Bayesian inference over Boltzmann-machine parameters.
#[derive(Parser)]
#[command(name = "bmbayes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact vs approximate samplers on the six-variable table.
    Heart(Common),
    /// Loopy Metropolis and brief Langevin on a generated 100-node system.
    Synthetic(Common),
    /// Log-σ posterior of the semi-supervised random field.
    Semisup(Common),
    /// Implied prior of the naive joint model for growing data sets.
    FlawedDemo(Common),
    /// Any sampler on a user-supplied table (`data` in the config).
    Custom(Common),
}

#[derive(Args)]
struct Common {
    /// JSON or TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `runs/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chain iterations; stored samples for `semisup`.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    approximator: Option<Approximator>,
}

fn build_config(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::for_kind(kind),
    };
    config.experiment = kind;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(iters) = args.iters {
        match kind {
            ExperimentKind::Semisup => config.semisup.langevin.samples = iters,
            ExperimentKind::FlawedDemo => bail!("--iters does not apply to flawed-demo"),
            _ => config.iterations = iters,
        }
    }
    if args.method.is_some() || args.approximator.is_some() {
        if matches!(kind, ExperimentKind::Semisup | ExperimentKind::FlawedDemo) {
            bail!("--method/--approximator do not apply to {}", kind.as_str());
        }
        let method = args.method.unwrap_or(config.chain.method);
        let approximator = args.approximator.unwrap_or(config.chain.approximator);
        config.chain.method = method;
        config.chain.approximator = approximator;
        config.runs = Some(vec![RunSpec::new(method, approximator)]);
    }
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Heart(a) => (ExperimentKind::Heart, a),
        Command::Synthetic(a) => (ExperimentKind::Synthetic, a),
        Command::Semisup(a) => (ExperimentKind::Semisup, a),
        Command::FlawedDemo(a) => (ExperimentKind::FlawedDemo, a),
        Command::Custom(a) => (ExperimentKind::Custom, a),
    };
    let config = build_config(kind, args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(kind.as_str()));
    let result = run_experiment(&config, &out).with_context(|| format!("running {}", kind.as_str()))?;
    println!("{}", serde_json::to_string_pretty(&result.summary)?);
    eprintln!("wrote {} files to {}", result.files.len(), result.dir.display());
    Ok(())
}
