//! A shortened heart-scale comparison: exact reference chains, loopy
//! Metropolis, brief Langevin and mean-field Metropolis on the shipped
//! stand-in, written as a result bundle.

use boltzmann_bayes::experiments::{run_experiment, ExperimentConfig, ExperimentKind, RunSpec};
use boltzmann_bayes::params::{Approximator, Method};

fn main() -> boltzmann_bayes::Result<()> {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::Heart);
    cfg.iterations = 10_000;
    cfg.runs = Some(vec![
        RunSpec::new(Method::Metropolis, Approximator::Bethe),
        RunSpec::new(Method::Langevin, Approximator::Brief),
        RunSpec::new(Method::Metropolis, Approximator::MeanField),
    ]);
    let out = std::env::temp_dir().join("bmbayes-heart-example");
    let result = run_experiment(&cfg, &out)?;
    for chain in result.summary["chains"].as_array().expect("chain list") {
        println!(
            "{:28} overlap>=0.8 on {:>2}/21  max variance ratio {:.2}",
            chain["name"].as_str().unwrap_or(""),
            chain["overlap_at_least_0_8"],
            chain["variance_ratio_max"].as_f64().unwrap_or(f64::NAN)
        );
    }
    println!("bundle in {}", out.display());
    Ok(())
}
