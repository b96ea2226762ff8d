//! Uncorrected Langevin with brief data-initialized Gibbs moments, next to
//! loopy-BP plug-in Metropolis, on data from a known six-unit model.

use boltzmann_bayes::experiments::{heart_standin_data, heart_standin_model};
use boltzmann_bayes::params::{run_chain, Approximator, ChainConfig, Method, Problem};
use boltzmann_bayes::model::GaussianPrior;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> boltzmann_bayes::Result<()> {
    let truth = heart_standin_model();
    let problem = Problem::new(truth.layout().clone(), heart_standin_data(), GaussianPrior::default())?;
    let iterations = 20_000;
    let langevin = run_chain(
        &problem,
        &ChainConfig { method: Method::Langevin, approximator: Approximator::Brief, iterations, seed: 1, ..Default::default() },
    )?;
    let loopy = run_chain(
        &problem,
        &ChainConfig { method: Method::Metropolis, approximator: Approximator::Bethe, iterations, seed: 2, ..Default::default() },
    )?;
    let truth = truth.to_params();
    println!("{:8} {:>7} {:>9} {:>9}", "param", "truth", "langevin", "loopy");
    let burn = iterations / 5;
    for c in 0..problem.layout().n_params() {
        println!(
            "{:8} {:7.3} {:9.3} {:9.3}",
            problem.layout().coord_name(c),
            truth.values[c],
            mean(&langevin.coord_values(c)[burn..]),
            mean(&loopy.coord_values(c)[burn..])
        );
    }
    Ok(())
}
