//! The importance estimate of Z(W)/Z(W') from samples under W', and ratio
//! Metropolis driven by it.

use boltzmann_bayes::exact::{exact_log_z, exact_sample};
use boltzmann_bayes::model::{DataSet, GaussianPrior, Model};
use boltzmann_bayes::params::{run_chain, Approximator, ChainConfig, Method, Problem};
use boltzmann_bayes::states::ratio_estimate;
use boltzmann_bayes::ChainRng;
use rand::SeedableRng;

fn main() -> boltzmann_bayes::Result<()> {
    let w = Model::new(4, vec![(0, 1, 0.5), (1, 2, 0.3), (2, 3, -0.4)], vec![0.0, 0.1, -0.1, 0.2])?;
    let w2 = Model::new(4, vec![(0, 1, 0.6), (1, 2, 0.2), (2, 3, -0.3)], vec![0.0, 0.1, -0.1, 0.2])?;
    let mut rng = ChainRng::seed_from_u64(3);
    let samples = exact_sample(&w2, &mut rng, 20_000)?;
    let est = ratio_estimate(&w, &w2, &samples)?;
    let exact = (exact_log_z(&w)? - exact_log_z(&w2)?).exp();
    println!("Z(W)/Z(W'): estimate {est:.5}, exact {exact:.5}");

    let rows = exact_sample(&w, &mut rng, 200)?;
    let problem = Problem::new(w.layout().clone(), DataSet::from_rows(4, rows)?, GaussianPrior::default())?;
    for approximator in [Approximator::Exact, Approximator::LongRun] {
        let cfg = ChainConfig { method: Method::RatioMetropolis, approximator, iterations: 5_000, seed: 4, ..Default::default() };
        let chain = run_chain(&problem, &cfg)?;
        println!("ratio metropolis ({}) acceptance {:.3}", approximator.as_str(), chain.acceptance_rate());
    }
    Ok(())
}
