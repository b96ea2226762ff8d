//! Exact-log-Z Metropolis on a one-weight model, compared with the grid
//! posterior by total variation.

use boltzmann_bayes::exact::{exact_posterior_grid, GridSpec};
use boltzmann_bayes::model::{DataSet, GaussianPrior, Layout};
use boltzmann_bayes::params::{histogram, run_chain, ChainConfig, Problem};

fn main() -> boltzmann_bayes::Result<()> {
    let layout = Layout::complete(2)?;
    let data = DataSet::from_rows(2, vec![vec![1, 1]; 4])?;
    let problem = Problem::new(layout, data, GaussianPrior::default())?.with_free(vec![0])?;
    let chain = run_chain(&problem, &ChainConfig { iterations: 100_000, seed: 1, ..Default::default() })?;
    println!("acceptance rate {:.3}", chain.acceptance_rate());

    let spec = GridSpec::new(-2.0, 5.0, 50);
    let template = boltzmann_bayes::model::ParamVector::zeros(problem.layout().clone());
    let grid = exact_posterior_grid(&template, &[0], problem.suff(), problem.prior(), &[spec])?;
    let h = histogram(&chain.coord_values(0), spec.lo, spec.hi, spec.cells).normalized();
    let tv: f64 = 0.5 * h.iter().zip(&grid.mass).map(|(a, b)| (a - b).abs()).sum::<f64>();
    println!("total variation to the grid posterior: {tv:.4}");
    Ok(())
}
