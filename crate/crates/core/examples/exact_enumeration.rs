//! Exact partition function, moments and a one-weight posterior grid.

use boltzmann_bayes::exact::{exact_log_z, exact_moments, exact_posterior_grid, GridSpec};
use boltzmann_bayes::model::{suff_stats, DataSet, GaussianPrior, Model};

fn main() -> boltzmann_bayes::Result<()> {
    let m = Model::new(3, vec![(0, 1, 1.0), (1, 2, -0.5), (0, 2, 0.25)], vec![0.1, -0.2, 0.3])?;
    println!("log Z = {:.6}", exact_log_z(&m)?);
    let mom = exact_moments(&m)?;
    println!("node marginals = {:?}", mom.node_marginals);
    println!("edge moments   = {:?}", mom.edge_moments);

    // Posterior of the single weight of a two-unit model after four (1,1) rows.
    let two = Model::new(2, vec![(0, 1, 0.0)], vec![0.0, 0.0])?;
    let data = DataSet::from_rows(2, vec![vec![1, 1]; 4])?;
    let suff = suff_stats(&data, two.layout())?;
    let grid = exact_posterior_grid(&two.to_params(), &[0], &suff, &GaussianPrior::default(), &[GridSpec::new(-2.0, 5.0, 14)])?;
    for (w, p) in grid.specs[0].centers().iter().zip(&grid.mass) {
        println!("w = {w:5.2}  mass = {p:.4}");
    }
    Ok(())
}
