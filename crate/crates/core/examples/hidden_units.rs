//! Likelihood of a row with hidden entries: the clamped partition function
//! over the hidden units, exactly and by loopy BP.

use boltzmann_bayes::approx::BpConfig;
use boltzmann_bayes::hidden::{clamped_log_zx, hidden_loglik, ZxEstimator};
use boltzmann_bayes::model::{Model, HIDDEN};

fn main() -> boltzmann_bayes::Result<()> {
    let m = Model::new(5, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, -0.7), (3, 4, 0.4), (0, 4, 0.6)], vec![0.0; 5])?;
    let row = [1, HIDDEN, 0, HIDDEN, 1];
    println!("log p(visible) = {:.6}", hidden_loglik(&m, &row)?);
    let exact = clamped_log_zx(&m, &row, ZxEstimator::Exact { cap: 20 })?;
    let bethe = clamped_log_zx(&m, &row, ZxEstimator::Bethe(BpConfig::default()))?;
    println!("log Z_x exact {exact:.6}, bethe {bethe:.6}");
    Ok(())
}
