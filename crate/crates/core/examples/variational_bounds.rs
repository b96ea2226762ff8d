//! Mean-field and tree lower bounds and the Bethe estimate against exact
//! log Z on a small loopy model.

use boltzmann_bayes::approx::{loopy_bp, mean_field, select_tree, tree_bound, BpConfig, MeanFieldConfig, TreeConfig};
use boltzmann_bayes::exact::exact_log_z;
use boltzmann_bayes::model::Model;

fn main() -> boltzmann_bayes::Result<()> {
    let edges = vec![(0, 1, 0.8), (1, 2, -0.6), (2, 3, 0.5), (3, 0, 0.7), (0, 2, 0.3), (3, 4, -0.9), (4, 5, 0.4)];
    let m = Model::new(6, edges, vec![-0.2, 0.1, 0.3, -0.4, 0.2, 0.0])?;
    let exact = exact_log_z(&m)?;
    let mf = mean_field(&m, None, &MeanFieldConfig::default())?;
    let tree = tree_bound(&m, &select_tree(&m), Some(&mf.node_marginals), &TreeConfig::default())?;
    let bp = loopy_bp(&m, &BpConfig::default())?;
    println!("exact       {exact:.6}");
    println!("mean field  {:.6}  (bound, gap {:.2e})", mf.log_z_estimate, exact - mf.log_z_estimate);
    println!("tree        {:.6}  (bound, gap {:.2e})", tree.log_z_estimate, exact - tree.log_z_estimate);
    println!("bethe       {:.6}  (converged: {}, {} iterations)", bp.log_z_estimate, bp.converged, bp.iterations);
    Ok(())
}
