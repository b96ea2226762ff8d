use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::Model;

/// Erdős–Rényi model with `N(0, scale²)` weights and biases.
pub fn random_model(k: usize, density: f64, scale: f64, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).unwrap();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if rng.random::<f64>() < density {
                edges.push((i, j, normal.sample(&mut rng)));
            }
        }
    }
    let biases = (0..k).map(|_| normal.sample(&mut rng)).collect();
    Model::new(k, edges, biases).unwrap()
}

/// Random recursive tree: node `i > 0` attaches to a uniform earlier node.
pub fn random_tree_model(k: usize, scale: f64, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).unwrap();
    let edges = (1..k).map(|i| (rng.random_range(0..i), i, normal.sample(&mut rng))).collect();
    let biases = (0..k).map(|_| normal.sample(&mut rng)).collect();
    Model::new(k, edges, biases).unwrap()
}
