//! Deterministic approximations to `log Z` and the unclamped moments:
//! naive mean field, a tree-structured variational bound, loopy belief
//! propagation with the Bethe free energy, and pseudo-likelihood.

pub mod bp;
pub mod mean_field;
pub mod pseudo;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::model::Expectations;

pub use bp::{bethe_free_energy, loopy_bp, loopy_bp_warm, BpConfig, EdgeBelief};
pub use mean_field::{mean_field, MeanFieldConfig};
pub use pseudo::pseudo_log_likelihood;
pub use tree::{select_tree, tree_bound, TreeConfig, TreeStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMethod {
    MeanField,
    Tree,
    Bethe,
}

/// Output of an approximate inference routine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub method: InferenceMethod,
    pub log_z_estimate: f64,
    pub node_marginals: Vec<f64>,
    pub edge_moments: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Bound value after each iteration (bound methods only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bound_trace: Vec<f64>,
}

impl Expectations for InferenceResult {
    fn node_marginals(&self) -> &[f64] {
        &self.node_marginals
    }
    fn edge_moments(&self) -> &[f64] {
        &self.edge_moments
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `−p ln p`, zero at `p = 0`.
#[inline]
pub(crate) fn neg_xlogx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Entropy of a Bernoulli(`p`) variable in nats.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    neg_xlogx(p) + neg_xlogx(1.0 - p)
}
