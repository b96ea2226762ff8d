//! Naive mean-field lower bound on `log Z`.

use serde::{Deserialize, Serialize};

use super::{binary_entropy, sigmoid, InferenceMethod, InferenceResult};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldConfig {
    /// Fraction of the old marginal kept at each update, in `[0, 1)`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self { damping: 0.0, tol: 1e-10, max_iter: 2000 }
    }
}

/// Variational objective `Σ W_ij m_i m_j + Σ b_i m_i + Σ H(m_i)` of a fully
/// factorized distribution with marginals `m`.
pub fn mean_field_objective(model: &Model, m: &[f64]) -> f64 {
    let pair: f64 = model
        .layout()
        .edges()
        .iter()
        .zip(model.weights())
        .map(|(&(i, j), w)| w * m[i] * m[j])
        .sum();
    let linear: f64 = model.biases().iter().zip(m).map(|(b, mi)| b * mi).sum();
    let entropy: f64 = m.iter().map(|&p| binary_entropy(p)).sum();
    pair + linear + entropy
}

/// Sequential fixed-point iteration `m_i ← σ(b_i + Σ_j W_ij m_j)` in node
/// order. Without damping every update maximizes the objective in `m_i`, so
/// the bound never decreases from sweep to sweep.
pub fn mean_field(model: &Model, init: Option<&[f64]>, config: &MeanFieldConfig) -> Result<InferenceResult> {
    let k = model.k();
    if !(0.0..1.0).contains(&config.damping) || config.tol <= 0.0 {
        return Err(Error::InvalidConfig("mean field needs damping in [0, 1) and tol > 0".into()));
    }
    let mut m = match init {
        Some(init) if init.len() == k => {
            if init.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::InvalidConfig("initial marginals must lie in (0, 1)".into()));
            }
            init.to_vec()
        }
        Some(init) => return Err(Error::LengthMismatch { expected: k, found: init.len() }),
        None => vec![0.5; k],
    };
    let layout = model.layout();
    let (w, b) = (model.weights(), model.biases());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for i in 0..k {
            let field = b[i] + layout.neighbors(i).iter().map(|&(j, e)| w[e] * m[j]).sum::<f64>();
            let target = sigmoid(field);
            let next = config.damping * m[i] + (1.0 - config.damping) * target;
            if !next.is_finite() {
                return Err(Error::NonFinite(format!("mean-field marginal of node {i}")));
            }
            delta = delta.max((next - m[i]).abs());
            m[i] = next;
        }
        trace.push(mean_field_objective(model, &m));
        if delta < config.tol {
            converged = true;
            break;
        }
    }
    let bound = *trace.last().unwrap_or(&mean_field_objective(model, &m));
    if !bound.is_finite() {
        return Err(Error::NonFinite("mean-field bound".into()));
    }
    let edge_moments = layout.edges().iter().map(|&(i, j)| m[i] * m[j]).collect();
    Ok(InferenceResult {
        method: InferenceMethod::MeanField,
        log_z_estimate: bound,
        node_marginals: m,
        edge_moments,
        converged,
        iterations,
        bound_trace: trace,
    })
}
