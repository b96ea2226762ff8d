//! Pairwise binary models (Boltzmann machines), their flat parameter view,
//! observed data, sufficient statistics, and the Gaussian prior.
//!
//! A model over `k` binary variables `s ∈ {0,1}^k` has unnormalized
//! log-probability `Σ_{i<j} W_ij s_i s_j + Σ_i b_i s_i`. Parameters are laid
//! out as the edge weights in lexicographic `(i, j)` order followed by the
//! `k` biases; [`Layout`] owns that ordering and the adjacency lists.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry of a [`DataSet`] row that was not observed.
pub const HIDDEN: u8 = 2;

/// Graph structure shared by a model and every parameter vector drawn for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    k: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Layout {
    /// Builds a layout from an unordered edge list. Pairs are normalized to
    /// `i < j` and sorted; self-edges, duplicates and out-of-range indices
    /// are rejected.
    pub fn new(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Arc<Self>> {
        if k == 0 {
            return Err(Error::InvalidModel("node count must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut sorted = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidModel(format!("self-edge on node {a}")));
            }
            if a >= k || b >= k {
                return Err(Error::InvalidModel(format!("edge ({a}, {b}) out of range for k = {k}")));
            }
            let pair = (a.min(b), a.max(b));
            if !seen.insert(pair) {
                return Err(Error::InvalidModel(format!("duplicate edge {pair:?}")));
            }
            sorted.push(pair);
        }
        sorted.sort_unstable();
        let mut adjacency = vec![Vec::new(); k];
        for (e, &(i, j)) in sorted.iter().enumerate() {
            adjacency[i].push((j, e));
            adjacency[j].push((i, e));
        }
        Ok(Arc::new(Self { k, edges: sorted, adjacency }))
    }

    /// Fully connected layout over `k` nodes.
    pub fn complete(k: usize) -> Result<Arc<Self>> {
        Self::new(k, (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of free parameters: one per edge plus one bias per node.
    pub fn n_params(&self) -> usize {
        self.edges.len() + self.k
    }

    /// `(neighbour, edge index)` pairs for node `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let pair = (i.min(j), i.max(j));
        self.edges.binary_search(&pair).ok()
    }

    /// Coordinate of the bias of node `i` in a parameter vector.
    pub fn bias_coord(&self, i: usize) -> usize {
        self.edges.len() + i
    }

    /// Human-readable name of coordinate `c`: `w[i,j]` or `b[i]`.
    pub fn coord_name(&self, c: usize) -> String {
        if c < self.edges.len() {
            let (i, j) = self.edges[c];
            format!("w[{i},{j}]")
        } else {
            format!("b[{}]", c - self.edges.len())
        }
    }

    /// Whether the edge set is acyclic (a forest).
    pub fn is_forest(&self) -> bool {
        self.edges.len() + crate::approx::tree::count_components(self) == self.k
    }
}

/// A Boltzmann machine: structure plus weights and biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct Model {
    layout: Arc<Layout>,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Model {
    /// Builds a model from `(i, j, w)` triples in any order.
    pub fn new(k: usize, edges: Vec<(usize, usize, f64)>, biases: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(k, edges.iter().map(|&(i, j, _)| (i, j)))?;
        let mut weights = vec![0.0; layout.n_edges()];
        for (i, j, w) in edges {
            weights[layout.edge_index(i, j).expect("edge was just inserted")] = w;
        }
        Self::from_parts(layout, weights, biases)
    }

    pub fn from_parts(layout: Arc<Layout>, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != layout.n_edges() {
            return Err(Error::InvalidModel(format!(
                "{} weights for {} edges",
                weights.len(),
                layout.n_edges()
            )));
        }
        if biases.len() != layout.k() {
            return Err(Error::InvalidModel(format!(
                "{} biases for {} nodes",
                biases.len(),
                layout.k()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("weights and biases must be finite".into()));
        }
        Ok(Self { layout, weights, biases })
    }

    /// All-zero parameters on the given structure.
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let (m, k) = (layout.n_edges(), layout.k());
        Self { layout, weights: vec![0.0; m], biases: vec![0.0; k] }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn k(&self) -> usize {
        self.layout.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.layout.edge_index(i, j).map(|e| self.weights[e])
    }

    /// Local field on node `i`: `b_i + Σ_j W_ij s_j`.
    #[inline]
    pub fn field(&self, i: usize, state: &[u8]) -> f64 {
        let mut a = self.biases[i];
        for &(j, e) in &self.layout.adjacency[i] {
            if state[j] == 1 {
                a += self.weights[e];
            }
        }
        a
    }

    /// Unnormalized log-probability `Σ W_ij s_i s_j + Σ b_i s_i`.
    pub fn log_unnorm(&self, state: &[u8]) -> Result<f64> {
        check_state(self.k(), state)?;
        Ok(self.log_unnorm_unchecked(state))
    }

    #[inline]
    pub(crate) fn log_unnorm_unchecked(&self, state: &[u8]) -> f64 {
        let mut total = 0.0;
        for (e, &(i, j)) in self.layout.edges.iter().enumerate() {
            if state[i] == 1 && state[j] == 1 {
                total += self.weights[e];
            }
        }
        for (i, &b) in self.biases.iter().enumerate() {
            if state[i] == 1 {
                total += b;
            }
        }
        total
    }

    pub fn to_params(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.layout.n_params());
        values.extend_from_slice(&self.weights);
        values.extend_from_slice(&self.biases);
        ParamVector { layout: self.layout.clone(), values }
    }

    pub fn from_params(params: &ParamVector) -> Result<Self> {
        devectorize(&params.layout, &params.values)
    }
}

/// Flattens a model into `[weights…, biases…]`.
pub fn vectorize(model: &Model) -> ParamVector {
    model.to_params()
}

/// Rebuilds a model from a layout and flat values.
pub fn devectorize(layout: &Arc<Layout>, values: &[f64]) -> Result<Model> {
    if values.len() != layout.n_params() {
        return Err(Error::LayoutMismatch { expected: layout.n_params(), found: values.len() });
    }
    let (w, b) = values.split_at(layout.n_edges());
    Model::from_parts(layout.clone(), w.to_vec(), b.to_vec())
}

pub(crate) fn check_state(k: usize, state: &[u8]) -> Result<()> {
    if state.len() != k {
        return Err(Error::LengthMismatch { expected: k, found: state.len() });
    }
    if let Some((index, &value)) = state.iter().enumerate().find(|(_, &v)| v > 1) {
        return Err(Error::NonBinary { index, value });
    }
    Ok(())
}

/// On-disk form of a [`Model`]: `{k, edges: [[i, j, w], …], biases: […]}`.
///
/// The matching parameter vector lists the weights in lexicographic `(i, j)`
/// order followed by the biases in node order, regardless of the order the
/// edges appear in the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub k: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub biases: Vec<f64>,
}

impl TryFrom<ModelFile> for Model {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        Model::new(file.k, file.edges, file.biases)
    }
}

impl From<Model> for ModelFile {
    fn from(model: Model) -> Self {
        let edges = model
            .layout
            .edges
            .iter()
            .zip(&model.weights)
            .map(|(&(i, j), &w)| (i, j, w))
            .collect();
        ModelFile { k: model.layout.k, edges, biases: model.biases }
    }
}

/// Flat coordinate view of a model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: Arc<Layout>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let n = layout.n_params();
        Self { layout, values: vec![0.0; n] }
    }

    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.n_params() {
            return Err(Error::LayoutMismatch { expected: layout.n_params(), found: values.len() });
        }
        Ok(Self { layout, values })
    }

    pub fn weights(&self) -> &[f64] {
        &self.values[..self.layout.n_edges()]
    }

    pub fn biases(&self) -> &[f64] {
        &self.values[self.layout.n_edges()..]
    }
}

/// `N` binary observation rows over `k` variables, possibly with hidden
/// entries ([`HIDDEN`]) and per-row multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    k: usize,
    rows: Vec<Vec<u8>>,
    counts: Vec<u64>,
}

impl DataSet {
    pub fn new(k: usize, rows: Vec<Vec<u8>>, counts: Option<Vec<u64>>) -> Result<Self> {
        let counts = counts.unwrap_or_else(|| vec![1; rows.len()]);
        if counts.len() != rows.len() {
            return Err(Error::InvalidData(format!(
                "{} counts for {} rows",
                counts.len(),
                rows.len()
            )));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidData("multiplicities must be positive".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidData(format!("row {r} has length {}, expected {k}", row.len())));
            }
            if let Some(&v) = row.iter().find(|&&v| v > HIDDEN) {
                return Err(Error::InvalidData(format!("row {r} has entry {v}")));
            }
        }
        Ok(Self { k, rows, counts })
    }

    /// Fully observed rows, each with multiplicity one.
    pub fn from_rows(k: usize, rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(k, rows, None)
    }

    pub fn empty(k: usize) -> Self {
        Self { k, rows: Vec::new(), counts: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Distinct stored rows (before multiplicities).
    pub fn n_distinct(&self) -> usize {
        self.rows.len()
    }

    /// Total number of observations `N`, multiplicities included.
    pub fn n_rows(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&v| v != HIDDEN))
    }

    /// Iterates over rows with multiplicities expanded.
    pub fn expanded(&self) -> impl Iterator<Item = &[u8]> {
        self.rows
            .iter()
            .zip(&self.counts)
            .flat_map(|(r, &c)| std::iter::repeat_n(r.as_slice(), c as usize))
    }

    /// Merges duplicate patterns, summing their multiplicities. Order of
    /// first appearance is kept.
    pub fn merged(&self) -> Self {
        let mut index = std::collections::HashMap::new();
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for (row, &c) in self.rows.iter().zip(&self.counts) {
            match index.get(row) {
                Some(&at) => counts[at] += c,
                None => {
                    index.insert(row.clone(), rows.len());
                    rows.push(row.clone());
                    counts.push(c);
                }
            }
        }
        Self { k: self.k, rows, counts }
    }
}

/// Isotropic Gaussian prior on weights and biases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub weight_variance: f64,
    pub bias_variance: f64,
}

impl Default for GaussianPrior {
    fn default() -> Self {
        Self { weight_variance: 1.0, bias_variance: 1.0 }
    }
}

impl GaussianPrior {
    pub fn new(weight_variance: f64, bias_variance: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(weight_variance) || !ok(bias_variance) {
            return Err(Error::InvalidConfig("prior variances must be finite and positive".into()));
        }
        Ok(Self { weight_variance, bias_variance })
    }

    /// Variance applying to coordinate `c` under `layout`.
    pub fn variance(&self, layout: &Layout, c: usize) -> f64 {
        if c < layout.n_edges() {
            self.weight_variance
        } else {
            self.bias_variance
        }
    }
}

/// `−Σ w²/(2σ_w²) − Σ b²/(2σ_b²)`; the normalizing constant is dropped.
pub fn log_prior(prior: &GaussianPrior, params: &ParamVector) -> f64 {
    let w: f64 = params.weights().iter().map(|w| w * w).sum();
    let b: f64 = params.biases().iter().map(|b| b * b).sum();
    -w / (2.0 * prior.weight_variance) - b / (2.0 * prior.bias_variance)
}

/// Gradient of [`log_prior`]: `−θ/σ²` per coordinate.
pub fn grad_log_prior(prior: &GaussianPrior, params: &ParamVector) -> Vec<f64> {
    let m = params.layout.n_edges();
    params
        .values
        .iter()
        .enumerate()
        .map(|(c, v)| if c < m { -v / prior.weight_variance } else { -v / prior.bias_variance })
        .collect()
}

/// Data sums `Σ_n s_i s_j` per edge and `Σ_n s_i` per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    pub edge_sums: Vec<u64>,
    pub node_sums: Vec<u64>,
    pub n_rows: u64,
}

impl SuffStats {
    pub fn empty(layout: &Layout) -> Self {
        Self { edge_sums: vec![0; layout.n_edges()], node_sums: vec![0; layout.k()], n_rows: 0 }
    }

    /// Data term of the log-likelihood: `Σ_e w_e·edge_sum_e + Σ_i b_i·node_sum_i`.
    pub fn dot(&self, params: &ParamVector) -> f64 {
        let w: f64 = params.weights().iter().zip(&self.edge_sums).map(|(w, &s)| w * s as f64).sum();
        let b: f64 = params.biases().iter().zip(&self.node_sums).map(|(b, &s)| b * s as f64).sum();
        w + b
    }

    /// Sufficient statistics as a flat vector aligned with the parameter layout.
    pub fn as_vector(&self) -> Vec<f64> {
        self.edge_sums.iter().chain(&self.node_sums).map(|&v| v as f64).collect()
    }
}

/// Accumulates sufficient statistics over fully observed data, folding in
/// row multiplicities.
pub fn suff_stats(data: &DataSet, layout: &Layout) -> Result<SuffStats> {
    if data.k() != layout.k() {
        return Err(Error::LengthMismatch { expected: layout.k(), found: data.k() });
    }
    if !data.is_fully_observed() {
        return Err(Error::HiddenEntries);
    }
    let mut stats = SuffStats::empty(layout);
    for (row, &c) in data.rows().iter().zip(data.counts()) {
        for (e, &(i, j)) in layout.edges().iter().enumerate() {
            if row[i] == 1 && row[j] == 1 {
                stats.edge_sums[e] += c;
            }
        }
        for (i, &v) in row.iter().enumerate() {
            if v == 1 {
                stats.node_sums[i] += c;
            }
        }
        stats.n_rows += c;
    }
    Ok(stats)
}

/// Node and edge expectations under some distribution over states.
pub trait Expectations {
    fn node_marginals(&self) -> &[f64];
    fn edge_moments(&self) -> &[f64];
}

/// Gradient of the joint log-probability `log p(S, θ)` given unclamped
/// expectations: `Σ_n s_i s_j − N⟨s_i s_j⟩ − w/σ_w²` per edge and
/// `Σ_n s_i − N⟨s_i⟩ − b/σ_b²` per bias.
pub fn grad_log_joint(
    suff: &SuffStats,
    prior: &GaussianPrior,
    params: &ParamVector,
    unclamped: &dyn Expectations,
) -> Result<Vec<f64>> {
    let layout = &params.layout;
    let (edges, nodes) = (unclamped.edge_moments(), unclamped.node_marginals());
    if edges.len() != layout.n_edges() || suff.edge_sums.len() != layout.n_edges() {
        return Err(Error::LayoutMismatch { expected: layout.n_edges(), found: edges.len() });
    }
    if nodes.len() != layout.k() || suff.node_sums.len() != layout.k() {
        return Err(Error::LayoutMismatch { expected: layout.k(), found: nodes.len() });
    }
    check_unit(edges, "edge moment")?;
    check_unit(nodes, "node marginal")?;
    let n = suff.n_rows as f64;
    let mut grad = grad_log_prior(prior, params);
    for (e, g) in grad[..layout.n_edges()].iter_mut().enumerate() {
        *g += suff.edge_sums[e] as f64 - n * edges[e];
    }
    for (i, g) in grad[layout.n_edges()..].iter_mut().enumerate() {
        *g += suff.node_sums[i] as f64 - n * nodes[i];
    }
    Ok(grad)
}

fn check_unit(values: &[f64], what: &str) -> Result<()> {
    const SLACK: f64 = 1e-12;
    for &v in values {
        if !(-SLACK..=1.0 + SLACK).contains(&v) {
            return Err(Error::ExpectationOutOfRange { what: what.into(), value: v });
        }
    }
    Ok(())
}
