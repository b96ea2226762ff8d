//! Tree-structured variational lower bound on `log Z`.
//!
//! The variational family is every distribution that factorizes over a fixed
//! spanning forest of the model graph:
//! `q(s) ∝ exp(Σ_{(i,j)∈T} θ_ij s_i s_j + Σ_i φ_i s_i)`. For any such `q`,
//! `F(q) = Σ_{all edges} W_ij E_q[s_i s_j] + Σ_i b_i E_q[s_i] + H(q) ≤ log Z`.
//! Expectations on non-tree edges are computed exactly by re-running the
//! forest sum-product with one endpoint clamped.

use serde::{Deserialize, Serialize};

use super::{InferenceMethod, InferenceResult};
use crate::error::{Error, Result};
use crate::model::{Layout, Model};

/// A spanning tree (or forest, for disconnected graphs) of model edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStructure {
    pub k: usize,
    pub edges: Vec<(usize, usize)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

pub(crate) fn count_components(layout: &Layout) -> usize {
    let mut uf = UnionFind::new(layout.k());
    let merges = layout.edges().iter().filter(|&&(i, j)| uf.union(i, j)).count();
    layout.k() - merges
}

/// Maximum-|w| spanning forest by greedy (Kruskal) insertion. Ties are broken
/// by lexicographic `(i, j)`, earlier pairs first.
pub fn select_tree(model: &Model) -> TreeStructure {
    let edges = model.layout().edges();
    let w = model.weights();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(edges[a].cmp(&edges[b])));
    let mut uf = UnionFind::new(model.k());
    let mut chosen: Vec<(usize, usize)> =
        order.into_iter().map(|e| edges[e]).filter(|&(i, j)| uf.union(i, j)).collect();
    chosen.sort_unstable();
    TreeStructure { k: model.k(), edges: chosen }
}

impl TreeStructure {
    /// Checks acyclicity, that every tree edge exists in `model`, and that
    /// the forest spans each connected component of the model graph.
    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.k != model.k() {
            return Err(Error::LengthMismatch { expected: model.k(), found: self.k });
        }
        let mut uf = UnionFind::new(self.k);
        for &(i, j) in &self.edges {
            if model.layout().edge_index(i, j).is_none() {
                return Err(Error::InvalidModel(format!("tree edge ({i}, {j}) is not a model edge")));
            }
            if !uf.union(i, j) {
                return Err(Error::InvalidModel(format!("tree edge ({i}, {j}) closes a cycle")));
            }
        }
        if self.edges.len() + count_components(model.layout()) != self.k {
            return Err(Error::InvalidModel("tree does not span every component".into()));
        }
        Ok(())
    }
}

#[inline]
fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Rooted traversal of a forest, reused across sum-product passes.
#[derive(Debug, Clone)]
pub(crate) struct Forest {
    k: usize,
    /// Nodes in breadth-first order, roots before their descendants.
    order: Vec<usize>,
    /// `(parent, tree edge index)` for non-roots.
    parent: Vec<Option<(usize, usize)>>,
    roots: Vec<usize>,
}

/// Exact marginals of a forest-structured binary model.
#[derive(Debug, Clone)]
pub(crate) struct ForestMarginals {
    pub log_z: f64,
    pub node: Vec<f64>,
    /// `P(s_child = 1, s_parent = 1)` per tree edge.
    pub edge: Vec<f64>,
}

impl Forest {
    pub fn new(k: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); k];
        for (t, &(i, j)) in edges.iter().enumerate() {
            adj[i].push((j, t));
            adj[j].push((i, t));
        }
        let mut parent = vec![None; k];
        let mut seen = vec![false; k];
        let mut order = Vec::with_capacity(k);
        let mut roots = Vec::new();
        for r in 0..k {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            roots.push(r);
            let start = order.len();
            order.push(r);
            let mut head = start;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &(u, t) in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        parent[u] = Some((v, t));
                        order.push(u);
                    }
                }
            }
        }
        Self { k, order, parent, roots }
    }

    /// Two-pass sum-product. `clamp` fixes one node to 1.
    pub fn marginals(&self, fields: &[f64], couplings: &[f64], clamp: Option<usize>) -> ForestMarginals {
        let k = self.k;
        let mut local = vec![[0.0f64; 2]; k];
        for v in 0..k {
            local[v] = [0.0, fields[v]];
        }
        if let Some(c) = clamp {
            local[c][0] = f64::NEG_INFINITY;
        }
        let mut up = vec![[0.0f64; 2]; k];
        for &v in self.order.iter().rev() {
            if let Some((p, t)) = self.parent[v] {
                let [l0, l1] = local[v];
                up[v] = [lse2(l0, l1), lse2(l0, l1 + couplings[t])];
                local[p][0] += up[v][0];
                local[p][1] += up[v][1];
            }
        }
        let log_z = self.roots.iter().map(|&r| lse2(local[r][0], local[r][1])).sum();
        let mut outside = vec![[0.0f64; 2]; k];
        let mut node = vec![0.0; k];
        let mut edge = vec![0.0; k.saturating_sub(self.roots.len())];
        for &v in &self.order {
            if let Some((p, t)) = self.parent[v] {
                let theta = couplings[t];
                // parent's belief with v's own upward message removed
                let cav = [
                    local[p][0] - up[v][0] + outside[p][0],
                    local[p][1] - up[v][1] + outside[p][1],
                ];
                outside[v] = [lse2(cav[0], cav[1]), lse2(cav[0], cav[1] + theta)];
                let joint = [
                    local[v][0] + cav[0],
                    local[v][0] + cav[1],
                    local[v][1] + cav[0],
                    local[v][1] + cav[1] + theta,
                ];
                let norm = lse2(lse2(joint[0], joint[1]), lse2(joint[2], joint[3]));
                edge[t] = (joint[3] - norm).exp();
            }
            let b0 = local[v][0] + outside[v][0];
            let b1 = local[v][1] + outside[v][1];
            node[v] = (b1 - lse2(b0, b1)).exp();
        }
        ForestMarginals { log_z, node, edge }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Stop once a full coordinate pass raises the bound by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 500 }
    }
}

/// Evaluates the bound for natural parameters `[φ…, θ…]` of `q`.
pub(crate) struct TreeObjective<'a> {
    model: &'a Model,
    forest: Forest,
    tree_edge_model_index: Vec<usize>,
    /// Non-tree model edges grouped by the endpoint that gets clamped.
    off_tree: Vec<(usize, Vec<(usize, usize)>)>,
}

pub(crate) struct TreeEval {
    pub bound: f64,
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl<'a> TreeObjective<'a> {
    pub fn new(model: &'a Model, tree: &TreeStructure) -> Result<Self> {
        tree.validate(model)?;
        let layout = model.layout();
        let forest = Forest::new(model.k(), &tree.edges);
        let tree_edge_model_index: Vec<usize> =
            tree.edges.iter().map(|&(i, j)| layout.edge_index(i, j).expect("validated")).collect();
        let mut in_tree = vec![false; layout.n_edges()];
        for &e in &tree_edge_model_index {
            in_tree[e] = true;
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
        for (e, &(i, j)) in layout.edges().iter().enumerate() {
            if !in_tree[e] {
                groups.entry(i).or_default().push((j, e));
            }
        }
        Ok(Self { model, forest, tree_edge_model_index, off_tree: groups.into_iter().collect() })
    }

    pub fn n_params(&self) -> usize {
        self.model.k() + self.tree_edge_model_index.len()
    }

    pub fn eval(&self, natural: &[f64]) -> TreeEval {
        let k = self.model.k();
        let (fields, couplings) = natural.split_at(k);
        let base = self.forest.marginals(fields, couplings, None);
        let mut edge = vec![0.0; self.model.layout().n_edges()];
        for (t, &e) in self.tree_edge_model_index.iter().enumerate() {
            edge[e] = base.edge[t];
        }
        for (i, partners) in &self.off_tree {
            let cond = self.forest.marginals(fields, couplings, Some(*i));
            for &(j, e) in partners {
                edge[e] = base.node[*i] * cond.node[j];
            }
        }
        let w = self.model.weights();
        let b = self.model.biases();
        let energy: f64 = w.iter().zip(&edge).map(|(w, m)| w * m).sum::<f64>()
            + b.iter().zip(&base.node).map(|(b, m)| b * m).sum::<f64>();
        let natural_dot: f64 = fields.iter().zip(&base.node).map(|(f, m)| f * m).sum::<f64>()
            + couplings.iter().zip(&base.edge).map(|(c, m)| c * m).sum::<f64>();
        let entropy = base.log_z - natural_dot;
        TreeEval { bound: energy + entropy, node: base.node, edge }
    }
}

/// Natural parameters of the factorized distribution with marginals `m`.
pub(crate) fn natural_from_marginals(m: &[f64], n_tree_edges: usize) -> Vec<f64> {
    let mut nat: Vec<f64> = m
        .iter()
        .map(|&p| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            (p / (1.0 - p)).ln()
        })
        .collect();
    nat.extend(std::iter::repeat_n(0.0, n_tree_edges));
    nat
}

/// Maximizes the tree bound from initial marginals `init` (defaults to 1/2).
/// With `init` taken from a converged mean-field run, the starting bound
/// equals the mean-field bound.
pub fn tree_bound(
    model: &Model,
    tree: &TreeStructure,
    init: Option<&[f64]>,
    config: &TreeConfig,
) -> Result<InferenceResult> {
    let objective = TreeObjective::new(model, tree)?;
    let init = match init {
        Some(m) if m.len() != model.k() => {
            return Err(Error::LengthMismatch { expected: model.k(), found: m.len() })
        }
        Some(m) => m.to_vec(),
        None => vec![0.5; model.k()],
    };
    let natural = natural_from_marginals(&init, tree.edges.len());
    Ok(optimize(&objective, natural, config)?.0)
}

/// Like [`tree_bound`] but starting from natural parameters `[φ…, θ…]` of a
/// previous fit, and returning the optimized parameters for the next warm
/// start.
pub fn tree_bound_warm(
    model: &Model,
    tree: &TreeStructure,
    natural: Vec<f64>,
    config: &TreeConfig,
) -> Result<(InferenceResult, Vec<f64>)> {
    let objective = TreeObjective::new(model, tree)?;
    if natural.len() != objective.n_params() {
        return Err(Error::LengthMismatch { expected: objective.n_params(), found: natural.len() });
    }
    optimize(&objective, natural, config)
}

/// Coordinate ascent: a finite-difference Newton step per coordinate, halved
/// until the bound strictly improves; otherwise the coordinate is left alone.
fn optimize(
    objective: &TreeObjective<'_>,
    mut natural: Vec<f64>,
    config: &TreeConfig,
) -> Result<(InferenceResult, Vec<f64>)> {
    const H: f64 = 1e-4;
    const MAX_STEP: f64 = 4.0;
    let mut current = objective.eval(&natural);
    if !current.bound.is_finite() {
        return Err(Error::NonFinite("tree bound at initialization".into()));
    }
    let mut trace = vec![current.bound];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let start = current.bound;
        for c in 0..natural.len() {
            let x0 = natural[c];
            natural[c] = x0 + H;
            let up = objective.eval(&natural).bound;
            natural[c] = x0 - H;
            let down = objective.eval(&natural).bound;
            natural[c] = x0;
            let grad = (up - down) / (2.0 * H);
            let curv = (up - 2.0 * current.bound + down) / (H * H);
            if !grad.is_finite() || grad.abs() < 1e-13 {
                continue;
            }
            let mut step = if curv < 0.0 { -grad / curv } else { grad.signum() * 0.5 };
            step = step.clamp(-MAX_STEP, MAX_STEP);
            for _ in 0..30 {
                natural[c] = x0 + step;
                let trial = objective.eval(&natural);
                if trial.bound.is_finite() && trial.bound > current.bound {
                    current = trial;
                    break;
                }
                natural[c] = x0;
                step *= 0.5;
            }
        }
        trace.push(current.bound);
        if current.bound - start < config.tol {
            converged = true;
            break;
        }
    }
    let result = InferenceResult {
        method: InferenceMethod::Tree,
        log_z_estimate: current.bound,
        node_marginals: current.node,
        edge_moments: current.edge,
        converged,
        iterations,
        bound_trace: trace,
    };
    Ok((result, natural))
}
