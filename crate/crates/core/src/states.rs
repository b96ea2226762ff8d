//! MCMC over variable states at fixed parameters.
//!
//! Gibbs sweeps for Boltzmann machines, brief chains started at the data,
//! long-run moment estimation, Swendsen–Wang for agreement models
//! `exp{Σ W_ij δ(s_i, s_j)}` with `W_ij ≥ 0`, and the importance estimator
//! `Z(W)/Z(W') = ⟨exp{Σ ΔW s_i s_j + Σ Δb s_i}⟩_{p(s|W')}`.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::approx::sigmoid;
use crate::error::{Error, Result};
use crate::model::{DataSet, Expectations, Model};
use crate::ChainRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    /// Nodes in index order.
    #[default]
    Systematic,
    /// `k` uniformly chosen nodes per sweep.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateChainConfig {
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default)]
    pub scan: ScanOrder,
}

impl Default for StateChainConfig {
    fn default() -> Self {
        Self { n_sweeps: 10_000, burn_in: 1_000, seed: 0, scan: ScanOrder::Systematic }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSource {
    Brief,
    LongRun,
    Exact,
    Bp,
    MeanField,
    Tree,
}

/// Node and edge expectation estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub source: MomentSource,
    pub node_marginals: Vec<f64>,
    pub edge_moments: Vec<f64>,
    pub n_samples: usize,
    /// Batch-means standard errors, when the estimator provides them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub node_se: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_se: Vec<f64>,
}

impl Expectations for MomentEstimate {
    fn node_marginals(&self) -> &[f64] {
        &self.node_marginals
    }
    fn edge_moments(&self) -> &[f64] {
        &self.edge_moments
    }
}

/// Resamples every node once from `p(s_i = 1 | s_−i) = σ(b_i + Σ_j W_ij s_j)`.
pub fn gibbs_sweep<R: Rng + ?Sized>(model: &Model, state: &mut [u8], rng: &mut R, order: ScanOrder) {
    let k = model.k();
    match order {
        ScanOrder::Systematic => {
            for i in 0..k {
                gibbs_update(model, state, i, rng);
            }
        }
        ScanOrder::Random => {
            for _ in 0..k {
                let i = rng.random_range(0..k);
                gibbs_update(model, state, i, rng);
            }
        }
    }
}

#[inline]
fn gibbs_update<R: Rng + ?Sized>(model: &Model, state: &mut [u8], i: usize, rng: &mut R) {
    let p = sigmoid(model.field(i, state));
    state[i] = u8::from(rng.random::<f64>() < p);
}

/// Accumulates node and edge indicators of visited states.
struct MomentAccumulator {
    node: Vec<f64>,
    edge: Vec<f64>,
    n: usize,
}

impl MomentAccumulator {
    fn new(model: &Model) -> Self {
        Self { node: vec![0.0; model.k()], edge: vec![0.0; model.layout().n_edges()], n: 0 }
    }

    fn add(&mut self, model: &Model, state: &[u8], weight: f64) {
        for (i, &s) in state.iter().enumerate() {
            if s == 1 {
                self.node[i] += weight;
            }
        }
        for (e, &(i, j)) in model.layout().edges().iter().enumerate() {
            if state[i] == 1 && state[j] == 1 {
                self.edge[e] += weight;
            }
        }
        self.n += 1;
    }

    fn mean(&self, total_weight: f64) -> (Vec<f64>, Vec<f64>) {
        let scale = |v: &Vec<f64>| v.iter().map(|x| (x / total_weight).clamp(0.0, 1.0)).collect();
        (scale(&self.node), scale(&self.edge))
    }
}

/// Brief sampling: one chain per data point (multiplicities expanded),
/// started at that point and run for `n_sweeps` Gibbs sweeps; the estimate
/// averages the final states.
pub fn brief_moments<R: Rng + ?Sized>(
    model: &Model,
    data: &DataSet,
    n_sweeps: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if data.k() != model.k() {
        return Err(Error::LengthMismatch { expected: model.k(), found: data.k() });
    }
    if !data.is_fully_observed() {
        return Err(Error::HiddenEntries);
    }
    if n_sweeps == 0 {
        return Err(Error::InvalidConfig("brief sampling needs at least one sweep".into()));
    }
    let mut acc = MomentAccumulator::new(model);
    let mut state = vec![0u8; model.k()];
    for row in data.expanded() {
        state.copy_from_slice(row);
        for _ in 0..n_sweeps {
            gibbs_sweep(model, &mut state, rng, ScanOrder::Systematic);
        }
        acc.add(model, &state, 1.0);
    }
    if acc.n == 0 {
        return Err(Error::InvalidData("brief sampling needs at least one data row".into()));
    }
    let (node, edge) = acc.mean(acc.n as f64);
    Ok(MomentEstimate {
        source: MomentSource::Brief,
        node_marginals: node,
        edge_moments: edge,
        n_samples: acc.n,
        node_se: Vec::new(),
        edge_se: Vec::new(),
    })
}

/// Moments from one persistent Gibbs chain, seeded from `config.seed` and
/// started at the all-zero state.
pub fn long_run_moments(model: &Model, config: &StateChainConfig) -> Result<MomentEstimate> {
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut state = vec![0u8; model.k()];
    long_run_moments_from(model, config, &mut state, &mut rng)
}

/// Moments from `config.burn_in` discarded then `config.n_sweeps` kept
/// sweeps, continuing from `state` (left at the final state). Standard
/// errors come from 20 batch means.
pub fn long_run_moments_from<R: Rng + ?Sized>(
    model: &Model,
    config: &StateChainConfig,
    state: &mut [u8],
    rng: &mut R,
) -> Result<MomentEstimate> {
    crate::model::check_state(model.k(), state)?;
    if config.n_sweeps == 0 {
        return Err(Error::InvalidConfig("long-run sampling needs at least one kept sweep".into()));
    }
    for _ in 0..config.burn_in {
        gibbs_sweep(model, state, rng, config.scan);
    }
    const BATCHES: usize = 20;
    let batch_len = (config.n_sweeps / BATCHES).max(1);
    let mut total = MomentAccumulator::new(model);
    let mut batch = MomentAccumulator::new(model);
    let mut batch_means: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for _ in 0..config.n_sweeps {
        gibbs_sweep(model, state, rng, config.scan);
        total.add(model, state, 1.0);
        batch.add(model, state, 1.0);
        if batch.n == batch_len {
            batch_means.push(batch.mean(batch_len as f64));
            batch = MomentAccumulator::new(model);
        }
    }
    let (node, edge) = total.mean(total.n as f64);
    let (node_se, edge_se) = if batch_means.len() >= 2 {
        let b = batch_means.len() as f64;
        let se = |mean: &[f64], pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
            (0..mean.len())
                .map(|c| {
                    let m = batch_means.iter().map(|x| pick(x)[c]).sum::<f64>() / b;
                    let var = batch_means.iter().map(|x| (pick(x)[c] - m).powi(2)).sum::<f64>() / (b - 1.0);
                    (var / b).sqrt()
                })
                .collect()
        };
        (se(&node, &|x| &x.0), se(&edge, &|x| &x.1))
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(MomentEstimate {
        source: MomentSource::LongRun,
        node_marginals: node,
        edge_moments: edge,
        n_samples: total.n,
        node_se,
        edge_se,
    })
}

/// Agreement model `p(s) ∝ exp{Σ_{i<j} W_ij δ(s_i, s_j)}` over binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementModel {
    pub k: usize,
    /// `(i, j, W_ij)` with `i < j`.
    pub couplings: Vec<(usize, usize, f64)>,
}

impl AgreementModel {
    pub fn new(k: usize, couplings: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, w) in &couplings {
            if i >= k || j >= k || i == j {
                return Err(Error::InvalidModel(format!("coupling ({i}, {j}) invalid for k = {k}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidModel("couplings must be finite".into()));
            }
        }
        Ok(Self { k, couplings })
    }

    /// `Σ W_ij δ(s_i, s_j)`.
    pub fn log_unnorm(&self, state: &[u8]) -> f64 {
        self.couplings.iter().filter(|&&(i, j, _)| state[i] == state[j]).map(|c| c.2).sum()
    }

    /// Equivalent Boltzmann machine: `W δ(s_i,s_j) = 2W s_i s_j − W s_i − W s_j + W`.
    /// Returns the model and the constant `Σ W_ij` dropped from its exponent.
    pub fn to_boltzmann(&self) -> Result<(Model, f64)> {
        let mut biases = vec![0.0; self.k];
        let mut edges = Vec::with_capacity(self.couplings.len());
        let mut constant = 0.0;
        for &(i, j, w) in &self.couplings {
            edges.push((i, j, 2.0 * w));
            biases[i] -= w;
            biases[j] -= w;
            constant += w;
        }
        Ok((Model::new(self.k, edges, biases)?, constant))
    }
}

/// Union–find with path halving, sized for one sweep.
struct Clusters {
    parent: Vec<usize>,
}

impl Clusters {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// One Swendsen–Wang update: agreeing pairs are bonded with probability
/// `1 − e^{−W_ij}`, then each cluster is relabelled uniformly. Clusters
/// containing a `frozen` node keep their labels, which is the conditional
/// update with those nodes clamped.
pub fn swendsen_wang_sweep<R: Rng + ?Sized>(
    model: &AgreementModel,
    state: &mut [u8],
    frozen: Option<&[bool]>,
    rng: &mut R,
) -> Result<()> {
    crate::model::check_state(model.k, state)?;
    let mut clusters = Clusters::new(model.k);
    for &(i, j, w) in &model.couplings {
        if w < 0.0 {
            return Err(Error::NegativeCoupling { i, j, weight: w });
        }
        if state[i] == state[j] && rng.random::<f64>() < -(-w).exp_m1() {
            clusters.union(i, j);
        }
    }
    let mut pinned = vec![false; model.k];
    if let Some(frozen) = frozen {
        for (i, &f) in frozen.iter().enumerate() {
            if f {
                let r = clusters.find(i);
                pinned[r] = true;
            }
        }
    }
    let mut label: Vec<Option<u8>> = vec![None; model.k];
    for i in 0..model.k {
        let r = clusters.find(i);
        if pinned[r] {
            continue;
        }
        let l = *label[r].get_or_insert_with(|| u8::from(rng.random::<bool>()));
        state[i] = l;
    }
    Ok(())
}

/// Importance estimate of `Z(W)/Z(W')` from states drawn under `W'`.
pub fn ratio_estimate(model: &Model, model_prime: &Model, states: &[Vec<u8>]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidData("ratio estimate needs at least one state".into()));
    }
    let total = ratio_estimate_weighted(model, model_prime, states.iter().map(|s| (s.as_slice(), 1.0)))?;
    Ok(total / states.len() as f64)
}

/// `Σ_s weight(s)·exp{log_unnorm_W(s) − log_unnorm_W'(s)}`; with the exact
/// probabilities of `p(s|W')` as weights this is `Z(W)/Z(W')` exactly.
pub fn ratio_estimate_weighted<'a>(
    model: &Model,
    model_prime: &Model,
    weighted: impl IntoIterator<Item = (&'a [u8], f64)>,
) -> Result<f64> {
    if model.layout() != model_prime.layout() {
        return Err(Error::InvalidModel("ratio estimate needs two models on one layout".into()));
    }
    let delta = Model::from_parts(
        model.layout().clone(),
        model.weights().iter().zip(model_prime.weights()).map(|(a, b)| a - b).collect(),
        model.biases().iter().zip(model_prime.biases()).map(|(a, b)| a - b).collect(),
    )?;
    let mut total = 0.0;
    for (s, w) in weighted {
        crate::model::check_state(model.k(), s)?;
        total += w * delta.log_unnorm_unchecked(s).exp();
    }
    Ok(total)
}
