//! Hidden variables and the two-parameter semi-supervised random field.
//!
//! With hidden entries, `log p(x|θ) = log Z_x(θ) − log Z(θ)` where `Z_x`
//! sums the unnormalized probability over the hidden part of the row.
//!
//! The semi-supervised model places the labels of `n` points in an
//! agreement model `p(s) ∝ exp{Σ_{i<j} W_ij δ(s_i, s_j)}` with
//! `W_ij = exp(−½[(x_i−x_j)²/σ_x² + (y_i−y_j)²/σ_y²])`. Labelled points are
//! observed, the rest hidden, and `(log σ_x, log σ_y)` is sampled.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::approx::{loopy_bp_warm, BpConfig};
use crate::error::{Error, Result};
use crate::exact::{posterior_grid_by, Enumeration, GridSpec, PosteriorGrid, DEFAULT_CAP};
use crate::model::{Layout, Model, HIDDEN};
use crate::states::{swendsen_wang_sweep, AgreementModel};
use crate::ChainRng;

/// A model restricted to the hidden entries of one row.
#[derive(Debug, Clone)]
pub struct Conditioned {
    /// Original indices of the hidden nodes, in order.
    pub hidden: Vec<usize>,
    /// Model over the hidden nodes; `None` when nothing is hidden.
    pub model: Option<Model>,
    /// Log-probability contribution of the observed entries alone.
    pub constant: f64,
}

/// Folds the observed entries of `row` into biases of a model over the
/// hidden entries.
pub fn condition(model: &Model, row: &[u8]) -> Result<Conditioned> {
    let k = model.k();
    if row.len() != k {
        return Err(Error::LengthMismatch { expected: k, found: row.len() });
    }
    if let Some((index, &value)) = row.iter().enumerate().find(|(_, &v)| v > 1 && v != HIDDEN) {
        return Err(Error::NonBinary { index, value });
    }
    let hidden: Vec<usize> = (0..k).filter(|&i| row[i] == HIDDEN).collect();
    let mut pos = vec![usize::MAX; k];
    for (h, &i) in hidden.iter().enumerate() {
        pos[i] = h;
    }
    let on = |i: usize| row[i] == 1;
    let mut constant = 0.0;
    let mut biases: Vec<f64> = hidden.iter().map(|&i| model.biases()[i]).collect();
    let mut edges = Vec::new();
    for (i, b) in model.biases().iter().enumerate() {
        if on(i) {
            constant += b;
        }
    }
    for (&(i, j), &w) in model.layout().edges().iter().zip(model.weights()) {
        match (row[i] == HIDDEN, row[j] == HIDDEN) {
            (false, false) if on(i) && on(j) => constant += w,
            (false, false) => {}
            (true, false) if on(j) => biases[pos[i]] += w,
            (false, true) if on(i) => biases[pos[j]] += w,
            (true, true) => edges.push((pos[i], pos[j], w)),
            _ => {}
        }
    }
    let reduced = if hidden.is_empty() { None } else { Some(Model::new(hidden.len(), edges, biases)?) };
    Ok(Conditioned { hidden, model: reduced, constant })
}

/// How `log Z_x` of the hidden part is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ZxEstimator {
    Exact { cap: usize },
    Bethe(BpConfig),
}

impl Default for ZxEstimator {
    fn default() -> Self {
        ZxEstimator::Exact { cap: DEFAULT_CAP }
    }
}

/// `log Σ_h exp(log_unnorm(x, h))`.
pub fn clamped_log_zx(model: &Model, row: &[u8], estimator: ZxEstimator) -> Result<f64> {
    let c = condition(model, row)?;
    let Some(reduced) = c.model else { return Ok(c.constant) };
    let inner = match estimator {
        ZxEstimator::Exact { cap } => Enumeration::with_cap(&reduced, cap)?.log_z(),
        ZxEstimator::Bethe(cfg) => loopy_bp_warm(&reduced, &cfg, &mut Vec::new())?.log_z_estimate,
    };
    Ok(c.constant + inner)
}

/// Exact `log p(x|θ) = log Z_x − log Z`, never positive.
pub fn hidden_loglik(model: &Model, row: &[u8]) -> Result<f64> {
    let zx = clamped_log_zx(model, row, ZxEstimator::default())?;
    let z = Enumeration::new(model)?.log_z();
    Ok((zx - z).min(0.0))
}

/// Exact node marginals and edge moments given the observed part of `row`.
pub fn clamped_moments(model: &Model, row: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = condition(model, row)?;
    let mut node: Vec<f64> = row.iter().map(|&v| if v == 1 { 1.0 } else { 0.0 }).collect();
    let mut pos = vec![usize::MAX; model.k()];
    let mut reduced_edges = None;
    if let Some(reduced) = &c.model {
        let m = Enumeration::new(reduced)?.moments(reduced);
        for (h, &i) in c.hidden.iter().enumerate() {
            pos[i] = h;
            node[i] = m.node_marginals[h];
        }
        reduced_edges = Some((reduced.layout().clone(), m.edge_moments));
    }
    let edge = model
        .layout()
        .edges()
        .iter()
        .map(|&(i, j)| match (row[i] == HIDDEN, row[j] == HIDDEN) {
            (true, true) => {
                let (layout, moments) = reduced_edges.as_ref().expect("hidden nodes present");
                moments[layout.edge_index(pos[i], pos[j]).expect("edge kept")]
            }
            _ => node[i] * node[j],
        })
        .collect();
    Ok((node, edge))
}

/// Class of a point, or unlabelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Zero,
    One,
    Unlabelled,
}

impl Label {
    pub fn value(self) -> Option<u8> {
        match self {
            Label::Zero => Some(0),
            Label::One => Some(1),
            Label::Unlabelled => None,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(Label::Zero),
            "1" => Ok(Label::One),
            "?" => Ok(Label::Unlabelled),
            other => Err(Error::InvalidData(format!("label `{other}` is not 0, 1 or ?"))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Label::Zero => "0",
            Label::One => "1",
            Label::Unlabelled => "?",
        }
    }
}

/// Points in the plane with optional binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<(f64, f64)>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    label: String,
}

impl PointSet {
    pub fn new(points: Vec<(f64, f64)>, labels: Vec<Label>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: points.len(), found: labels.len() });
        }
        if points.len() < 2 {
            return Err(Error::InvalidData("a point set needs at least two points".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidData("point coordinates must be finite".into()));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Observed row for the converted model: labels or [`HIDDEN`].
    pub fn row(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.value().unwrap_or(HIDDEN)).collect()
    }

    pub fn frozen(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.value().is_some()).collect()
    }

    pub fn n_labelled(&self) -> usize {
        self.labels.iter().filter(|l| l.value().is_some()).count()
    }

    /// Reads `x,y,label` CSV with labels `0`, `1` or `?`.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for row in rdr.deserialize() {
            let r: PointRow = row?;
            points.push((r.x, r.y));
            labels.push(Label::parse(&r.label)?);
        }
        Self::new(points, labels)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,label")?;
        for ((x, y), l) in self.points.iter().zip(&self.labels) {
            writeln!(out, "{x},{y},{}", l.as_str())?;
        }
        Ok(())
    }
}

/// `(log σ_x, log σ_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams {
    pub log_sigma_x: f64,
    pub log_sigma_y: f64,
}

impl SigmaParams {
    pub fn new(log_sigma_x: f64, log_sigma_y: f64) -> Self {
        Self { log_sigma_x, log_sigma_y }
    }

    pub fn from_sigma(sigma_x: f64, sigma_y: f64) -> Self {
        Self::new(sigma_x.ln(), sigma_y.ln())
    }

    pub fn sigma_x(&self) -> f64 {
        self.log_sigma_x.exp()
    }

    pub fn sigma_y(&self) -> f64 {
        self.log_sigma_y.exp()
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.log_sigma_x, self.log_sigma_y]
    }
}

/// `(i, j, W_ij)` for every pair `i < j`.
pub fn build_weights(points: &PointSet, sigma: SigmaParams) -> Vec<(usize, usize, f64)> {
    let (sx2, sy2) = (sigma.sigma_x().powi(2), sigma.sigma_y().powi(2));
    let p = &points.points;
    let mut out = Vec::with_capacity(p.len() * (p.len() - 1) / 2);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let (dx, dy) = (p[i].0 - p[j].0, p[i].1 - p[j].1);
            out.push((i, j, (-0.5 * (dx * dx / sx2 + dy * dy / sy2)).exp()));
        }
    }
    out
}

pub fn agreement_model(points: &PointSet, sigma: SigmaParams) -> Result<AgreementModel> {
    AgreementModel::new(points.len(), build_weights(points, sigma))
}

/// Boltzmann-machine form of the label model: edge weights `2W_ij`, biases
/// `−Σ_j W_ij`, and the constant `Σ_{i<j} W_ij` dropped from the exponent.
#[derive(Debug, Clone)]
pub struct SemisupBm {
    pub model: Model,
    pub constant: f64,
    /// Labels as a data row, hidden where unlabelled.
    pub row: Vec<u8>,
}

pub fn semisup_to_bm(points: &PointSet, sigma: SigmaParams) -> Result<SemisupBm> {
    let (model, constant) = agreement_model(points, sigma)?.to_boltzmann()?;
    Ok(SemisupBm { model, constant, row: points.row() })
}

/// Exact `log p(observed labels | σ)` by enumeration.
pub fn semisup_log_likelihood(points: &PointSet, sigma: SigmaParams) -> Result<f64> {
    let bm = semisup_to_bm(points, sigma)?;
    let zx = clamped_log_zx(&bm.model, &bm.row, ZxEstimator::default())?;
    Ok(zx - Enumeration::new(&bm.model)?.log_z())
}

/// Bethe estimate of `log p(observed labels | σ)`; also reports whether
/// both BP runs converged.
pub fn semisup_log_likelihood_bethe(points: &PointSet, sigma: SigmaParams, bp: &BpConfig) -> Result<(f64, bool)> {
    let bm = semisup_to_bm(points, sigma)?;
    let c = condition(&bm.model, &bm.row)?;
    let full = loopy_bp_warm(&bm.model, bp, &mut Vec::new())?;
    let (zx, conv) = match &c.model {
        Some(m) => {
            let r = loopy_bp_warm(m, bp, &mut Vec::new())?;
            (c.constant + r.log_z_estimate, r.converged)
        }
        None => (c.constant, true),
    };
    Ok((zx - full.log_z_estimate, conv && full.converged))
}

/// `d W_ij / d log σ_a = W_ij · (a_i − a_j)² / σ_a²` for both axes.
fn weight_log_sigma_derivatives(points: &PointSet, sigma: SigmaParams) -> Vec<(usize, usize, f64, [f64; 2])> {
    let (sx2, sy2) = (sigma.sigma_x().powi(2), sigma.sigma_y().powi(2));
    build_weights(points, sigma)
        .into_iter()
        .map(|(i, j, w)| {
            let (dx, dy) = (points.points[i].0 - points.points[j].0, points.points[i].1 - points.points[j].1);
            (i, j, w, [w * dx * dx / sx2, w * dy * dy / sy2])
        })
        .collect()
}

fn agreement_from_moments(edges: &[(usize, usize)], node: &[f64], edge: &[f64]) -> Vec<f64> {
    edges.iter().zip(edge).map(|(&(i, j), &m)| (1.0 - node[i] - node[j] + 2.0 * m).clamp(0.0, 1.0)).collect()
}

/// Exact `∇_{log σ} log p(labels | σ)` from enumerated clamped and unclamped
/// agreement probabilities.
pub fn semisup_grad_logsigma_exact(points: &PointSet, sigma: SigmaParams) -> Result<[f64; 2]> {
    let bm = semisup_to_bm(points, sigma)?;
    let edges = bm.model.layout().edges().to_vec();
    let free = Enumeration::new(&bm.model)?.moments(&bm.model);
    let unclamped = agreement_from_moments(&edges, &free.node_marginals, &free.edge_moments);
    let (cn, ce) = clamped_moments(&bm.model, &bm.row)?;
    let clamped = agreement_from_moments(&edges, &cn, &ce);
    Ok(combine_gradient(points, sigma, &clamped, &unclamped))
}

fn combine_gradient(points: &PointSet, sigma: SigmaParams, clamped: &[f64], unclamped: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (e, (_, _, _, d)) in weight_log_sigma_derivatives(points, sigma).into_iter().enumerate() {
        let diff = clamped[e] - unclamped[e];
        g[0] += diff * d[0];
        g[1] += diff * d[1];
    }
    g
}

/// Persistent Swendsen–Wang chains for the clamped and unclamped label
/// expectations.
#[derive(Debug, Clone)]
pub struct SwGradient {
    pub n_sweeps: usize,
    /// Keep chain states between calls rather than restarting.
    pub persistent: bool,
    clamped: Vec<u8>,
    unclamped: Vec<u8>,
}

impl SwGradient {
    pub fn new(points: &PointSet, n_sweeps: usize, persistent: bool) -> Self {
        let start = initial_labels(points);
        Self { n_sweeps, persistent, clamped: start.clone(), unclamped: start }
    }

    /// Gradient estimate averaging `δ(s_i, s_j)` over `n_sweeps` sweeps of
    /// each chain.
    pub fn gradient<R: Rng + ?Sized>(&mut self, points: &PointSet, sigma: SigmaParams, rng: &mut R) -> Result<[f64; 2]> {
        if self.n_sweeps == 0 {
            return Err(Error::InvalidConfig("gradient estimation needs at least one sweep".into()));
        }
        if !self.persistent {
            let start = initial_labels(points);
            self.clamped = start.clone();
            self.unclamped = start;
        }
        let model = agreement_model(points, sigma)?;
        let frozen = points.frozen();
        let m = model.couplings.len();
        let mut clamped = vec![0.0; m];
        let mut unclamped = vec![0.0; m];
        for _ in 0..self.n_sweeps {
            swendsen_wang_sweep(&model, &mut self.clamped, Some(&frozen), rng)?;
            swendsen_wang_sweep(&model, &mut self.unclamped, None, rng)?;
            for (e, &(i, j, _)) in model.couplings.iter().enumerate() {
                clamped[e] += f64::from(u8::from(self.clamped[i] == self.clamped[j]));
                unclamped[e] += f64::from(u8::from(self.unclamped[i] == self.unclamped[j]));
            }
        }
        let n = self.n_sweeps as f64;
        clamped.iter_mut().chain(unclamped.iter_mut()).for_each(|v| *v /= n);
        Ok(combine_gradient(points, sigma, &clamped, &unclamped))
    }
}

/// Labelled points at their labels, unlabelled points at 0.
fn initial_labels(points: &PointSet) -> Vec<u8> {
    points.labels.iter().map(|l| l.value().unwrap_or(0)).collect()
}

/// Class-1 probability of every point, averaged over `sigma_samples`; each
/// sample contributes the mean over `sweeps` conditional SW sweeps.
pub fn predict_labels<R: Rng + ?Sized>(
    points: &PointSet,
    sigma_samples: &[SigmaParams],
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if sigma_samples.is_empty() || sweeps == 0 {
        return Err(Error::InvalidConfig("prediction needs at least one σ sample and one sweep".into()));
    }
    let frozen = points.frozen();
    let mut state = initial_labels(points);
    let mut total = vec![0.0; points.len()];
    for &sigma in sigma_samples {
        let model = agreement_model(points, sigma)?;
        for _ in 0..sweeps {
            swendsen_wang_sweep(&model, &mut state, Some(&frozen), rng)?;
            for (t, &s) in total.iter_mut().zip(&state) {
                *t += f64::from(s);
            }
        }
    }
    let n = (sigma_samples.len() * sweeps) as f64;
    Ok(total.into_iter().map(|t| t / n).collect())
}

/// Exact conditional class-1 marginals at one σ.
pub fn exact_label_marginals(points: &PointSet, sigma: SigmaParams) -> Result<Vec<f64>> {
    let bm = semisup_to_bm(points, sigma)?;
    Ok(clamped_moments(&bm.model, &bm.row)?.0)
}

/// Settings of the log-σ samplers. The prior is flat on the box
/// `[lo, hi]²` in `(log σ_x, log σ_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemisupConfig {
    /// Stored samples.
    pub samples: usize,
    pub thinning: usize,
    pub burn_in: usize,
    pub epsilon: f64,
    pub sw_sweeps: usize,
    pub persistent: bool,
    pub box_lo: f64,
    pub box_hi: f64,
    pub init: [f64; 2],
    pub seed: u64,
    /// Random-walk std-dev of the loopy Metropolis comparison chain.
    pub proposal_std: f64,
    pub bp: BpConfig,
}

impl Default for SemisupConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            thinning: 10,
            burn_in: 1_000,
            epsilon: 0.1,
            sw_sweeps: 5,
            persistent: true,
            box_lo: -4.0,
            box_hi: 4.0,
            init: [0.0, 0.0],
            seed: 0,
            proposal_std: 0.3,
            bp: BpConfig::default(),
        }
    }
}

impl SemisupConfig {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thinning == 0 {
            return Err(Error::InvalidConfig("samples and thinning must be positive".into()));
        }
        if !(self.box_hi > self.box_lo) || !self.init.iter().all(|v| (self.box_lo..=self.box_hi).contains(v)) {
            return Err(Error::InvalidConfig("log-σ box must be non-empty and contain the initial point".into()));
        }
        if !(self.epsilon > 0.0 && self.proposal_std > 0.0) {
            return Err(Error::InvalidConfig("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Stored log-σ samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaChain {
    pub method: String,
    pub steps: Vec<usize>,
    pub samples: Vec<SigmaParams>,
    pub accept_count: usize,
    pub propose_count: usize,
    pub nonconverged_steps: usize,
}

impl SigmaChain {
    /// `step,sigma_x,sigma_y` rows.
    pub fn write_scatter_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,sigma_x,sigma_y")?;
        for (s, p) in self.steps.iter().zip(&self.samples) {
            writeln!(out, "{s},{},{}", p.sigma_x(), p.sigma_y())?;
        }
        Ok(())
    }
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    v = (v - lo).rem_euclid(2.0 * width);
    lo + if v > width { 2.0 * width - v } else { v }
}

/// Uncorrected Langevin in `(log σ_x, log σ_y)` with Swendsen–Wang gradient
/// estimates, reflected at the box edges.
pub fn run_semisup_langevin(points: &PointSet, config: &SemisupConfig) -> Result<SigmaChain> {
    config.validate()?;
    if points.n_labelled() == 0 {
        return Err(Error::InvalidData("semi-supervised sampling needs labelled points".into()));
    }
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut grad = SwGradient::new(points, config.sw_sweeps, config.persistent);
    let mut theta = config.init;
    let drift = 0.5 * config.epsilon * config.epsilon;
    let total = config.burn_in + config.samples * config.thinning;
    let mut chain = SigmaChain {
        method: "langevin/swendsen-wang".into(),
        steps: Vec::with_capacity(config.samples),
        samples: Vec::with_capacity(config.samples),
        accept_count: total,
        propose_count: total,
        nonconverged_steps: 0,
    };
    for step in 0..total {
        let g = grad.gradient(points, SigmaParams::new(theta[0], theta[1]), &mut rng)?;
        for a in 0..2 {
            let n: f64 = rng.sample(StandardNormal);
            theta[a] = reflect(theta[a] + drift * g[a] + config.epsilon * n, config.box_lo, config.box_hi);
        }
        if step >= config.burn_in && (step + 1 - config.burn_in) % config.thinning == 0 {
            chain.steps.push(step + 1);
            chain.samples.push(SigmaParams::new(theta[0], theta[1]));
        }
    }
    Ok(chain)
}

/// Random-walk Metropolis in log σ with the Bethe likelihood plugged in.
pub fn run_semisup_loopy_metropolis(points: &PointSet, config: &SemisupConfig) -> Result<SigmaChain> {
    config.validate()?;
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut theta = config.init;
    let (mut current, _) = semisup_log_likelihood_bethe(points, SigmaParams::new(theta[0], theta[1]), &config.bp)?;
    let total = config.burn_in + config.samples * config.thinning;
    let mut chain = SigmaChain {
        method: "metropolis/bethe".into(),
        steps: Vec::with_capacity(config.samples),
        samples: Vec::with_capacity(config.samples),
        accept_count: 0,
        propose_count: 0,
        nonconverged_steps: 0,
    };
    for step in 0..total {
        let mut prop = theta;
        for v in prop.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v = reflect(*v + config.proposal_std * n, config.box_lo, config.box_hi);
        }
        let (ll, converged) = semisup_log_likelihood_bethe(points, SigmaParams::new(prop[0], prop[1]), &config.bp)?;
        chain.propose_count += 1;
        chain.nonconverged_steps += usize::from(!converged);
        let u: f64 = rng.random();
        if ll.is_finite() && (ll >= current || u < (ll - current).exp()) {
            theta = prop;
            current = ll;
            chain.accept_count += 1;
        }
        if step >= config.burn_in && (step + 1 - config.burn_in) % config.thinning == 0 {
            chain.steps.push(step + 1);
            chain.samples.push(SigmaParams::new(theta[0], theta[1]));
        }
    }
    Ok(chain)
}

/// Exact posterior of `(log σ_x, log σ_y)` under the flat box prior, on the
/// given grid (which should lie inside the box).
pub fn semisup_posterior_grid(points: &PointSet, specs: [GridSpec; 2]) -> Result<PosteriorGrid> {
    posterior_grid_by(&[0, 1], &specs, 2, |t| semisup_log_likelihood(points, SigmaParams::new(t[0], t[1])))
}

/// Histogram of log-σ samples on the cells of a posterior grid, normalized.
pub fn sigma_histogram(samples: &[SigmaParams], specs: [GridSpec; 2]) -> Vec<f64> {
    let mut h = vec![0.0; specs[0].cells * specs[1].cells];
    let mut n = 0.0;
    for s in samples {
        if let (Some(a), Some(b)) = (specs[0].cell_of(s.log_sigma_x), specs[1].cell_of(s.log_sigma_y)) {
            h[a * specs[1].cells + b] += 1.0;
        }
        n += 1.0;
    }
    if n > 0.0 {
        h.iter_mut().for_each(|v| *v /= n);
    }
    h
}

fn cluster<R: Rng + ?Sized>(rng: &mut R, n: usize, centre: (f64, f64), spread: f64, label: Label) -> Vec<((f64, f64), Label)> {
    (0..n)
        .map(|_| {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            ((centre.0 + spread * dx, centre.1 + spread * dy), label)
        })
        .collect()
}

fn assemble(parts: Vec<Vec<((f64, f64), Label)>>) -> Result<PointSet> {
    let (points, labels) = parts.into_iter().flatten().unzip();
    PointSet::new(points, labels)
}

/// 80 points: a class-0 group, a class-1 group offset along both axes, and
/// an unlabelled group sharing the class-0 x-range and the class-1 y-range.
pub fn toy_points_80(seed: u64) -> Result<PointSet> {
    let mut rng = ChainRng::seed_from_u64(seed);
    assemble(vec![
        cluster(&mut rng, 20, (0.0, 0.0), 0.3, Label::Zero),
        cluster(&mut rng, 20, (3.0, 3.0), 0.3, Label::One),
        cluster(&mut rng, 40, (0.0, 3.0), 0.3, Label::Unlabelled),
    ])
}

/// The same layout at 12 points (4 per group), small enough to enumerate.
pub fn toy_points_12(seed: u64) -> Result<PointSet> {
    let mut rng = ChainRng::seed_from_u64(seed);
    assemble(vec![
        cluster(&mut rng, 4, (0.0, 0.0), 0.3, Label::Zero),
        cluster(&mut rng, 4, (3.0, 3.0), 0.3, Label::One),
        cluster(&mut rng, 4, (0.0, 3.0), 0.3, Label::Unlabelled),
    ])
}

/// Complete layout on the points of `set`, for callers that need parameter
/// coordinates of the converted model.
pub fn point_layout(set: &PointSet) -> Result<std::sync::Arc<Layout>> {
    Layout::complete(set.len())
}
