//! Brute-force enumeration over all `2^k` states.
//!
//! Exact partition functions, moments, i.i.d. samples and low-dimensional
//! parameter posteriors for small models. These serve both as the inner loop
//! of exact Metropolis and as the reference every approximation is tested
//! against.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_prior, Expectations, Model, ParamVector, SuffStats};

/// Largest node count enumerated unless a caller raises it.
pub const DEFAULT_CAP: usize = 20;

/// `log(Σ exp(x))` accumulated with a running maximum, in iteration order.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in values {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if v > max {
            sum = sum * (max - v).exp() + 1.0;
            max = v;
        } else {
            sum += (v - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + sum.ln()
    }
}

/// Decodes bit `i` of `mask` into `state[i]`.
pub fn mask_to_state(mask: usize, k: usize) -> Vec<u8> {
    (0..k).map(|i| ((mask >> i) & 1) as u8).collect()
}

/// Unnormalized log-probabilities of every state, indexed by bitmask.
#[derive(Debug, Clone)]
pub struct Enumeration {
    k: usize,
    energies: Vec<f64>,
    log_z: f64,
}

impl Enumeration {
    pub fn new(model: &Model) -> Result<Self> {
        Self::with_cap(model, DEFAULT_CAP)
    }

    pub fn with_cap(model: &Model, cap: usize) -> Result<Self> {
        let k = model.k();
        if k > cap || k >= usize::BITS as usize {
            return Err(Error::EnumerationCap { k, cap });
        }
        let layout = model.layout();
        let (w, b) = (model.weights(), model.biases());
        let mut energies = vec![0.0; 1 << k];
        // energy(mask) = energy(mask without its lowest bit) + that bit's
        // bias + couplings to the remaining (higher) bits.
        for mask in 1..energies.len() {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            let mut e = energies[rest] + b[i];
            for &(j, edge) in layout.neighbors(i) {
                if (rest >> j) & 1 == 1 {
                    e += w[edge];
                }
            }
            energies[mask] = e;
        }
        let log_z = log_sum_exp(energies.iter().copied());
        Ok(Self { k, energies, log_z })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Unnormalized log-probability of each state, indexed by bitmask.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Normalized probability of each state, indexed by bitmask.
    pub fn probabilities(&self) -> Vec<f64> {
        self.energies.iter().map(|e| (e - self.log_z).exp()).collect()
    }

    pub fn moments(&self, model: &Model) -> ExactMoments {
        let k = self.k;
        let edges = model.layout().edges();
        let mut node = vec![0.0; k];
        let mut edge = vec![0.0; edges.len()];
        for (mask, e) in self.energies.iter().enumerate() {
            let p = (e - self.log_z).exp();
            for (i, n) in node.iter_mut().enumerate() {
                if (mask >> i) & 1 == 1 {
                    *n += p;
                }
            }
            for (x, &(i, j)) in edge.iter_mut().zip(edges) {
                if (mask >> i) & 1 == 1 && (mask >> j) & 1 == 1 {
                    *x += p;
                }
            }
        }
        for v in node.iter_mut().chain(edge.iter_mut()) {
            *v = v.clamp(0.0, 1.0);
        }
        ExactMoments { log_z: self.log_z, node_marginals: node, edge_moments: edge }
    }

    /// Draws `n` i.i.d. states by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<u8>> {
        let mut cdf = Vec::with_capacity(self.energies.len());
        let mut acc = 0.0;
        for e in &self.energies {
            acc += (e - self.log_z).exp();
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let mask = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                mask_to_state(mask, self.k)
            })
            .collect()
    }
}

/// Exact log partition function.
pub fn exact_log_z(model: &Model) -> Result<f64> {
    Ok(Enumeration::new(model)?.log_z())
}

/// Exact log partition function, enumeration cap specified.
pub fn exact_log_z_with_cap(model: &Model, cap: usize) -> Result<f64> {
    Ok(Enumeration::with_cap(model, cap)?.log_z())
}

/// Exact node and edge expectations under `p(s|W)`.
pub fn exact_moments(model: &Model) -> Result<ExactMoments> {
    Ok(Enumeration::new(model)?.moments(model))
}

/// `n` i.i.d. states from `p(s|W)`.
pub fn exact_sample<R: Rng + ?Sized>(model: &Model, rng: &mut R, n: usize) -> Result<Vec<Vec<u8>>> {
    Ok(Enumeration::new(model)?.sample(rng, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub log_z: f64,
    pub node_marginals: Vec<f64>,
    pub edge_moments: Vec<f64>,
}

impl Expectations for ExactMoments {
    fn node_marginals(&self) -> &[f64] {
        &self.node_marginals
    }
    fn edge_moments(&self) -> &[f64] {
        &self.edge_moments
    }
}

/// One axis of a posterior grid: `cells` equal cells over `[lo, hi]`.
///
/// Each cell's mass is the midpoint-rule integral over `subdivisions`
/// equal sub-cells, so cell masses are directly comparable with histogram
/// bins over the same edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub subdivisions: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Self {
        Self { lo, hi, cells, subdivisions: 8 }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|c| self.lo + (c as f64 + 0.5) * self.width()).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells).map(|c| self.lo + c as f64 * self.width()).collect()
    }

    /// Sub-cell midpoints of every cell, cell-major.
    fn nodes(&self) -> Vec<f64> {
        let h = self.width() / self.subdivisions as f64;
        (0..self.cells * self.subdivisions).map(|s| self.lo + (s as f64 + 0.5) * h).collect()
    }

    /// Cell containing `x`, if inside `[lo, hi)`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(self.lo..self.hi).contains(&x) {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.cells - 1))
    }

    fn validate(&self) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidConfig("grid bounds must be finite".into()));
        }
        if self.hi <= self.lo || self.cells == 0 || self.subdivisions == 0 {
            return Err(Error::InvalidConfig("grid needs hi > lo and at least one cell".into()));
        }
        Ok(())
    }
}

/// Normalized posterior mass over a 1-D or 2-D grid of free coordinates.
///
/// `mass` is row-major with the first coordinate varying slowest and sums to
/// one over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGrid {
    pub coords: Vec<usize>,
    pub specs: Vec<GridSpec>,
    pub mass: Vec<f64>,
}

impl PosteriorGrid {
    /// Mass marginalized onto axis `a`.
    pub fn marginal(&self, a: usize) -> Vec<f64> {
        if self.specs.len() == 1 {
            return self.mass.clone();
        }
        let (n0, n1) = (self.specs[0].cells, self.specs[1].cells);
        let mut out = vec![0.0; self.specs[a].cells];
        for r in 0..n0 {
            for c in 0..n1 {
                out[if a == 0 { r } else { c }] += self.mass[r * n1 + c];
            }
        }
        out
    }

    /// Writes `theta1[,theta2],density` rows; density is mass per unit area.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let area: f64 = self.specs.iter().map(GridSpec::width).product();
        match self.specs.as_slice() {
            [a] => {
                writeln!(out, "theta1,density")?;
                for (x, m) in a.centers().iter().zip(&self.mass) {
                    writeln!(out, "{x},{}", m / area)?;
                }
            }
            [a, b] => {
                writeln!(out, "theta1,theta2,density")?;
                let (xs, ys) = (a.centers(), b.centers());
                for (r, x) in xs.iter().enumerate() {
                    for (c, y) in ys.iter().enumerate() {
                        writeln!(out, "{x},{y},{}", self.mass[r * ys.len() + c] / area)?;
                    }
                }
            }
            _ => unreachable!("grids are 1-D or 2-D"),
        }
        Ok(())
    }
}

/// Evaluates a normalized parameter posterior over 1 or 2 free coordinates,
/// all other coordinates held at `template`. Each node costs one exact
/// partition function.
pub fn exact_posterior_grid(
    template: &ParamVector,
    free: &[usize],
    suff: &SuffStats,
    prior: &crate::model::GaussianPrior,
    specs: &[GridSpec],
) -> Result<PosteriorGrid> {
    posterior_grid_by(free, specs, template.layout.n_params(), |theta| {
        let mut p = template.clone();
        for (&c, &v) in free.iter().zip(theta) {
            p.values[c] = v;
        }
        let model = Model::from_params(&p)?;
        Ok(log_prior(prior, &p) + suff.dot(&p) - suff.n_rows as f64 * exact_log_z(&model)?)
    })
}

/// Shared grid evaluator: `log_density` maps free-coordinate values to an
/// unnormalized log density.
pub(crate) fn posterior_grid_by(
    free: &[usize],
    specs: &[GridSpec],
    n_params: usize,
    mut log_density: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<PosteriorGrid> {
    if free.is_empty() || free.len() > 2 || free.len() != specs.len() {
        return Err(Error::InvalidConfig("posterior grids take 1 or 2 free coordinates, one spec each".into()));
    }
    if free.iter().any(|&c| c >= n_params) {
        return Err(Error::InvalidConfig("free coordinate out of range".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let nodes: Vec<Vec<f64>> = specs.iter().map(GridSpec::nodes).collect();
    let mut logs = Vec::new();
    let mut cell_of = Vec::new();
    match nodes.as_slice() {
        [xs] => {
            for (s, &x) in xs.iter().enumerate() {
                logs.push(log_density(&[x])?);
                cell_of.push(s / specs[0].subdivisions);
            }
        }
        [xs, ys] => {
            for (sx, &x) in xs.iter().enumerate() {
                for (sy, &y) in ys.iter().enumerate() {
                    logs.push(log_density(&[x, y])?);
                    cell_of.push((sx / specs[0].subdivisions) * specs[1].cells + sy / specs[1].subdivisions);
                }
            }
        }
        _ => unreachable!(),
    }
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NonFinite("posterior grid log density".into()));
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_cells: usize = specs.iter().map(|s| s.cells).product();
    let mut mass = vec![0.0; n_cells];
    for (l, &c) in logs.iter().zip(&cell_of) {
        mass[c] += (l - max).exp();
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    Ok(PosteriorGrid { coords: free.to_vec(), specs: specs.to_vec(), mass })
}
