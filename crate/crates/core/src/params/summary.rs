//! Histograms, overlap coefficients, f-curves and the prior baseline.

use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::chain::{Chain, ChainRecord};
use super::steps::StepDiagnostics;
use crate::error::{Error, Result};
use crate::model::{GaussianPrior, Layout, ParamVector};
use crate::ChainRng;

/// Equal-width bins over `[lo, hi]`; values outside are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins() as f64;
        (0..=self.bins()).map(|b| self.lo + b as f64 * w).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts divided by the total; zeros for an empty histogram.
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        if t == 0 {
            return vec![0.0; self.bins()];
        }
        self.counts.iter().map(|&c| c as f64 / t as f64).collect()
    }
}

/// Bins `values` into `bins` cells over `[lo, hi]`, the top edge inclusive.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    let mut counts = vec![0u64; bins];
    let w = (hi - lo) / bins as f64;
    for &v in values {
        if v >= lo && v <= hi {
            counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
        }
    }
    Histogram { lo, hi, counts }
}

fn range_of<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Per-coordinate histograms over each coordinate's own sample range.
pub fn chain_histograms(chain: &Chain, bins: usize) -> Result<Vec<Histogram>> {
    check(chain, bins)?;
    Ok((0..chain.coords.len())
        .map(|c| {
            let v = chain.coord_values(c);
            let (lo, hi) = range_of(v.iter());
            histogram(&v, lo, hi, bins)
        })
        .collect())
}

/// Histograms of several chains on shared per-coordinate ranges; indexed
/// `[chain][coord]`.
pub fn shared_histograms(chains: &[&Chain], bins: usize) -> Result<Vec<Vec<Histogram>>> {
    let first = chains.first().ok_or_else(|| Error::InvalidData("no chains to histogram".into()))?;
    for ch in chains {
        check(ch, bins)?;
        if ch.coords != first.coords {
            return Err(Error::LayoutMismatch { expected: first.coords.len(), found: ch.coords.len() });
        }
    }
    let n = first.coords.len();
    let values: Vec<Vec<Vec<f64>>> = chains.iter().map(|ch| (0..n).map(|c| ch.coord_values(c)).collect()).collect();
    let ranges: Vec<(f64, f64)> = (0..n).map(|c| range_of(values.iter().flat_map(|v| v[c].iter()))).collect();
    Ok(values
        .iter()
        .map(|v| (0..n).map(|c| histogram(&v[c], ranges[c].0, ranges[c].1, bins)).collect())
        .collect())
}

fn check(chain: &Chain, bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidConfig("histograms need at least 2 bins".into()));
    }
    if chain.records.is_empty() {
        return Err(Error::InvalidData("chain has no samples".into()));
    }
    Ok(())
}

/// `Σ_b min(p̂₁_b, p̂₂_b)` over shared bins.
pub fn overlap_coefficient(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.bins() != b.bins() || a.lo != b.lo || a.hi != b.hi {
        return Err(Error::InvalidData("overlap needs histograms on identical bins".into()));
    }
    Ok(a.normalized().iter().zip(b.normalized()).map(|(x, y)| x.min(y)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FEntry {
    pub coord: usize,
    pub name: String,
    pub f: f64,
}

/// Fraction of samples within `±tol` of the true value, per coordinate,
/// sorted ascending by `f` (ties by coordinate).
pub fn f_curve(chain: &Chain, truth: &ParamVector, tol: f64) -> Result<Vec<FEntry>> {
    if truth.values.len() != chain.coords.len() {
        return Err(Error::LayoutMismatch { expected: chain.coords.len(), found: truth.values.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("f-curve tolerance must be positive".into()));
    }
    if chain.records.is_empty() {
        return Err(Error::InvalidData("chain has no samples".into()));
    }
    let n = chain.records.len() as f64;
    let mut out: Vec<FEntry> = (0..chain.coords.len())
        .map(|c| {
            let hits = chain.samples().filter(|s| (s[c] - truth.values[c]).abs() <= tol).count();
            FEntry { coord: c, name: chain.coords[c].clone(), f: hits as f64 / n }
        })
        .collect();
    out.sort_by(|a, b| a.f.total_cmp(&b.f).then(a.coord.cmp(&b.coord)));
    Ok(out)
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `n` independent draws from the prior packaged as a chain, the chance
/// baseline for f-curves.
pub fn prior_chain(layout: &Arc<Layout>, prior: &GaussianPrior, n: usize, seed: u64) -> Result<Chain> {
    if n == 0 {
        return Err(Error::InvalidConfig("prior baseline needs at least one draw".into()));
    }
    let mut rng = ChainRng::seed_from_u64(seed);
    let w = Normal::new(0.0, prior.weight_variance.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let b = Normal::new(0.0, prior.bias_variance.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let m = layout.n_edges();
    let records = (0..n)
        .map(|step| ChainRecord {
            step: step + 1,
            params: (0..layout.n_params())
                .map(|c| if c < m { w.sample(&mut rng) } else { b.sample(&mut rng) })
                .collect(),
            accepted: true,
            diagnostics: StepDiagnostics::default(),
        })
        .collect();
    Ok(Chain {
        coords: (0..layout.n_params()).map(|c| layout.coord_name(c)).collect(),
        records,
        accept_count: n,
        propose_count: n,
        step_size: 0.0,
        seed,
        method: "prior".into(),
        config_hash: String::new(),
        nonconverged_steps: 0,
        flagged: false,
    })
}
