//! Outer-loop MCMC over parameters θ.
//!
//! Plug-in Metropolis takes any [`LogZApproximator`]; ratio Metropolis
//! replaces the plug-in difference with the importance estimate of
//! `Z(W)/Z(W')`; uncorrected Langevin takes any [`MomentEstimator`].
//! [`run_chain`] drives one of them from a serializable [`ChainConfig`].

mod approximators;
mod chain;
mod steps;
mod summary;

use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{log_prior, suff_stats, DataSet, GaussianPrior, Layout, ParamVector, SuffStats};

pub use approximators::{
    BetheLogZ, BetheMoments, BriefMoments, ExactLogZ, ExactMomentEstimator, LogZApproximator, LogZEval,
    LongRunMoments, MeanFieldLogZ, MeanFieldMoments, MomentEstimator, NonConvergencePolicy, TreeLogZ,
};
pub use chain::{run_chain, Approximator, Chain, ChainConfig, ChainHeader, ChainRecord, Method};
pub use steps::{
    langevin_step, log_acceptance, metropolis_step, ratio_metropolis_step, CoordinateSchedule, InnerSource,
    MetropolisState, ProposalConfig, ProposalKind, Proposer, StepDiagnostics, StepOutcome,
};
pub use summary::{
    chain_histograms, f_curve, histogram, median, overlap_coefficient, prior_chain, shared_histograms, FEntry,
    Histogram,
};

/// Data, prior and the set of coordinates a sampler may move.
#[derive(Debug, Clone)]
pub struct Problem {
    layout: Arc<Layout>,
    data: DataSet,
    suff: SuffStats,
    prior: GaussianPrior,
    free: Vec<usize>,
}

impl Problem {
    /// All coordinates free. The data must be fully observed.
    pub fn new(layout: Arc<Layout>, data: DataSet, prior: GaussianPrior) -> Result<Self> {
        let suff = suff_stats(&data, &layout)?;
        let free = (0..layout.n_params()).collect();
        Ok(Self { layout, data, suff, prior, free })
    }

    /// Restricts sampling to `free` coordinates; the rest stay at their
    /// initial values.
    pub fn with_free(mut self, mut free: Vec<usize>) -> Result<Self> {
        free.sort_unstable();
        free.dedup();
        if free.is_empty() || free.iter().any(|&c| c >= self.layout.n_params()) {
            return Err(Error::InvalidConfig("free coordinates must be a non-empty subset of the layout".into()));
        }
        self.free = free;
        Ok(self)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn suff(&self) -> &SuffStats {
        &self.suff
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn n_rows(&self) -> f64 {
        self.suff.n_rows as f64
    }

    /// `log p(θ) + Σ_n log_unnorm(s⁽ⁿ⁾; θ)`, the joint log-probability
    /// without the `−N log Z` term.
    pub fn log_joint_without_z(&self, params: &ParamVector) -> f64 {
        log_prior(&self.prior, params) + self.suff.dot(params)
    }
}

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
