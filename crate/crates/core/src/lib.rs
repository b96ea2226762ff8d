//! Approximate Bayesian inference over the parameters of Boltzmann machines.
//!
//! The partition function `Z(W)` makes exact parameter MCMC intractable for
//! all but tiny models. This crate provides the pieces to build approximate
//! samplers anyway:
//!
//! - [`model`]: pairwise binary models, data, priors, sufficient statistics
//!   and the joint log-probability gradient.
//! - [`exact`]: brute-force enumeration used as an inner loop for small
//!   models and as a test oracle.
//! - [`approx`]: mean-field and tree-structured lower bounds, loopy BP with
//!   the Bethe free energy, pseudo-likelihood.
//! - [`states`]: Gibbs, brief data-initialized chains, Swendsen–Wang, and
//!   the importance estimator of `Z(W)/Z(W')`.
//! - [`params`]: Metropolis with a plug-in `log Z` or a ratio estimator,
//!   uncorrected Langevin, chain bookkeeping and summaries.
//! - [`hidden`]: likelihoods with hidden variables and the two-parameter
//!   semi-supervised random field.
//! - [`experiments`]: suites, data loaders and result writers behind the
//!   `bmbayes` binary.
//!
//! ```
//! use boltzmann_bayes::model::Model;
//! use boltzmann_bayes::exact::exact_log_z;
//!
//! let m = Model::new(2, vec![(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
//! let log_z = exact_log_z(&m).unwrap();
//! assert!((log_z - (3.0 + 1f64.exp()).ln()).abs() < 1e-12);
//! ```

pub mod approx;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod hidden;
pub mod model;
pub mod params;
pub mod states;

pub use error::{Error, Result};

/// Seeded generator used by every sampler. ChaCha keeps streams identical
/// across platforms and `rand` releases.
pub type ChainRng = rand_chacha::ChaCha8Rng;

#[cfg(test)]
pub(crate) mod testutil;
