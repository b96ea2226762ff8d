//! Experiment suites behind the `bmbayes` binary.
//!
//! A suite takes an [`ExperimentConfig`], runs its chains and writes a
//! bundle of plain files into an output directory. Every CSV starts with a
//! `# config_hash=… seed=…` line; every SVG carries the same stamp in an XML
//! comment; `run.json` records the full config. Nothing written depends on
//! wall-clock time, so reruns with the same config are byte-identical.

pub mod data;
pub mod suites;
pub mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::approx::TreeConfig;
use crate::error::{Error, Result};
use crate::hidden::SemisupConfig;
use crate::model::GaussianPrior;
use crate::params::{config_hash, Approximator, ChainConfig, Method};

pub use data::{
    gen_synthetic, gen_synthetic_rows, heart_standin_data, heart_standin_model, load_contingency, load_table,
    write_table, DataSampler, SyntheticSystem, HEART_K, HEART_N, SYNTHETIC_ROWS,
};
pub use suites::{run_experiment, run_flawed_demo, FlawedReport, SuiteOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Heart,
    Synthetic,
    Semisup,
    FlawedDemo,
    Custom,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Heart => "heart",
            ExperimentKind::Synthetic => "synthetic",
            ExperimentKind::Semisup => "semisup",
            ExperimentKind::FlawedDemo => "flawed-demo",
            ExperimentKind::Custom => "custom",
        }
    }
}

/// One sampler of a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub method: Method,
    pub approximator: Approximator,
}

impl RunSpec {
    pub const fn new(method: Method, approximator: Approximator) -> Self {
        Self { method, approximator }
    }

    pub fn tag(&self) -> String {
        format!("{}/{}", self.method.as_str(), self.approximator.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeartConfig {
    /// Independent exact reference chains; the first is the comparison
    /// baseline.
    pub reference_chains: usize,
    /// Tree-bound solver settings for the tree chain.
    pub tree: TreeConfig,
}

impl Default for HeartConfig {
    fn default() -> Self {
        Self { reference_chains: 2, tree: TreeConfig { tol: 1e-6, max_iter: 200 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub k: usize,
    pub n_edges: usize,
    pub rows: usize,
    /// Seed of the generated system, separate from the chain seeds.
    pub system_seed: u64,
    /// Half-width of the f window around the true value.
    pub f_window: f64,
    pub prior_samples: usize,
    /// Parameters that get an example histogram with a truth marker.
    pub example_histograms: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            k: 100,
            n_edges: 204,
            rows: SYNTHETIC_ROWS,
            system_seed: 204,
            f_window: 0.1,
            prior_samples: 10_000,
            example_histograms: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemisupSuiteConfig {
    /// Points CSV (`x,y,label`); the 80-point toy layout when absent.
    pub points: Option<PathBuf>,
    pub toy_seed: u64,
    pub langevin: SemisupConfig,
    pub metropolis: SemisupConfig,
    /// σ samples (evenly spaced along the Langevin chain) used for the
    /// predictive label marginals.
    pub predict_samples: usize,
    pub predict_sweeps: usize,
}

impl Default for SemisupSuiteConfig {
    fn default() -> Self {
        Self {
            points: None,
            toy_seed: 0,
            langevin: SemisupConfig::default(),
            metropolis: SemisupConfig { samples: 2_000, thinning: 1, burn_in: 200, ..SemisupConfig::default() },
            predict_samples: 100,
            predict_sweeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlawedConfig {
    /// Data-set sizes at which the implied prior is evaluated.
    pub n_values: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Variance of the Gaussian factor on the single weight.
    pub weight_variance: f64,
}

impl Default for FlawedConfig {
    fn default() -> Self {
        Self { n_values: vec![0, 1, 2, 4, 8, 16], lo: -4.0, hi: 12.0, points: 321, weight_variance: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CustomConfig {
    /// Model edges; the complete graph over the data columns when absent.
    pub edges: Option<Vec<(usize, usize)>>,
}

/// Full description of one experiment run. The output directory is not part
/// of it, so moving a bundle does not change its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub iterations: usize,
    pub thinning: usize,
    pub bins: usize,
    /// Data table (`heart`, `custom`); the heart suite falls back to the
    /// shipped stand-in.
    pub data: Option<PathBuf>,
    pub prior: GaussianPrior,
    /// Samplers to run; each suite has its own default list.
    pub runs: Option<Vec<RunSpec>>,
    /// Template for every chain; method, approximator, iterations, thinning
    /// and seed are overwritten per run.
    pub chain: ChainConfig,
    /// Run independent chains on separate threads.
    pub parallel: bool,
    /// Write full chains as JSON lines (large for the synthetic suite).
    pub chain_files: bool,
    pub heart: HeartConfig,
    pub synthetic: SyntheticConfig,
    pub semisup: SemisupSuiteConfig,
    pub flawed: FlawedConfig,
    pub custom: CustomConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Heart,
            seed: 0,
            iterations: 100_000,
            thinning: 1,
            bins: 50,
            data: None,
            prior: GaussianPrior::default(),
            runs: None,
            chain: ChainConfig::default(),
            parallel: true,
            chain_files: true,
            heart: HeartConfig::default(),
            synthetic: SyntheticConfig::default(),
            semisup: SemisupSuiteConfig::default(),
            flawed: FlawedConfig::default(),
            custom: CustomConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for one experiment kind.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let mut c = Self { experiment: kind, ..Self::default() };
        if kind == ExperimentKind::Synthetic {
            c.thinning = 10;
        }
        c
    }

    /// Parses JSON, or TOML when `path` ends in `.toml`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thinning == 0 {
            return Err(Error::InvalidConfig("iterations and thinning must be positive".into()));
        }
        if self.bins < 2 {
            return Err(Error::InvalidConfig("at least two histogram bins are needed".into()));
        }
        if let Some(runs) = &self.runs {
            if runs.is_empty() {
                return Err(Error::InvalidConfig("run list is empty".into()));
            }
            for r in runs {
                self.chain_config(*r, 0).validate()?;
            }
        }
        if self.experiment == ExperimentKind::Custom && self.data.is_none() {
            return Err(Error::InvalidConfig("the custom experiment needs a data table".into()));
        }
        if self.experiment == ExperimentKind::Heart && self.heart.reference_chains == 0 {
            return Err(Error::InvalidConfig("the heart suite needs an exact reference chain".into()));
        }
        if self.experiment == ExperimentKind::FlawedDemo
            && (self.flawed.points < 2 || !(self.flawed.hi > self.flawed.lo) || self.flawed.weight_variance <= 0.0)
        {
            return Err(Error::InvalidConfig("flawed-demo grid needs hi > lo, two points and a positive variance".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    /// Chain settings of run `r` with seed offset `index`.
    pub fn chain_config(&self, r: RunSpec, index: u64) -> ChainConfig {
        ChainConfig {
            method: r.method,
            approximator: r.approximator,
            iterations: self.iterations,
            thinning: self.thinning,
            seed: self.seed.wrapping_add(index),
            ..self.chain.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_toml_parse_to_the_same_config() {
        let dir = tempfile::tempdir().unwrap();
        let j = dir.path().join("c.json");
        let t = dir.path().join("c.toml");
        std::fs::write(&j, r#"{"experiment":"synthetic","seed":3,"iterations":500,"synthetic":{"k":12}}"#).unwrap();
        std::fs::write(&t, "experiment = \"synthetic\"\nseed = 3\niterations = 500\n[synthetic]\nk = 12\n").unwrap();
        let a = ExperimentConfig::from_file(&j).unwrap();
        let b = ExperimentConfig::from_file(&t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.synthetic.k, 12);
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"iters": 5}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"heart": {"bogus": 1}}"#).is_err());
    }

    #[test]
    fn invalid_runs_fail_validation() {
        let mut c = ExperimentConfig::default();
        c.runs = Some(vec![RunSpec::new(Method::RatioMetropolis, Approximator::Bethe)]);
        assert!(c.validate().is_err());
        c.runs = Some(vec![]);
        assert!(c.validate().is_err());
        c.runs = None;
        assert!(c.validate().is_ok());
        c.experiment = ExperimentKind::Custom;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }
}
