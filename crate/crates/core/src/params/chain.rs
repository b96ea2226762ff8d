//! Chain configuration, the driver loop, and JSON-lines persistence.

use std::io::Write;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::approximators::{
    BetheLogZ, BetheMoments, BriefMoments, ExactLogZ, ExactMomentEstimator, LogZApproximator, LongRunMoments,
    MeanFieldLogZ, MeanFieldMoments, MomentEstimator, NonConvergencePolicy, TreeLogZ,
};
use super::steps::{
    langevin_step, metropolis_step, ratio_metropolis_step, InnerSource, MetropolisState, ProposalConfig, Proposer,
    StepDiagnostics,
};
use super::{config_hash, Problem};
use crate::approx::{BpConfig, MeanFieldConfig, TreeConfig};
use crate::error::{Error, Result};
use crate::model::ParamVector;
use crate::states::StateChainConfig;
use crate::ChainRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Metropolis,
    RatioMetropolis,
    Langevin,
}

/// Which engine supplies `log Z` (Metropolis), moments (Langevin) or the
/// inner states (ratio Metropolis: `exact` enumerates, `long-run` samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approximator {
    #[default]
    Exact,
    MeanField,
    Tree,
    Bethe,
    Brief,
    LongRun,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

impl std::str::FromStr for Approximator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::InvalidConfig(format!("unknown approximator `{s}`")))
    }
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Metropolis => "metropolis",
            Method::RatioMetropolis => "ratio-metropolis",
            Method::Langevin => "langevin",
        }
    }
}

impl Approximator {
    pub fn as_str(self) -> &'static str {
        match self {
            Approximator::Exact => "exact",
            Approximator::MeanField => "mean-field",
            Approximator::Tree => "tree",
            Approximator::Bethe => "bethe",
            Approximator::Brief => "brief",
            Approximator::LongRun => "long-run",
        }
    }
}

/// Everything needed to reproduce one parameter chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub method: Method,
    pub approximator: Approximator,
    pub iterations: usize,
    /// Keep every `thinning`-th state.
    pub thinning: usize,
    pub seed: u64,
    pub proposal: ProposalConfig,
    /// Langevin step size ε.
    pub epsilon: f64,
    pub brief_sweeps: usize,
    /// Per-step Gibbs run of the `long-run` moment estimator.
    pub long_run: StateChainConfig,
    /// Inner Gibbs run of ratio Metropolis with the `long-run` source.
    pub inner_samples: usize,
    pub inner_burn_in: usize,
    pub bp: BpConfig,
    pub mean_field: MeanFieldConfig,
    pub tree: TreeConfig,
    pub warm_start: bool,
    pub nonconvergence: NonConvergencePolicy,
    /// Starting parameters; zeros when absent.
    pub init: Option<Vec<f64>>,
    /// Flag the chain when more than this fraction of steps saw a
    /// non-converged inner solve.
    pub max_nonconverged_fraction: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            method: Method::Metropolis,
            approximator: Approximator::Exact,
            iterations: 100_000,
            thinning: 1,
            seed: 0,
            proposal: ProposalConfig::default(),
            epsilon: 0.01,
            brief_sweeps: 1,
            long_run: StateChainConfig { n_sweeps: 100, burn_in: 10, seed: 0, scan: Default::default() },
            inner_samples: 100,
            inner_burn_in: 10,
            bp: BpConfig::default(),
            mean_field: MeanFieldConfig::default(),
            tree: TreeConfig::default(),
            warm_start: true,
            nonconvergence: NonConvergencePolicy::UseValue,
            init: None,
            max_nonconverged_fraction: 0.05,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be positive".into()));
        }
        use Approximator::*;
        let ok = match self.method {
            Method::Metropolis => matches!(self.approximator, Exact | MeanField | Tree | Bethe),
            Method::RatioMetropolis => matches!(self.approximator, Exact | LongRun),
            Method::Langevin => matches!(self.approximator, Exact | MeanField | Bethe | Brief | LongRun),
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "approximator `{}` is not available for method `{}`",
                self.approximator.as_str(),
                self.method.as_str()
            )));
        }
        if self.method == Method::Langevin && !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("Langevin step size must be positive".into()));
        }
        if self.method == Method::Langevin && self.approximator == Brief && self.brief_sweeps == 0 {
            return Err(Error::InvalidConfig("brief sampling needs at least one sweep".into()));
        }
        if !(0.0..=1.0).contains(&self.max_nonconverged_fraction) {
            return Err(Error::InvalidConfig("max_nonconverged_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `method/approximator`, e.g. `metropolis/bethe`.
    pub fn tag(&self) -> String {
        format!("{}/{}", self.method.as_str(), self.approximator.as_str())
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    fn log_z_approximator(&self) -> Box<dyn LogZApproximator> {
        match self.approximator {
            Approximator::MeanField => Box::new(MeanFieldLogZ::new(self.mean_field, self.warm_start)),
            Approximator::Tree => Box::new(TreeLogZ::new(self.mean_field, self.tree, self.warm_start)),
            Approximator::Bethe => Box::new(BetheLogZ::new(self.bp, self.warm_start)),
            _ => Box::new(ExactLogZ::default()),
        }
    }

    fn moment_estimator(&self) -> Box<dyn MomentEstimator> {
        match self.approximator {
            Approximator::MeanField => Box::new(MeanFieldMoments::new(self.mean_field)),
            Approximator::Bethe => Box::new(BetheMoments::new(self.bp, self.warm_start)),
            Approximator::Brief => Box::new(BriefMoments { n_sweeps: self.brief_sweeps }),
            Approximator::LongRun => Box::new(LongRunMoments::new(self.long_run)),
            _ => Box::new(ExactMomentEstimator::default()),
        }
    }
}

/// One stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub step: usize,
    pub params: Vec<f64>,
    pub accepted: bool,
    pub diagnostics: StepDiagnostics,
}

/// First line of a chain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub config_hash: String,
    pub seed: u64,
    pub method: String,
    pub step_size: f64,
    pub coords: Vec<String>,
    pub accept_count: usize,
    pub propose_count: usize,
    pub nonconverged_steps: usize,
    pub flagged: bool,
}

/// Stored samples plus run statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub coords: Vec<String>,
    pub records: Vec<ChainRecord>,
    pub accept_count: usize,
    pub propose_count: usize,
    /// Proposal std-dev (Metropolis) or ε (Langevin).
    pub step_size: f64,
    pub seed: u64,
    pub method: String,
    pub config_hash: String,
    /// Steps whose inner BP / mean-field solve hit its iteration cap.
    pub nonconverged_steps: usize,
    /// Set when `nonconverged_steps` exceeds the configured fraction.
    pub flagged: bool,
}

impl Chain {
    pub fn n_samples(&self) -> usize {
        self.records.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.params.as_slice())
    }

    /// Samples of coordinate `c`.
    pub fn coord_values(&self, c: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.params[c]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.propose_count == 0 {
            return 0.0;
        }
        self.accept_count as f64 / self.propose_count as f64
    }

    pub fn nonconverged_fraction(&self) -> f64 {
        if self.propose_count == 0 {
            return 0.0;
        }
        self.nonconverged_steps as f64 / self.propose_count as f64
    }

    pub fn header(&self) -> ChainHeader {
        ChainHeader {
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            method: self.method.clone(),
            step_size: self.step_size,
            coords: self.coords.clone(),
            accept_count: self.accept_count,
            propose_count: self.propose_count,
            nonconverged_steps: self.nonconverged_steps,
            flagged: self.flagged,
        }
    }

    /// Header line, then one JSON record per stored sample.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header())?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header: ChainHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::InvalidData("empty chain file".into())),
        };
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self {
            coords: header.coords,
            records,
            accept_count: header.accept_count,
            propose_count: header.propose_count,
            step_size: header.step_size,
            seed: header.seed,
            method: header.method,
            config_hash: header.config_hash,
            nonconverged_steps: header.nonconverged_steps,
            flagged: header.flagged,
        })
    }
}

/// Runs the configured sampler on `problem`.
pub fn run_chain(problem: &Problem, config: &ChainConfig) -> Result<Chain> {
    config.validate()?;
    let layout = problem.layout();
    let mut params = match &config.init {
        Some(v) => ParamVector::new(layout.clone(), v.clone())?,
        None => ParamVector::zeros(layout.clone()),
    };
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut chain = Chain {
        coords: (0..layout.n_params()).map(|c| layout.coord_name(c)).collect(),
        records: Vec::with_capacity(config.iterations / config.thinning),
        accept_count: 0,
        propose_count: 0,
        step_size: if config.method == Method::Langevin { config.epsilon } else { config.proposal.std_dev },
        seed: config.seed,
        method: config.tag(),
        config_hash: config.hash()?,
        nonconverged_steps: 0,
        flagged: false,
    };
    let record = |chain: &mut Chain, step: usize, params: &ParamVector, outcome: super::StepOutcome| {
        chain.propose_count += 1;
        chain.accept_count += usize::from(outcome.accepted);
        if outcome.diagnostics.converged == Some(false) {
            chain.nonconverged_steps += 1;
        }
        if (step + 1) % config.thinning == 0 {
            chain.records.push(ChainRecord {
                step: step + 1,
                params: params.values.clone(),
                accepted: outcome.accepted,
                diagnostics: outcome.diagnostics,
            });
        }
    };
    match config.method {
        Method::Metropolis => {
            let mut approx = config.log_z_approximator();
            let mut proposer = Proposer::new(config.proposal, problem.free())?;
            let mut state = MetropolisState::new(params, approx.as_mut())?;
            for step in 0..config.iterations {
                let out = metropolis_step(problem, &mut state, &mut proposer, approx.as_mut(), config.nonconvergence, &mut rng)?;
                record(&mut chain, step, &state.params, out);
            }
        }
        Method::RatioMetropolis => {
            let source = match config.approximator {
                Approximator::Exact => InnerSource::Exhaustive,
                _ => InnerSource::Gibbs { n_samples: config.inner_samples, burn_in: config.inner_burn_in },
            };
            let mut proposer = Proposer::new(config.proposal, problem.free())?;
            let mut inner = Vec::new();
            for step in 0..config.iterations {
                let out = ratio_metropolis_step(problem, &mut params, &mut proposer, source, &mut inner, &mut rng)?;
                record(&mut chain, step, &params, out);
            }
        }
        Method::Langevin => {
            let mut estimator = config.moment_estimator();
            for step in 0..config.iterations {
                let out = langevin_step(problem, &mut params, estimator.as_mut(), config.epsilon, &mut rng)?;
                record(&mut chain, step, &params, out);
            }
        }
    }
    chain.flagged = chain.nonconverged_fraction() > config.max_nonconverged_fraction;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_posterior_grid, GridSpec};
    use crate::model::{DataSet, GaussianPrior, Layout};
    use crate::params::{histogram, Problem};

    fn one_weight_problem(copies: usize) -> Problem {
        let layout = Layout::complete(2).unwrap();
        let data = DataSet::new(2, vec![vec![1, 1]], Some(vec![copies as u64])).unwrap();
        Problem::new(layout, data, GaussianPrior::default()).unwrap().with_free(vec![0]).unwrap()
    }

    #[test]
    fn zero_iterations_is_an_error() {
        let p = one_weight_problem(4);
        let cfg = ChainConfig { iterations: 0, ..Default::default() };
        assert!(run_chain(&p, &cfg).is_err());
    }

    #[test]
    fn incompatible_approximator_is_rejected() {
        let p = one_weight_problem(4);
        let cfg = ChainConfig { method: Method::Metropolis, approximator: Approximator::Brief, ..Default::default() };
        assert!(matches!(run_chain(&p, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn same_seed_gives_identical_chains() {
        let p = one_weight_problem(4);
        let cfg = ChainConfig { iterations: 2000, seed: 5, ..Default::default() };
        let a = run_chain(&p, &cfg).unwrap();
        let b = run_chain(&p, &cfg).unwrap();
        assert_eq!(a, b);
        let other = run_chain(&p, &ChainConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.records, other.records);
    }

    #[test]
    fn jsonl_roundtrip() {
        let p = one_weight_problem(4);
        let cfg = ChainConfig { iterations: 50, thinning: 5, ..Default::default() };
        let chain = run_chain(&p, &cfg).unwrap();
        assert_eq!(chain.n_samples(), 10);
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).unwrap();
        let back = Chain::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.records, chain.records);
        assert_eq!(back.config_hash, chain.config_hash);
        let first = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert!(first.contains("config_hash") && first.contains("\"seed\":0"));
    }

    #[test]
    fn fixed_coordinates_never_move() {
        let p = one_weight_problem(4);
        let chain = run_chain(&p, &ChainConfig { iterations: 500, ..Default::default() }).unwrap();
        assert!(chain.samples().all(|s| s[1] == 0.0 && s[2] == 0.0));
        let lang = ChainConfig { method: Method::Langevin, iterations: 500, ..Default::default() };
        let chain = run_chain(&p, &lang).unwrap();
        assert!(chain.samples().all(|s| s[1] == 0.0 && s[2] == 0.0));
    }

    fn sample_variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn more_data_narrows_the_posterior() {
        let var = |copies| {
            let p = one_weight_problem(copies);
            let chain = run_chain(&p, &ChainConfig { iterations: 100_000, seed: 9, proposal: ProposalConfig { std_dev: 0.3, ..Default::default() }, ..Default::default() }).unwrap();
            sample_variance(&chain.coord_values(0))
        };
        assert!(var(200) < var(100));
    }

    #[test]
    fn langevin_with_exact_moments_matches_grid() {
        let p = one_weight_problem(4);
        // At ε = 0.01 the chain decorrelates over ~10⁴ steps, so 10⁵ samples
        // are kept from 10⁷ steps.
        let cfg = ChainConfig {
            method: Method::Langevin,
            iterations: 10_000_000,
            thinning: 100,
            epsilon: 0.01,
            seed: 12,
            init: Some(vec![1.5, 0.0, 0.0]),
            ..Default::default()
        };
        let chain = run_chain(&p, &cfg).unwrap();
        let spec = GridSpec::new(-3.0, 6.0, 50);
        let grid = exact_posterior_grid(&ParamVector::zeros(p.layout().clone()), &[0], p.suff(), p.prior(), &[spec]).unwrap();
        let h = histogram(&chain.coord_values(0), spec.lo, spec.hi, spec.cells);
        let tv: f64 = h.normalized().iter().zip(&grid.mass).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        eprintln!("langevin grid tv = {tv}");
        assert!(tv < 0.07, "tv = {tv}");
    }

    #[test]
    fn ratio_metropolis_exhaustive_tracks_exact_metropolis() {
        let p = one_weight_problem(4);
        let exact = run_chain(&p, &ChainConfig { iterations: 3000, seed: 3, ..Default::default() }).unwrap();
        let ratio = run_chain(&p, &ChainConfig { method: Method::RatioMetropolis, iterations: 3000, seed: 3, ..Default::default() }).unwrap();
        // Same random stream and acceptance probabilities equal to rounding:
        // the trajectories coincide.
        for (a, b) in exact.records.iter().zip(&ratio.records) {
            assert!((a.params[0] - b.params[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn ratio_metropolis_sampled_matches_grid() {
        let p = one_weight_problem(4);
        let cfg = ChainConfig {
            method: Method::RatioMetropolis,
            approximator: Approximator::LongRun,
            iterations: 100_000,
            inner_samples: 50,
            inner_burn_in: 2,
            proposal: ProposalConfig { std_dev: 0.1, ..Default::default() },
            seed: 4,
            ..Default::default()
        };
        let chain = run_chain(&p, &cfg).unwrap();
        let spec = GridSpec::new(-3.0, 6.0, 50);
        let grid = exact_posterior_grid(&ParamVector::zeros(p.layout().clone()), &[0], p.suff(), p.prior(), &[spec]).unwrap();
        let h = histogram(&chain.coord_values(0), spec.lo, spec.hi, spec.cells);
        let tv: f64 = h.normalized().iter().zip(&grid.mass).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        eprintln!("ratio metropolis grid tv = {tv}");
        assert!(tv < 0.1, "tv = {tv}");
    }

    #[test]
    fn bethe_chain_flags_nonconvergence() {
        let layout = Layout::complete(4).unwrap();
        let data = DataSet::from_rows(4, vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]]).unwrap();
        let p = Problem::new(layout.clone(), data, GaussianPrior::new(100.0, 100.0).unwrap()).unwrap();
        // Strongly frustrated start with a tiny iteration budget.
        let mut init = vec![-6.0; 6];
        init.extend([3.0; 4]);
        let cfg = ChainConfig {
            approximator: Approximator::Bethe,
            iterations: 200,
            bp: BpConfig { max_iter: 2, ..Default::default() },
            init: Some(init),
            ..Default::default()
        };
        let chain = run_chain(&p, &cfg).unwrap();
        assert!(chain.nonconverged_steps > 0);
        assert!(chain.flagged);
    }
}
