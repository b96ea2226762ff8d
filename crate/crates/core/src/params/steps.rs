//! Single transitions of the parameter samplers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::approximators::{LogZApproximator, MomentEstimator, NonConvergencePolicy};
use super::Problem;
use crate::error::{Error, Result};
use crate::exact::{log_sum_exp, Enumeration};
use crate::model::{grad_log_joint, Model, ParamVector};
use crate::states::{gibbs_sweep, ScanOrder};
use crate::ChainRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    /// Perturb one free coordinate per step.
    #[default]
    SingleCoordinate,
    /// Perturb every free coordinate.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinateSchedule {
    #[default]
    Cyclic,
    Random,
}

/// Symmetric Gaussian random-walk proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    pub kind: ProposalKind,
    pub std_dev: f64,
    pub schedule: CoordinateSchedule,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self { kind: ProposalKind::SingleCoordinate, std_dev: 0.1, schedule: CoordinateSchedule::Cyclic }
    }
}

/// A proposal configuration bound to the free coordinates, with the cyclic
/// cursor.
#[derive(Debug, Clone)]
pub struct Proposer {
    config: ProposalConfig,
    free: Vec<usize>,
    cursor: usize,
}

impl Proposer {
    pub fn new(config: ProposalConfig, free: &[usize]) -> Result<Self> {
        if !(config.std_dev.is_finite() && config.std_dev > 0.0) {
            return Err(Error::InvalidConfig("proposal std-dev must be positive".into()));
        }
        if free.is_empty() {
            return Err(Error::InvalidConfig("nothing to propose: no free coordinates".into()));
        }
        Ok(Self { config, free: free.to_vec(), cursor: 0 })
    }

    /// Returns the proposed vector and, for single-coordinate moves, the
    /// coordinate that moved.
    pub fn propose<R: Rng + ?Sized>(&mut self, params: &ParamVector, rng: &mut R) -> (ParamVector, Option<usize>) {
        let mut next = params.clone();
        let sd = self.config.std_dev;
        match self.config.kind {
            ProposalKind::SingleCoordinate => {
                let c = match self.config.schedule {
                    CoordinateSchedule::Cyclic => {
                        let c = self.free[self.cursor];
                        self.cursor = (self.cursor + 1) % self.free.len();
                        c
                    }
                    CoordinateSchedule::Random => self.free[rng.random_range(0..self.free.len())],
                };
                next.values[c] += sd * rng.sample::<f64, _>(StandardNormal);
                (next, Some(c))
            }
            ProposalKind::Full => {
                for &c in &self.free {
                    next.values[c] += sd * rng.sample::<f64, _>(StandardNormal);
                }
                (next, None)
            }
        }
    }
}

/// Per-step record kept in a chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_accept: Option<f64>,
    /// `log Ẑ` at the proposal (Metropolis) or current point (Langevin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_z: Option<f64>,
    /// `false` when an inner BP or mean-field solve hit its iteration cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// The approximator failed outright and the step was rejected.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub diagnostics: StepDiagnostics,
}

/// Current point of a plug-in Metropolis chain with its cached `log Ẑ`.
#[derive(Debug, Clone)]
pub struct MetropolisState {
    pub params: ParamVector,
    pub log_z: f64,
}

impl MetropolisState {
    pub fn new(params: ParamVector, approx: &mut dyn LogZApproximator) -> Result<Self> {
        let eval = approx.log_z(&Model::from_params(&params)?)?;
        approx.accept();
        if !eval.log_z.is_finite() {
            return Err(Error::NonFinite("log Z at the initial parameters".into()));
        }
        Ok(Self { params, log_z: eval.log_z })
    }
}

/// `log p(W'|S) − log p(W|S)` with `log Z` supplied for both points:
/// `Δ log prior + Δ(data sums · θ) − N·(log Z' − log Z)`.
pub fn log_acceptance(problem: &Problem, from: &ParamVector, to: &ParamVector, log_z_from: f64, log_z_to: f64) -> f64 {
    problem.log_joint_without_z(to) - problem.log_joint_without_z(from) - problem.n_rows() * (log_z_to - log_z_from)
}

fn accept_draw<R: Rng + ?Sized>(log_a: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    log_a >= 0.0 || u < log_a.exp()
}

/// One plug-in Metropolis step.
pub fn metropolis_step(
    problem: &Problem,
    state: &mut MetropolisState,
    proposer: &mut Proposer,
    approx: &mut dyn LogZApproximator,
    policy: NonConvergencePolicy,
    rng: &mut ChainRng,
) -> Result<StepOutcome> {
    let (proposal, coord) = proposer.propose(&state.params, rng);
    let mut diag = StepDiagnostics { coord, ..Default::default() };
    let eval = match approx.log_z(&Model::from_params(&proposal)?) {
        Ok(e) if e.log_z.is_finite() => e,
        Ok(_) | Err(Error::NonFinite(_)) => {
            diag.failed = true;
            let _: f64 = rng.random();
            return Ok(StepOutcome { accepted: false, diagnostics: diag });
        }
        Err(e) => return Err(e),
    };
    diag.log_z = Some(eval.log_z);
    diag.converged = Some(eval.converged);
    let log_a = log_acceptance(problem, &state.params, &proposal, state.log_z, eval.log_z);
    diag.log_accept = Some(log_a);
    let draw = accept_draw(log_a, rng);
    let accepted = draw && (eval.converged || policy == NonConvergencePolicy::UseValue);
    if accepted {
        approx.accept();
        state.params = proposal;
        state.log_z = eval.log_z;
    }
    Ok(StepOutcome { accepted, diagnostics: diag })
}

/// Source of states from `p(s|W')` for the ratio estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InnerSource {
    /// Exact expectation by weighted enumeration (small `k`).
    Exhaustive,
    /// A persistent Gibbs chain at `W'`: `burn_in` sweeps then `n_samples`
    /// sweeps, one state kept per sweep.
    Gibbs { n_samples: usize, burn_in: usize },
}

/// `log(Z(W)/Z(W'))` from the chosen inner source.
fn log_ratio(current: &Model, proposal: &Model, source: InnerSource, inner: &mut Vec<u8>, rng: &mut ChainRng) -> Result<f64> {
    let delta_w: Vec<f64> = current.weights().iter().zip(proposal.weights()).map(|(a, b)| a - b).collect();
    let delta_b: Vec<f64> = current.biases().iter().zip(proposal.biases()).map(|(a, b)| a - b).collect();
    let delta = Model::from_parts(current.layout().clone(), delta_w, delta_b)?;
    match source {
        InnerSource::Exhaustive => {
            let en = Enumeration::new(proposal)?;
            let log_z = en.log_z();
            let terms = en.energies().iter().enumerate().map(|(mask, e)| {
                let s = crate::exact::mask_to_state(mask, proposal.k());
                e - log_z + delta.log_unnorm_unchecked(&s)
            });
            Ok(log_sum_exp(terms))
        }
        InnerSource::Gibbs { n_samples, burn_in } => {
            if n_samples == 0 {
                return Err(Error::InvalidConfig("ratio estimator needs at least one inner sample".into()));
            }
            if inner.len() != proposal.k() {
                *inner = vec![0; proposal.k()];
            }
            for _ in 0..burn_in {
                gibbs_sweep(proposal, inner, rng, ScanOrder::Systematic);
            }
            let mut logs = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                gibbs_sweep(proposal, inner, rng, ScanOrder::Systematic);
                logs.push(delta.log_unnorm_unchecked(inner));
            }
            Ok(log_sum_exp(logs) - (n_samples as f64).ln())
        }
    }
}

/// One Metropolis step with `(Z(W)/Z(W'))^N` estimated from states of
/// `p(s|W')`. `inner` carries the persistent Gibbs state between steps.
pub fn ratio_metropolis_step(
    problem: &Problem,
    params: &mut ParamVector,
    proposer: &mut Proposer,
    source: InnerSource,
    inner: &mut Vec<u8>,
    rng: &mut ChainRng,
) -> Result<StepOutcome> {
    let (proposal, coord) = proposer.propose(params, rng);
    let mut diag = StepDiagnostics { coord, ..Default::default() };
    let current = Model::from_params(params)?;
    let next = Model::from_params(&proposal)?;
    let lr = match log_ratio(&current, &next, source, inner, rng) {
        Ok(v) if v.is_finite() => v,
        Ok(_) | Err(Error::NonFinite(_)) => {
            diag.failed = true;
            let _: f64 = rng.random();
            return Ok(StepOutcome { accepted: false, diagnostics: diag });
        }
        Err(e) => return Err(e),
    };
    let log_a = problem.log_joint_without_z(&proposal) - problem.log_joint_without_z(params) + problem.n_rows() * lr;
    diag.log_accept = Some(log_a);
    let accepted = accept_draw(log_a, rng);
    if accepted {
        *params = proposal;
    }
    Ok(StepOutcome { accepted, diagnostics: diag })
}

/// Uncorrected Langevin: `θ ← θ + (ε²/2)·∇log p(S, θ) + ε·n` on the free
/// coordinates, with the unclamped expectations from `estimator`.
pub fn langevin_step(
    problem: &Problem,
    params: &mut ParamVector,
    estimator: &mut dyn MomentEstimator,
    epsilon: f64,
    rng: &mut ChainRng,
) -> Result<StepOutcome> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig("Langevin step size must be positive".into()));
    }
    let model = Model::from_params(params)?;
    let moments = estimator.moments(&model, problem.data(), rng)?;
    let grad = grad_log_joint(problem.suff(), problem.prior(), params, &moments)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("Langevin gradient".into()));
    }
    let drift = 0.5 * epsilon * epsilon;
    for &c in problem.free() {
        let n: f64 = rng.sample(StandardNormal);
        params.values[c] += drift * grad[c] + epsilon * n;
    }
    let diagnostics = StepDiagnostics { converged: estimator.last_converged(), ..Default::default() };
    Ok(StepOutcome { accepted: true, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::BpConfig;
    use crate::exact::exact_log_z;
    use crate::model::{DataSet, GaussianPrior, Layout};
    use crate::params::{BetheLogZ, ExactLogZ, ExactMomentEstimator};
    use crate::testutil::{random_model, random_tree_model};
    use rand::SeedableRng;

    fn problem_for(model: &Model, n: usize, seed: u64) -> Problem {
        let rows = crate::exact::exact_sample(model, &mut ChainRng::seed_from_u64(seed), n).unwrap();
        Problem::new(model.layout().clone(), DataSet::from_rows(model.k(), rows).unwrap(), GaussianPrior::default()).unwrap()
    }

    #[test]
    fn identical_proposal_is_always_accepted() {
        let m = random_model(5, 0.5, 1.0, 1);
        let p = problem_for(&m, 30, 2);
        let theta = m.to_params();
        let lz = exact_log_z(&m).unwrap();
        assert_eq!(log_acceptance(&p, &theta, &theta, lz, lz), 0.0);
        let mut rng = ChainRng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(accept_draw(0.0, &mut rng));
        }
        let mut inner = Vec::new();
        let lr = log_ratio(&m, &m, InnerSource::Gibbs { n_samples: 10, burn_in: 0 }, &mut inner, &mut rng).unwrap();
        assert_eq!(lr, 0.0);
    }

    #[test]
    fn acceptance_matches_direct_posterior_ratio() {
        let m = random_model(5, 0.5, 1.0, 4);
        let p = problem_for(&m, 40, 5);
        let a = m.to_params();
        let mut b = a.clone();
        b.values[0] += 0.3;
        b.values[6] -= 0.2;
        let direct = |t: &ParamVector| {
            let model = Model::from_params(t).unwrap();
            let ll: f64 = p.data().expanded().map(|r| model.log_unnorm(r).unwrap()).sum::<f64>()
                - p.n_rows() * exact_log_z(&model).unwrap();
            ll + crate::model::log_prior(p.prior(), t)
        };
        let la = log_acceptance(&p, &a, &b, exact_log_z(&m).unwrap(), exact_log_z(&Model::from_params(&b).unwrap()).unwrap());
        assert!((la - (direct(&b) - direct(&a))).abs() < 1e-9);
    }

    #[test]
    fn exhaustive_ratio_matches_exact_difference() {
        for seed in 0..20 {
            let a = random_model(7, 0.5, 1.0, 100 + seed);
            let b = random_model(7, 0.5, 1.0, 100 + seed);
            let mut pb = b.to_params();
            pb.values.iter_mut().enumerate().for_each(|(c, v)| *v += 0.05 * (c as f64).sin());
            let b = Model::from_params(&pb).unwrap();
            let lr = log_ratio(&a, &b, InnerSource::Exhaustive, &mut Vec::new(), &mut ChainRng::seed_from_u64(0)).unwrap();
            let exact = exact_log_z(&a).unwrap() - exact_log_z(&b).unwrap();
            assert!((lr - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn bethe_on_tree_gives_exact_acceptance() {
        let m = random_tree_model(7, 0.8, 6);
        let p = problem_for(&m, 50, 7);
        let mut proposer = Proposer::new(ProposalConfig::default(), p.free()).unwrap();
        let mut rng = ChainRng::seed_from_u64(8);
        let mut bethe = BetheLogZ::new(BpConfig::default(), true);
        let current = m.to_params();
        for _ in 0..40 {
            let (prop, _) = proposer.propose(&current, &mut rng);
            let pm = Model::from_params(&prop).unwrap();
            let exact = log_acceptance(&p, &current, &prop, exact_log_z(&m).unwrap(), exact_log_z(&pm).unwrap());
            let approx = log_acceptance(&p, &current, &prop, exact_log_z(&m).unwrap(), bethe.log_z(&pm).unwrap().log_z);
            assert!((exact.min(0.0).exp() - approx.min(0.0).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn langevin_leaves_point_unchanged_without_gradient_or_noise_effect() {
        // Zero model, no data: the gradient is −θ/σ² = 0 at θ = 0, so the
        // update is pure noise of scale ε.
        let layout = Layout::complete(3).unwrap();
        let p = Problem::new(layout.clone(), DataSet::empty(3), GaussianPrior::default()).unwrap();
        let mut theta = ParamVector::zeros(layout);
        let mut est = ExactMomentEstimator::default();
        let mut rng = ChainRng::seed_from_u64(1);
        let mut rng2 = rng.clone();
        langevin_step(&p, &mut theta, &mut est, 1e-3, &mut rng).unwrap();
        for v in &theta.values {
            let n: f64 = rng2.sample(StandardNormal);
            assert!((v - 1e-3 * n).abs() < 1e-15);
        }
    }

    #[test]
    fn langevin_prior_only_variance_matches_linear_recursion() {
        // θ' = θ(1 − ε²/(2σ²)) + εn has stationary variance ε²/(1 − ρ²).
        let layout = Layout::new(2, [(0, 1)]).unwrap();
        let prior = GaussianPrior::new(0.5, 2.0).unwrap();
        let p = Problem::new(layout.clone(), DataSet::empty(2), prior).unwrap();
        let eps = 0.3;
        let mut theta = ParamVector::zeros(layout);
        let mut est = ExactMomentEstimator::default();
        let mut rng = ChainRng::seed_from_u64(2);
        let n = 200_000;
        let mut samples = vec![Vec::with_capacity(n); 3];
        for _ in 0..1000 {
            langevin_step(&p, &mut theta, &mut est, eps, &mut rng).unwrap();
        }
        for _ in 0..n {
            langevin_step(&p, &mut theta, &mut est, eps, &mut rng).unwrap();
            for c in 0..3 {
                samples[c].push(theta.values[c]);
            }
        }
        for (c, s) in samples.iter().enumerate() {
            let var_prior = prior.variance(&p.layout, c);
            let rho = 1.0 - eps * eps / (2.0 * var_prior);
            let expected = eps * eps / (1.0 - rho * rho);
            let mean = s.iter().sum::<f64>() / n as f64;
            let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // AR(1): the sample variance has relative SE ≈ sqrt(2(1+ρ²)/(n(1−ρ²))).
            let rel_se = (2.0 * (1.0 + rho * rho) / (n as f64 * (1.0 - rho * rho))).sqrt();
            assert!((var / expected - 1.0).abs() < 3.0 * rel_se, "coord {c}: {var} vs {expected}");
        }
    }

    #[test]
    fn langevin_drift_vanishes_at_stationary_point() {
        // Data sums equal to N·exact moments and θ = 0 (zero prior gradient).
        let layout = Layout::complete(2).unwrap();
        let rows = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let p = Problem::new(layout.clone(), DataSet::from_rows(2, rows).unwrap(), GaussianPrior::default()).unwrap();
        let theta = ParamVector::zeros(layout);
        let m = Model::from_params(&theta).unwrap();
        let ex = crate::exact::exact_moments(&m).unwrap();
        let g = grad_log_joint(p.suff(), p.prior(), &theta, &ex).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_coordinate_proposals_cycle_through_free_coords() {
        let layout = Layout::complete(3).unwrap();
        let mut pr = Proposer::new(ProposalConfig::default(), &[1, 4]).unwrap();
        let theta = ParamVector::zeros(layout);
        let mut rng = ChainRng::seed_from_u64(0);
        let coords: Vec<_> = (0..4).map(|_| pr.propose(&theta, &mut rng).1.unwrap()).collect();
        assert_eq!(coords, vec![1, 4, 1, 4]);
        assert!(Proposer::new(ProposalConfig { std_dev: 0.0, ..Default::default() }, &[0]).is_err());
    }

    #[test]
    fn metropolis_step_caches_log_z_of_current_point() {
        let m = random_model(4, 0.6, 0.5, 9);
        let p = problem_for(&m, 20, 10);
        let mut approx = ExactLogZ::default();
        let mut state = MetropolisState::new(m.to_params(), &mut approx).unwrap();
        let mut proposer = Proposer::new(ProposalConfig::default(), p.free()).unwrap();
        let mut rng = ChainRng::seed_from_u64(11);
        for _ in 0..200 {
            metropolis_step(&p, &mut state, &mut proposer, &mut approx, NonConvergencePolicy::UseValue, &mut rng).unwrap();
            let lz = exact_log_z(&Model::from_params(&state.params).unwrap()).unwrap();
            assert!((state.log_z - lz).abs() < 1e-12);
        }
    }
}
