mod common;

use std::io::BufReader;

use boltzmann_bayes::approx::{loopy_bp, mean_field, pseudo_log_likelihood, select_tree, tree_bound, BpConfig, MeanFieldConfig, TreeConfig};
use boltzmann_bayes::exact::{exact_log_z, exact_moments};
use boltzmann_bayes::experiments::{load_table, write_table, ExperimentConfig, ExperimentKind, RunSpec};
use boltzmann_bayes::hidden::{agreement_model, clamped_log_zx, hidden_loglik, semisup_to_bm, Label, PointSet, SigmaParams, ZxEstimator};
use boltzmann_bayes::model::{devectorize, vectorize, DataSet, GaussianPrior, Layout, Model, ParamVector, HIDDEN};
use boltzmann_bayes::params::{histogram, log_acceptance, overlap_coefficient, run_chain, Approximator, Chain, ChainConfig, Method, Problem};
use boltzmann_bayes::ChainRng;
use common::{gibbs_sweep_matrix, naive_log_z, naive_probs, random_model, random_tree, state};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn vectorize_inverts_devectorize(k in 1usize..8, density in 0.0f64..1.0, seed in any::<u64>(), scale in 0.0f64..1e6) {
        let layout = random_model(k, density, 1.0, seed).layout().clone();
        let mut rng = ChainRng::seed_from_u64(seed ^ 1);
        let values: Vec<f64> = (0..layout.n_params()).map(|_| scale * (rand::Rng::random::<f64>(&mut rng) - 0.5)).collect();
        let m = devectorize(&layout, &values).unwrap();
        let back = vectorize(&m);
        prop_assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let again = devectorize(&layout, &back.values).unwrap();
        prop_assert_eq!(again, m);
    }

    #[test]
    fn edge_order_does_not_change_the_model(k in 2usize..8, density in 0.0f64..1.0, seed in any::<u64>(), flip in any::<bool>()) {
        let m = random_model(k, density, 1.0, seed);
        let mut edges: Vec<(usize, usize, f64)> = m.layout().edges().iter().zip(m.weights()).map(|(&(i, j), &w)| if flip { (j, i, w) } else { (i, j, w) }).collect();
        edges.shuffle(&mut ChainRng::seed_from_u64(seed.wrapping_add(3)));
        let shuffled = Model::new(k, edges, m.biases().to_vec()).unwrap();
        prop_assert_eq!(&vectorize(&shuffled).values, &vectorize(&m).values);
        for x in 0..1usize << k {
            let s = state(x, k);
            prop_assert_eq!(shuffled.log_unnorm(&s).unwrap(), m.log_unnorm(&s).unwrap());
        }
    }

    #[test]
    fn enumeration_matches_brute_force(k in 1usize..=10, density in 0.0f64..1.0, scale in 0.0f64..3.0, seed in any::<u64>()) {
        let m = random_model(k, density, scale, seed);
        prop_assert!(close(exact_log_z(&m).unwrap(), naive_log_z(&m), 1e-12));
    }

    #[test]
    fn lower_bounds_stay_below_log_z(k in 2usize..=9, density in 0.0f64..1.0, scale in 0.0f64..2.0, seed in any::<u64>()) {
        let m = random_model(k, density, scale, seed);
        let z = naive_log_z(&m);
        let mf = mean_field(&m, None, &MeanFieldConfig::default()).unwrap();
        prop_assert!(mf.log_z_estimate <= z + 1e-9, "mean field {} > {}", mf.log_z_estimate, z);
        for w in mf.bound_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "mean-field trace decreased");
        }
        let tb = tree_bound(&m, &select_tree(&m), None, &TreeConfig::default()).unwrap();
        prop_assert!(tb.log_z_estimate <= z + 1e-9, "tree {} > {}", tb.log_z_estimate, z);
        for w in tb.bound_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "tree trace decreased");
        }
    }

    #[test]
    fn bp_is_exact_on_trees(k in 1usize..=10, scale in 0.0f64..2.0, seed in any::<u64>()) {
        let m = random_tree(k, scale, seed);
        let bp = loopy_bp(&m, &BpConfig::default()).unwrap();
        prop_assert!(bp.converged);
        prop_assert!(close(bp.log_z_estimate, naive_log_z(&m), 1e-8));
        let p = naive_probs(&m);
        for i in 0..k {
            let marg: f64 = (0..p.len()).filter(|x| (x >> i) & 1 == 1).map(|x| p[x]).sum();
            prop_assert!((bp.node_marginals[i] - marg).abs() < 1e-8);
        }
    }

    #[test]
    fn pseudo_likelihood_is_exact_without_edges(k in 1usize..8, seed in any::<u64>(), n in 1usize..20) {
        let m = random_model(k, 0.0, 1.5, seed);
        let mut rng = ChainRng::seed_from_u64(seed ^ 7);
        let rows: Vec<Vec<u8>> = (0..n).map(|_| (0..k).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect()).collect();
        let lz = naive_log_z(&m);
        let exact: f64 = rows.iter().map(|r| common::energy(&m, r) - lz).sum();
        let pll = pseudo_log_likelihood(&m, &DataSet::from_rows(k, rows).unwrap()).unwrap();
        prop_assert!(close(pll, exact, 1e-10));
    }

    #[test]
    fn clamped_partitions_sum_to_z(k in 1usize..=8, density in 0.0f64..1.0, seed in any::<u64>(), mask in any::<u16>()) {
        let m = random_model(k, density, 1.0, seed);
        let hidden: Vec<bool> = (0..k).map(|i| (mask >> i) & 1 == 1).collect();
        let observed: Vec<usize> = (0..k).filter(|&i| !hidden[i]).collect();
        let mut logs = Vec::new();
        for x in 0..1usize << observed.len() {
            let mut row = vec![HIDDEN; k];
            for (b, &i) in observed.iter().enumerate() {
                row[i] = ((x >> b) & 1) as u8;
            }
            logs.push(clamped_log_zx(&m, &row, ZxEstimator::default()).unwrap());
            let ll = hidden_loglik(&m, &row).unwrap();
            prop_assert!(ll <= 0.0);
            if observed.is_empty() {
                prop_assert!(ll.abs() < 1e-12);
            }
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        prop_assert!(close(total, naive_log_z(&m), 1e-10));
    }

    #[test]
    fn semisup_conversion_preserves_probabilities(n in 2usize..=7, seed in any::<u64>(), lx in -2.0f64..1.0, ly in -2.0f64..1.0) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (0..n).map(|_| (rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng))).collect();
        let labels: Vec<Label> = (0..n).map(|i| [Label::Zero, Label::One, Label::Unlabelled][(i + seed as usize) % 3]).collect();
        let set = PointSet::new(points, labels).unwrap();
        let sigma = SigmaParams::new(lx, ly);
        let agree = agreement_model(&set, sigma).unwrap();
        let bm = semisup_to_bm(&set, sigma).unwrap();
        let a: Vec<f64> = (0..1usize << n).map(|x| agree.log_unnorm(&state(x, n))).collect();
        let b: Vec<f64> = (0..1usize << n).map(|x| bm.model.log_unnorm(&state(x, n)).unwrap() + bm.constant).collect();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-10);
        }
        prop_assert_eq!(bm.row, set.row());
    }

    #[test]
    fn histogram_counts_in_range_values(values in prop::collection::vec(-10.0f64..10.0, 0..200), lo in -5.0f64..0.0, width in 0.1f64..6.0, bins in 1usize..40) {
        let hi = lo + width;
        let h = histogram(&values, lo, hi, bins);
        prop_assert_eq!(h.total() as usize, values.iter().filter(|&&v| v >= lo && v <= hi).count());
        if h.total() > 0 {
            prop_assert!((h.normalized().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in prop::collection::vec(-3.0f64..3.0, 1..100), b in prop::collection::vec(-3.0f64..3.0, 1..100), bins in 2usize..30) {
        let ha = histogram(&a, -3.0, 3.0, bins);
        let hb = histogram(&b, -3.0, 3.0, bins);
        let ab = overlap_coefficient(&ha, &hb).unwrap();
        let ba = overlap_coefficient(&hb, &ha).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!((overlap_coefficient(&ha, &ha).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_round_trips(k in 1usize..8, seed in any::<u64>(), n in 1usize..30) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let rows: Vec<Vec<u8>> = (0..n).map(|_| (0..k).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect()).collect();
        let data = DataSet::from_rows(k, rows).unwrap();
        let mut buf = Vec::new();
        write_table(&data, &mut buf).unwrap();
        let back = load_table(buf.as_slice(), Some(k)).unwrap();
        prop_assert_eq!(back.merged(), data.merged());
    }

    #[test]
    fn point_sets_round_trip(n in 2usize..20, seed in any::<u64>()) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (0..n).map(|_| (rand::Rng::random::<f64>(&mut rng) * 10.0 - 5.0, rand::Rng::random::<f64>(&mut rng))).collect();
        let labels = (0..n).map(|i| [Label::Zero, Label::One, Label::Unlabelled][i % 3]).collect();
        let set = PointSet::new(points, labels).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        prop_assert_eq!(PointSet::from_reader(buf.as_slice()).unwrap(), set);
    }

    #[test]
    fn experiment_configs_round_trip(seed in any::<u64>(), iterations in 1usize..1_000_000, bins in 2usize..200, kind in 0usize..5, w in 0.01f64..10.0) {
        let kinds = [ExperimentKind::Heart, ExperimentKind::Synthetic, ExperimentKind::Semisup, ExperimentKind::FlawedDemo, ExperimentKind::Custom];
        let mut c = ExperimentConfig::for_kind(kinds[kind]);
        c.seed = seed;
        c.iterations = iterations;
        c.bins = bins;
        c.prior = GaussianPrior::new(w, w * 0.5).unwrap();
        c.runs = Some(vec![RunSpec::new(Method::Langevin, Approximator::Brief)]);
        let json = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        let toml_text = toml::to_string(&c).unwrap();
        let from_toml: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        prop_assert_eq!(from_toml, c);
    }
}

fn small_problem() -> Problem {
    let layout = Layout::complete(3).unwrap();
    let data = DataSet::from_rows(3, vec![vec![1, 0, 1], vec![0, 0, 1], vec![1, 1, 1], vec![0, 1, 0]]).unwrap();
    Problem::new(layout, data, GaussianPrior::default()).unwrap()
}

const METHODS: [(Method, Approximator); 5] = [
    (Method::Metropolis, Approximator::Exact),
    (Method::Metropolis, Approximator::Bethe),
    (Method::RatioMetropolis, Approximator::LongRun),
    (Method::Langevin, Approximator::Brief),
    (Method::Langevin, Approximator::Exact),
];

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn chains_round_trip_through_jsonl(seed in any::<u64>(), which in 0usize..5) {
        let (method, approximator) = METHODS[which];
        let config = ChainConfig { method, approximator, iterations: 40, thinning: 2, seed, ..ChainConfig::default() };
        let chain = run_chain(&small_problem(), &config).unwrap();
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).unwrap();
        let back = Chain::read_jsonl(BufReader::new(buf.as_slice())).unwrap();
        prop_assert_eq!(&back, &chain);
        let again = run_chain(&small_problem(), &config).unwrap();
        prop_assert_eq!(again, chain);
    }

    #[test]
    fn gibbs_sweeps_keep_the_distribution(k in 2usize..=5, density in 0.2f64..1.0, scale in 0.0f64..2.0, seed in any::<u64>()) {
        let m = random_model(k, density, scale, seed);
        let p = naive_probs(&m);
        let t = gibbs_sweep_matrix(&m);
        for y in 0..p.len() {
            let flow: f64 = (0..p.len()).map(|x| p[x] * t[x][y]).sum();
            prop_assert!((flow - p[y]).abs() < 1e-9);
        }
    }

    #[test]
    fn bethe_acceptance_is_exact_on_trees(k in 2usize..=8, seed in any::<u64>(), step in 0.01f64..0.5) {
        let m = random_tree(k, 0.8, seed);
        let layout = m.layout().clone();
        let mut rng = ChainRng::seed_from_u64(seed);
        let data = DataSet::from_rows(k, boltzmann_bayes::exact::exact_sample(&m, &mut rng, 10).unwrap()).unwrap();
        let problem = Problem::new(layout.clone(), data, GaussianPrior::default()).unwrap();
        let from = vectorize(&m);
        let mut to_values = from.values.clone();
        let c = (seed as usize) % to_values.len();
        to_values[c] += step;
        let to = ParamVector::new(layout.clone(), to_values).unwrap();
        let m2 = devectorize(&layout, &to.values).unwrap();
        let bp = BpConfig::default();
        let exact = log_acceptance(&problem, &from, &to, exact_log_z(&m).unwrap(), exact_log_z(&m2).unwrap());
        let bethe = log_acceptance(&problem, &from, &to, loopy_bp(&m, &bp).unwrap().log_z_estimate, loopy_bp(&m2, &bp).unwrap().log_z_estimate);
        prop_assert!((exact - bethe).abs() < 1e-7, "exact {} bethe {}", exact, bethe);
    }

    #[test]
    fn exact_moments_match_brute_force(k in 1usize..=8, density in 0.0f64..1.0, seed in any::<u64>()) {
        let m = random_model(k, density, 1.0, seed);
        let p = naive_probs(&m);
        let mo = exact_moments(&m).unwrap();
        for (e, &(i, j)) in m.layout().edges().iter().enumerate() {
            let v: f64 = (0..p.len()).filter(|x| (x >> i) & (x >> j) & 1 == 1).map(|x| p[x]).sum();
            prop_assert!((mo.edge_moments[e] - v).abs() < 1e-10);
        }
    }
}
