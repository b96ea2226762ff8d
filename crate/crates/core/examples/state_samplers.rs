//! Gibbs and Swendsen–Wang state samplers against exact marginals.

use boltzmann_bayes::exact::exact_moments;
use boltzmann_bayes::model::Model;
use boltzmann_bayes::states::{gibbs_sweep, swendsen_wang_sweep, AgreementModel, ScanOrder};
use boltzmann_bayes::ChainRng;
use rand::SeedableRng;

fn main() -> boltzmann_bayes::Result<()> {
    let m = Model::new(4, vec![(0, 1, 0.9), (1, 2, -0.4), (2, 3, 0.7), (0, 3, 0.2)], vec![-0.3, 0.2, 0.0, 0.1])?;
    let exact = exact_moments(&m)?;
    let mut rng = ChainRng::seed_from_u64(0);
    let mut state = vec![0u8; 4];
    let mut sum = [0.0; 4];
    let n = 200_000;
    for _ in 0..n {
        gibbs_sweep(&m, &mut state, &mut rng, ScanOrder::Systematic);
        for (s, &v) in sum.iter_mut().zip(&state) {
            *s += f64::from(v);
        }
    }
    println!("gibbs marginals {:?}", sum.map(|s| (s / n as f64 * 1e3).round() / 1e3));
    println!("exact marginals {:?}", exact.node_marginals.iter().map(|p| (p * 1e3).round() / 1e3).collect::<Vec<_>>());

    let agree = AgreementModel::new(4, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, 0.8)])?;
    let (bm, _) = agree.to_boltzmann()?;
    let mut state = vec![0u8; 4];
    let mut agree_01 = 0.0;
    for _ in 0..n {
        swendsen_wang_sweep(&agree, &mut state, None, &mut rng)?;
        agree_01 += f64::from(u8::from(state[0] == state[1]));
    }
    let exact_bm = exact_moments(&bm)?;
    let p_agree = 1.0 - exact_bm.node_marginals[0] - exact_bm.node_marginals[1] + 2.0 * exact_bm.edge_moments[0];
    println!("P(s0 = s1): swendsen-wang {:.3}, exact {p_agree:.3}", agree_01 / n as f64);
    Ok(())
}
