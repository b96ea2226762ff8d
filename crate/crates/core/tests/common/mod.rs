#![allow(dead_code)]

use boltzmann_bayes::model::Model;
use boltzmann_bayes::ChainRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Normal};

/// Random model: each pair is an edge with probability `density`; weights
/// and biases are `N(0, scale²)`.
pub fn random_model(k: usize, density: f64, scale: f64, seed: u64) -> Model {
    let mut rng = ChainRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).unwrap();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if rng.random::<f64>() < density {
                edges.push((i, j, normal.sample(&mut rng)));
            }
        }
    }
    let biases = (0..k).map(|_| normal.sample(&mut rng)).collect();
    Model::new(k, edges, biases).unwrap()
}

/// Random recursive tree: node `i > 0` hangs off a uniform earlier node.
pub fn random_tree(k: usize, scale: f64, seed: u64) -> Model {
    let mut rng = ChainRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).unwrap();
    let edges = (1..k).map(|i| (rng.random_range(0..i), i, normal.sample(&mut rng))).collect();
    let biases = (0..k).map(|_| normal.sample(&mut rng)).collect();
    Model::new(k, edges, biases).unwrap()
}

/// State `x` with `s_i` = bit `i`.
pub fn state(x: usize, k: usize) -> Vec<u8> {
    (0..k).map(|i| ((x >> i) & 1) as u8).collect()
}

/// Exponent computed straight from the edge list.
pub fn energy(m: &Model, s: &[u8]) -> f64 {
    let mut e: f64 = m.biases().iter().zip(s).map(|(b, &v)| b * f64::from(v)).sum();
    for (&(i, j), w) in m.layout().edges().iter().zip(m.weights()) {
        e += w * f64::from(s[i] * s[j]);
    }
    e
}

/// `log Σ_s exp(energy(s))` by brute force.
pub fn naive_log_z(m: &Model) -> f64 {
    let e: Vec<f64> = (0..1usize << m.k()).map(|x| energy(m, &state(x, m.k()))).collect();
    let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + e.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Probabilities indexed by the bit encoding of [`state`].
pub fn naive_probs(m: &Model) -> Vec<f64> {
    let lz = naive_log_z(m);
    (0..1usize << m.k()).map(|x| (energy(m, &state(x, m.k())) - lz).exp()).collect()
}

pub fn index(s: &[u8]) -> usize {
    s.iter().enumerate().map(|(i, &v)| usize::from(v) << i).sum()
}

/// Replays a fixed list of 64-bit words; `random::<f64>()` turns word `w`
/// into `(w >> 11)·2⁻⁵³`.
pub struct Scripted {
    pub words: Vec<u64>,
    pub pos: usize,
}

impl Scripted {
    pub fn uniform(m: u64) -> u64 {
        m << 11
    }
}

impl RngCore for Scripted {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }
    fn next_u64(&mut self) -> u64 {
        let w = self.words.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        w
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// Probability that one systematic `gibbs_sweep` sets site `i` to 1, given
/// that sites before `i` already moved to `target` and the rest still hold
/// `from`. Found by bisecting the uniform that the sweep consumes at `i`.
fn sweep_site_probability(m: &Model, from: &[u8], target: &[u8], i: usize) -> f64 {
    use boltzmann_bayes::states::{gibbs_sweep, ScanOrder};
    let k = m.k();
    let force = |v: u8| if v == 1 { Scripted::uniform(0) } else { Scripted::uniform((1 << 53) - 1) };
    let outcome = |u: u64| -> u8 {
        let mut words: Vec<u64> = target[..i].iter().map(|&v| force(v)).collect();
        words.push(Scripted::uniform(u));
        words.resize(k, 0);
        let mut s = from.to_vec();
        gibbs_sweep(m, &mut s, &mut Scripted { words, pos: 0 }, ScanOrder::Systematic);
        assert_eq!(&s[..i], &target[..i], "forcing uniforms did not reproduce the prefix");
        s[i]
    };
    let (mut lo, mut hi) = (0u64, 1u64 << 53);
    if outcome(0) == 0 {
        return 0.0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if outcome(mid) == 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi as f64 / (1u64 << 53) as f64
}

/// Transition matrix `T[x][y]` of one systematic Gibbs sweep, read off the
/// library sweep itself.
pub fn gibbs_sweep_matrix(m: &Model) -> Vec<Vec<f64>> {
    let k = m.k();
    let n = 1usize << k;
    let mut t = vec![vec![0.0; n]; n];
    for (x, row) in t.iter_mut().enumerate() {
        let from = state(x, k);
        for (y, cell) in row.iter_mut().enumerate() {
            let target = state(y, k);
            *cell = (0..k)
                .map(|i| {
                    let p = sweep_site_probability(m, &from, &target, i);
                    if target[i] == 1 { p } else { 1.0 - p }
                })
                .product();
        }
    }
    t
}
