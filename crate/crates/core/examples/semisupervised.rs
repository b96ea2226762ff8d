//! Langevin over (log σx, log σy) of the semi-supervised random field on a
//! 12-point toy, checked against the enumerated posterior.

use boltzmann_bayes::exact::GridSpec;
use boltzmann_bayes::hidden::{run_semisup_langevin, semisup_posterior_grid, sigma_histogram, toy_points_12, SemisupConfig};

fn main() -> boltzmann_bayes::Result<()> {
    let points = toy_points_12(0)?;
    let spec = GridSpec { lo: -4.0, hi: 4.0, cells: 16, subdivisions: 1 };
    let exact = semisup_posterior_grid(&points, [spec, spec])?;
    let cfg = SemisupConfig { samples: 2_000, ..Default::default() };
    let chain = run_semisup_langevin(&points, &cfg)?;
    let h = sigma_histogram(&chain.samples, [spec, spec]);
    let tv: f64 = 0.5 * h.iter().zip(&exact.mass).map(|(a, b)| (a - b).abs()).sum::<f64>();
    println!("{} samples, total variation to the exact posterior {tv:.3}", chain.samples.len());
    let corner: f64 = (0..16)
        .flat_map(|a| (0..16).map(move |b| (a, b)))
        .filter(|&(a, b)| a >= 12 && b >= 12)
        .map(|(a, b)| exact.mass[a * 16 + b])
        .sum();
    println!("exact mass with both log σ > 2: {corner:.4}");
    Ok(())
}
