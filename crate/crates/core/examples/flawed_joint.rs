//! The implied prior N(w; 0, 1)·Z(w)^N of the naive joint model moves with
//! the data-set size N.

use boltzmann_bayes::experiments::{run_flawed_demo, FlawedReport};
use boltzmann_bayes::experiments::FlawedConfig;

fn main() -> boltzmann_bayes::Result<()> {
    let report: FlawedReport = run_flawed_demo(&FlawedConfig::default())?;
    for (n, a) in report.n_values.iter().zip(&report.argmax) {
        println!("N = {n:3}: implied prior peaks at w = {a:.2}");
    }
    Ok(())
}
