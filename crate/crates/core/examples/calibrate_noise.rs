//! Sweeps symmetric flip probabilities for the nine-qubit six-ones dataset and
//! reports the secret's median rank before mitigation together with the mean
//! rank change of each method.
//!
//! cargo run --release --example calibrate_noise -- [seed]

use hammrl::evaluation::compare_methods;
use hammrl::{Dataset, DatasetSpec, Method, NoiseModel};

fn main() -> hammrl::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let methods = [Method::hammr_l_default(), Method::Poisson { lambda: None }, Method::Hammer, Method::Identity];
    println!("base,per_cnot,p_eff,median_rank_before,hammr-l,poisson,hammer,identity");
    for per_cnot in [0.07, 0.0715, 0.072, 0.073, 0.074, 0.075] {
        let base = 0.02;
        let noise = NoiseModel::symmetric(base, per_cnot, seed);
        let spec = DatasetSpec { n_qubits: 9, ones_count: 6, shots: 10240, noise };
        let circuits: Vec<_> = hammrl::generate_dataset(&spec)?.into_iter().map(|(_, c)| c).collect();
        let ds = Dataset::new("n9-k6", circuits, Some(noise))?;
        let cmp = compare_methods(std::slice::from_ref(&ds), &methods, 0)?;
        let mut before: Vec<usize> = cmp.reports[0].records.iter().map(|r| r.rank_before).collect();
        before.sort_unstable();
        let median = before[before.len() / 2];
        let means: Vec<String> = cmp.reports.iter().map(|r| format!("{:.2}", r.mean_rank_change)).collect();
        println!("{base},{per_cnot},{:.3},{median},{}", noise.effective_flip_prob(6), means.join(","));
    }
    Ok(())
}
