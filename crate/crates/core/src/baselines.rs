//! Neighborhood-score baselines: HAMMER and a Poisson-weighted variant.
//!
//! Both score each observed string `x` by looking at observed strings `y` at
//! distances `1..=max(1, N/2)`, counting only neighbors less likely than `x`,
//! and rescale `Pr(x)` by that score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, Poisson};

use crate::distribution::ProbDistribution;
use crate::error::{Error, Result};
use crate::hamming::BitString;

/// Label used for the Poisson baseline in reports.
pub const POISSON_LABEL: &str = "QBEEP-style (simplified)";

/// Per-string HAMMER quantities. Index `i` of `chs` and `weights` holds the
/// value at distance `i`; index 0 is unused and zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HammerScore {
    pub string: BitString,
    pub chs: Vec<f64>,
    pub weights: Vec<f64>,
    pub score: f64,
    pub likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonBaselineConfig {
    /// Expected bit flips per shot.
    pub lambda: f64,
}

impl PoissonBaselineConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

/// Largest neighbor distance that contributes to a score.
pub fn max_score_distance(n_qubits: usize) -> usize {
    (n_qubits / 2).max(1)
}

/// Neighbor filter: a neighbor counts only if strictly less likely than the
/// string being scored.
#[inline]
pub fn passes_filter(p_string: f64, p_neighbor: f64) -> bool {
    p_neighbor < p_string
}

/// Per-distance sums for one string: total neighbor mass, and mass of
/// neighbors strictly less likely than the string itself.
fn shell_sums(x: usize, keys: &[BitString], probs: &[f64], max_dist: usize) -> (Vec<f64>, Vec<f64>) {
    let mut chs = vec![0.0; max_dist + 1];
    let mut lower = vec![0.0; max_dist + 1];
    let (kx, px) = (keys[x], probs[x]);
    for (ky, &py) in keys.iter().zip(probs) {
        let h = kx.distance_unchecked(ky) as usize;
        if h == 0 || h > max_dist {
            continue;
        }
        chs[h] += py;
        if passes_filter(px, py) {
            lower[h] += py;
        }
    }
    (chs, lower)
}

fn split(d: &ProbDistribution) -> (Vec<BitString>, Vec<f64>) {
    d.iter().map(|(&k, &p)| (k, p)).unzip()
}

/// Full HAMMER score breakdown for every observed string, in lexicographic order.
pub fn hammer_scores(d: &ProbDistribution) -> Vec<HammerScore> {
    let (keys, probs) = split(d);
    let max_dist = max_score_distance(d.n_qubits());
    (0..keys.len())
        .into_par_iter()
        .map(|x| {
            let (chs, lower) = shell_sums(x, &keys, &probs, max_dist);
            let weights: Vec<f64> =
                chs.iter().enumerate().map(|(i, &c)| if i == 0 || c == 0.0 { 0.0 } else { 1.0 / c }).collect();
            let score = (1..=max_dist).map(|i| weights[i] * lower[i]).sum::<f64>();
            HammerScore { string: keys[x], chs, weights, score, likelihood: score * probs[x] }
        })
        .collect()
}

fn renormalize_or_keep(d: &ProbDistribution, likelihoods: Vec<(BitString, f64)>) -> Result<ProbDistribution> {
    if likelihoods.iter().all(|&(_, l)| l == 0.0) {
        return Ok(d.clone());
    }
    ProbDistribution::from_weights(d.n_qubits(), likelihoods)
}

/// HAMMER: rescale each probability by its neighborhood score and
/// renormalize. Returns the input when every likelihood is zero.
pub fn hammer_mitigate(d: &ProbDistribution) -> Result<ProbDistribution> {
    let l = hammer_scores(d).into_iter().map(|s| (s.string, s.likelihood)).collect();
    renormalize_or_keep(d, l)
}

/// The HAMMER pipeline with a Poisson pmf over distance in place of the
/// inverse cumulative strength.
pub fn poisson_mitigate(d: &ProbDistribution, cfg: &PoissonBaselineConfig) -> Result<ProbDistribution> {
    let pmf = Poisson::new(cfg.lambda).map_err(|e| Error::invalid(format!("lambda: {e}")))?;
    let max_dist = max_score_distance(d.n_qubits());
    let shell_weight: Vec<f64> = (0..=max_dist).map(|i| pmf.pmf(i as u64)).collect();
    let (keys, probs) = split(d);
    let l: Vec<(BitString, f64)> = (0..keys.len())
        .into_par_iter()
        .map(|x| {
            let (_, lower) = shell_sums(x, &keys, &probs, max_dist);
            let score = (1..=max_dist).map(|i| shell_weight[i] * lower[i]).sum::<f64>();
            (keys[x], score * probs[x])
        })
        .collect();
    renormalize_or_keep(d, l)
}
