//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical paths: distances are
//! counted character by character, kernels are dense matrices over the whole
//! space, and the HAMMER formulas are evaluated through explicit neighbor
//! enumeration.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hammrl::{BitString, ProbDistribution};
use nalgebra::{DMatrix, DVector};

pub fn bs(s: &str) -> BitString {
    s.parse().unwrap()
}

/// Character-wise Hamming distance of the text forms.
pub fn text_distance(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).filter(|(x, y)| x != y).count()
}

pub fn all_strings(n: usize) -> Vec<String> {
    (0..1usize << n).map(|i| format!("{i:0n$b}")).collect()
}

/// Dense Richardson-Lucy over the whole 2^N space.
pub struct DenseRl {
    pub strings: Vec<String>,
    pub kernel: DMatrix<f64>,
    pub observed: DVector<f64>,
}

impl DenseRl {
    /// `weight(h)` is the kernel at distance `h`; `None` cutoff keeps all pairs.
    pub fn new(d: &ProbDistribution, weight: impl Fn(usize) -> f64, include_self: bool, cutoff: Option<usize>) -> Self {
        let n = d.n_qubits();
        let strings = all_strings(n);
        let m = strings.len();
        let kernel = DMatrix::from_fn(m, m, |i, j| {
            let h = text_distance(&strings[i], &strings[j]);
            if (h == 0 && !include_self) || cutoff.is_some_and(|c| h > c) {
                0.0
            } else {
                weight(h)
            }
        });
        let observed = DVector::from_fn(m, |i, _| d.get(&bs(&strings[i])));
        Self { strings, kernel, observed }
    }

    pub fn reciprocal(d: &ProbDistribution) -> Self {
        Self::new(d, |h| 1.0 / (h as f64 + 1.0), true, None)
    }

    /// One multiplicative update, unnormalized.
    pub fn step(&self, u: &DVector<f64>) -> DVector<f64> {
        let blurred = &self.kernel * u;
        let ratio = DVector::from_fn(u.len(), |i, _| {
            if self.observed[i] == 0.0 {
                0.0
            } else {
                self.observed[i] / blurred[i]
            }
        });
        let back = self.kernel.transpose() * ratio;
        u.component_mul(&back)
    }

    /// Iterates from the observation; returns every unnormalized iterate.
    pub fn run(&self, max_iterations: usize, tol: f64) -> Vec<DVector<f64>> {
        let mut u = self.observed.clone();
        let mut out = Vec::new();
        for _ in 0..max_iterations {
            let next = self.step(&u);
            let l1 = (&next - &u).abs().sum();
            u = next;
            out.push(u.clone());
            if l1 < tol {
                break;
            }
        }
        out
    }

    /// Normalized final estimate restricted to strings with positive mass.
    pub fn normalized(&self, u: &DVector<f64>) -> BTreeMap<BitString, f64> {
        let total = u.sum();
        self.strings
            .iter()
            .zip(u.iter())
            .filter(|(_, &x)| x > 0.0)
            .map(|(s, &x)| (bs(s), x / total))
            .collect()
    }

    /// Values of `u` on the observed support, in lexicographic order.
    pub fn on_support(&self, u: &DVector<f64>) -> Vec<f64> {
        self.strings
            .iter()
            .zip(u.iter())
            .filter(|(s, _)| self.observed[self.index(s)] > 0.0)
            .map(|(_, &x)| x)
            .collect()
    }

    fn index(&self, s: &str) -> usize {
        usize::from_str_radix(s, 2).unwrap()
    }
}

/// HAMMER evaluated literally: CHS, W, the strict-less filter, S and L,
/// with the sum over distances running to max(1, floor(N/2)).
pub fn hammer_literal(d: &ProbDistribution) -> BTreeMap<BitString, f64> {
    let n = d.n_qubits();
    let top = (n / 2).max(1);
    let pr = |y: &BitString| d.get(y);
    let mut likelihood = BTreeMap::new();
    for (x, &px) in d.iter() {
        let mut score = 0.0;
        for i in 1..=top {
            let shell = hammrl::neighbors_at_distance(x, i).unwrap();
            let chs: f64 = shell.iter().map(pr).sum();
            let w = if chs != 0.0 { 1.0 / chs } else { 0.0 };
            let filtered: f64 = shell.iter().map(|y| pr(y) * if pr(y) < px { 1.0 } else { 0.0 }).sum();
            score += w * filtered;
        }
        likelihood.insert(*x, score * px);
    }
    let total: f64 = likelihood.values().sum();
    if total == 0.0 {
        return d.probs().clone();
    }
    likelihood.into_iter().filter(|(_, l)| *l > 0.0).map(|(k, l)| (k, l / total)).collect()
}

/// Small deterministic generator for fuzz cases (SplitMix64).
pub struct Fuzz(pub u64);

impl Fuzz {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Random sparse distribution over `n` qubits, built from integer counts
    /// so that ties occur now and then.
    pub fn distribution(&mut self, n: usize) -> ProbDistribution {
        let space = 1u64 << n;
        let support = 1 + self.below(space) as usize;
        let mut weights = BTreeMap::new();
        for _ in 0..support {
            let k = BitString::new(self.below(space), n).unwrap();
            *weights.entry(k).or_insert(0.0) += (1 + self.below(50)) as f64;
        }
        ProbDistribution::from_weights(n, weights).unwrap()
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            p.swap(i, j);
        }
        p
    }
}
