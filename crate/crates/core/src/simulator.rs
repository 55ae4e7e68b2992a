//! Bernstein-Vazirani outcome simulator.
//!
//! A noiseless BV circuit returns its secret with certainty and uses one CNOT
//! per `1` in the secret. Noise is modelled as independent per-qubit bit flips
//! applied to that ideal outcome, with a flip probability that grows with the
//! CNOT count.

use std::collections::BTreeMap;
use std::path::Path;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::{CountsMap, ProbDistribution};
use crate::error::{Error, Result};
use crate::hamming::{BitString, HammingSpace, DENSE_LIMIT};

/// Shots per circuit unless configured otherwise.
pub const DEFAULT_SHOTS: u64 = 10240;

/// One BV circuit, identified by its secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BvCircuitSpec {
    pub secret: BitString,
}

impl BvCircuitSpec {
    pub fn new(secret: BitString) -> Self {
        Self { secret }
    }

    /// Data qubits; the ancilla is not measured.
    pub fn n_qubits(&self) -> usize {
        self.secret.n_qubits()
    }

    pub fn ones_count(&self) -> usize {
        self.secret.count_ones() as usize
    }

    pub fn cnot_count(&self) -> usize {
        self.ones_count()
    }

    pub fn ideal_distribution(&self) -> ProbDistribution {
        ProbDistribution::delta(self.secret)
    }
}

/// Direction-dependent flip probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipAsymmetry {
    /// Probability that an ideal 0 is read as 1.
    pub p01: f64,
    /// Probability that an ideal 1 is read as 0.
    pub p10: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub base_flip_prob: f64,
    pub per_cnot_flip_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymmetry: Option<FlipAsymmetry>,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { base_flip_prob: 0.0, per_cnot_flip_prob: 0.0, asymmetry: None, seed: 0 }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a probability, got {p}")))
    }
}

impl NoiseModel {
    pub fn symmetric(base_flip_prob: f64, per_cnot_flip_prob: f64, seed: u64) -> Self {
        Self { base_flip_prob, per_cnot_flip_prob, asymmetry: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("base_flip_prob", self.base_flip_prob)?;
        check_prob("per_cnot_flip_prob", self.per_cnot_flip_prob)?;
        if let Some(a) = self.asymmetry {
            check_prob("p01", a.p01)?;
            check_prob("p10", a.p10)?;
        }
        Ok(())
    }

    /// Symmetric flip probability for a circuit with `ones_count` CNOTs,
    /// clamped to `[0, 0.5]`.
    pub fn effective_flip_prob(&self, ones_count: usize) -> f64 {
        (self.base_flip_prob + self.per_cnot_flip_prob * ones_count as f64).clamp(0.0, 0.5)
    }

    /// Flip probability of every qubit of `spec`, in qubit order.
    pub fn flip_probs(&self, spec: &BvCircuitSpec) -> Vec<f64> {
        let sym = self.effective_flip_prob(spec.ones_count());
        (0..spec.n_qubits())
            .map(|q| match self.asymmetry {
                Some(a) if spec.secret.bit(q) => a.p10,
                Some(a) => a.p01,
                None => sym,
            })
            .collect()
    }

    /// Mean number of flipped bits per shot.
    pub fn expected_flips(&self, spec: &BvCircuitSpec) -> f64 {
        self.flip_probs(spec).iter().sum()
    }
}

/// Exact output distribution of `spec` under independent flips.
pub fn analytic_noisy_distribution(spec: &BvCircuitSpec, noise: &NoiseModel) -> Result<ProbDistribution> {
    noise.validate()?;
    let n = spec.n_qubits();
    if n > DENSE_LIMIT {
        return Err(Error::Capacity(format!(
            "exact distribution is limited to {DENSE_LIMIT} qubits, got {n}; sample instead"
        )));
    }
    let flips = noise.flip_probs(spec);
    let secret = spec.secret;
    let probs: BTreeMap<BitString, f64> = HammingSpace::new(n)?
        .enumerate()?
        .filter_map(|y| {
            let p = (0..n)
                .map(|q| if y.bit(q) != secret.bit(q) { flips[q] } else { 1.0 - flips[q] })
                .product::<f64>();
            (p > 0.0).then_some((y, p))
        })
        .collect();
    ProbDistribution::new(n, probs)
}

/// Multinomial draw of `shots` outcomes from `dist`.
pub fn sample_counts(dist: &ProbDistribution, shots: u64, seed: u64) -> Result<CountsMap> {
    if shots == 0 {
        return Err(Error::invalid("shots must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining_shots = shots;
    let mut remaining_mass = 1.0f64;
    let mut counts = BTreeMap::new();
    let m = dist.len();
    // sequential conditional binomials; the last outcome takes the remainder
    for (i, (&k, &p)) in dist.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let c = if i + 1 == m {
            remaining_shots
        } else {
            let q = (p / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, q)
                .map_err(|e| Error::invalid(format!("binomial draw: {e}")))?
                .sample(&mut rng)
        };
        remaining_shots -= c;
        remaining_mass -= p;
        if c > 0 {
            counts.insert(k, c);
        }
    }
    CountsMap::new(dist.n_qubits(), shots, counts)
}

/// Samples `shots` noisy executions shot by shot, without building the full
/// distribution. Used above the dense limit.
pub fn sample_noisy_shots(spec: &BvCircuitSpec, noise: &NoiseModel, shots: u64, seed: u64) -> Result<CountsMap> {
    noise.validate()?;
    if shots == 0 {
        return Err(Error::invalid("shots must be positive"));
    }
    let flips = noise.flip_probs(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<BitString, u64> = BTreeMap::new();
    for _ in 0..shots {
        let mut y = spec.secret;
        for (q, &p) in flips.iter().enumerate() {
            if rng.random::<f64>() < p {
                y = y.with_flipped(q);
            }
        }
        *counts.entry(y).or_default() += 1;
    }
    CountsMap::new(spec.n_qubits(), shots, counts)
}

/// Finite-shot counts for one circuit.
pub fn simulate_counts(spec: &BvCircuitSpec, noise: &NoiseModel, shots: u64, seed: u64) -> Result<CountsMap> {
    if spec.n_qubits() <= DENSE_LIMIT {
        sample_counts(&analytic_noisy_distribution(spec, noise)?, shots, seed)
    } else {
        sample_noisy_shots(spec, noise, shots, seed)
    }
}

/// Per-circuit seed: a stable hash of the master seed and the secret, so the
/// sample for a circuit does not depend on where it sits in a dataset.
pub fn derive_seed(master_seed: u64, secret: &BitString) -> u64 {
    let mut h = Sha256::new();
    h.update(b"hammrl/circuit-seed/v1");
    h.update(master_seed.to_le_bytes());
    h.update(secret.to_string().as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

/// A family of BV circuits sharing qubit count and ones count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_qubits: usize,
    pub ones_count: usize,
    pub shots: u64,
    /// `noise.seed` is the dataset's master seed.
    pub noise: NoiseModel,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        HammingSpace::new(self.n_qubits)?;
        if self.ones_count > self.n_qubits {
            return Err(Error::invalid(format!(
                "ones count {} exceeds qubit count {}",
                self.ones_count, self.n_qubits
            )));
        }
        if self.shots == 0 {
            return Err(Error::invalid("shots must be positive"));
        }
        self.noise.validate()
    }

    /// Every secret with `ones_count` ones, in lexicographic order.
    pub fn secrets(&self) -> Result<Vec<BitString>> {
        self.validate()?;
        let mut out: Vec<BitString> = (0..self.n_qubits)
            .combinations(self.ones_count)
            .map(|ones| {
                let zero = BitString::zeros(self.n_qubits).expect("validated width");
                ones.into_iter().fold(zero, |acc, q| acc.with_flipped(q))
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

/// Label stored in each generated counts file.
pub fn circuit_label(spec: &DatasetSpec, secret: &BitString) -> String {
    format!("bv-n{}-k{}-{}", spec.n_qubits, spec.ones_count, secret)
}

/// Samples every circuit of the dataset.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<(BvCircuitSpec, CountsMap)>> {
    let secrets = spec.secrets()?;
    secrets
        .into_par_iter()
        .map(|secret| {
            let circuit = BvCircuitSpec::new(secret);
            let seed = derive_seed(spec.noise.seed, &secret);
            let counts = simulate_counts(&circuit, &spec.noise, spec.shots, seed)?
                .with_secret(secret)?
                .with_label(circuit_label(spec, &secret));
            Ok((circuit, counts))
        })
        .collect()
}

/// Index file written next to a dataset's counts files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_qubits: usize,
    pub ones_count: usize,
    pub shots: u64,
    pub noise: NoiseModel,
    pub master_seed: u64,
    /// Counts file names, relative to the manifest's directory.
    pub circuits: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|source| Error::Json { context: path.display().to_string(), source })
    }

    /// Loads every counts file listed in the manifest at `path`.
    pub fn load_circuits(&self, path: &Path) -> Result<Vec<CountsMap>> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        self.circuits.iter().map(|f| CountsMap::read(&dir.join(f))).collect()
    }

    /// Short name: `n<qubits>-k<ones>`.
    pub fn dataset_name(&self) -> String {
        format!("n{}-k{}", self.n_qubits, self.ones_count)
    }
}

/// Generates a dataset and writes it under `dir`: one `<secret>.json` per
/// circuit plus `manifest.json`.
pub fn write_dataset(spec: &DatasetSpec, dir: &Path) -> Result<DatasetManifest> {
    let circuits = generate_dataset(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(circuits.len());
    for (circuit, counts) in &circuits {
        let name = format!("{}.json", circuit.secret);
        let path = dir.join(&name);
        std::fs::write(&path, counts.to_json() + "\n").map_err(|e| Error::io(&path, e))?;
        names.push(name);
    }
    let manifest = DatasetManifest {
        n_qubits: spec.n_qubits,
        ones_count: spec.ones_count,
        shots: spec.shots,
        noise: spec.noise,
        master_seed: spec.noise.seed,
        circuits: names,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
