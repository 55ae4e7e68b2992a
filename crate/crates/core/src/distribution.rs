//! Counts ingestion, probability distributions and the Hamming state graph.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamming::{BitString, MAX_QUBITS};

/// Allowed deviation of a distribution's total mass from 1.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Raw measurement counts of one circuit, as stored in a counts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCounts")]
pub struct CountsMap {
    pub n_qubits: usize,
    pub shots: u64,
    pub counts: BTreeMap<BitString, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secret: Option<BitString>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCounts {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<BitString, u64>,
    #[serde(default)]
    secret: Option<BitString>,
    #[serde(default)]
    label: Option<String>,
}

impl TryFrom<RawCounts> for CountsMap {
    type Error = Error;

    fn try_from(raw: RawCounts) -> Result<Self> {
        let mut c = CountsMap::new(raw.n_qubits, raw.shots, raw.counts)?;
        if let Some(secret) = raw.secret {
            c = c.with_secret(secret)?;
        }
        c.label = raw.label;
        Ok(c)
    }
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "field `n_qubits` must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(())
}

impl CountsMap {
    /// Validates and builds a counts map. Zero entries are dropped.
    pub fn new(n_qubits: usize, shots: u64, counts: BTreeMap<BitString, u64>) -> Result<Self> {
        check_width(n_qubits)?;
        if shots == 0 {
            return Err(Error::invalid("field `shots` must be positive"));
        }
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        if counts.is_empty() {
            return Err(Error::invalid("field `counts` has no observed outcomes"));
        }
        if let Some(bad) = counts.keys().find(|k| k.n_qubits() != n_qubits) {
            return Err(Error::invalid(format!(
                "field `counts`: key {bad} has length {}, expected {n_qubits}",
                bad.n_qubits()
            )));
        }
        let total = counts.values().try_fold(0u64, |acc, &c| acc.checked_add(c));
        match total {
            Some(t) if t <= shots => {}
            _ => {
                return Err(Error::invalid(format!(
                    "field `counts` sums to more than `shots` ({shots})"
                )))
            }
        }
        Ok(Self { n_qubits, shots, counts, secret: None, label: None })
    }

    pub fn with_secret(mut self, secret: BitString) -> Result<Self> {
        if secret.n_qubits() != self.n_qubits {
            return Err(Error::invalid(format!(
                "field `secret`: {secret} has length {}, expected {}",
                secret.n_qubits(),
                self.n_qubits
            )));
        }
        self.secret = Some(secret);
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Sum of the recorded counts (at most `shots`).
    pub fn recorded_total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|source| Error::Json { context: "counts file".into(), source })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|source| Error::Json { context: path.display().to_string(), source })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("counts serialize")
    }
}

/// What happened while turning counts into probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsDiagnostics {
    pub shots: u64,
    pub recorded_total: u64,
    /// True when the recorded counts fell short of `shots` and the
    /// probabilities were rescaled over the observed keys.
    pub renormalized: bool,
}

/// Sparse probability distribution over observed outcomes.
///
/// Unobserved strings are absent; every stored probability is strictly
/// positive and the total is 1 within [`SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDistribution {
    n_qubits: usize,
    probs: BTreeMap<BitString, f64>,
}

impl ProbDistribution {
    pub fn new(n_qubits: usize, probs: BTreeMap<BitString, f64>) -> Result<Self> {
        check_width(n_qubits)?;
        if probs.is_empty() {
            return Err(Error::invalid("distribution has no outcomes"));
        }
        for (k, &p) in &probs {
            if k.n_qubits() != n_qubits {
                return Err(Error::invalid(format!(
                    "key {k} has length {}, expected {n_qubits}",
                    k.n_qubits()
                )));
            }
            if !(p.is_finite() && p > 0.0 && p <= 1.0 + SUM_TOLERANCE) {
                return Err(Error::invalid(format!("probability of {k} is {p}, not in (0, 1]")));
            }
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { n_qubits, probs })
    }

    /// Normalizes nonnegative weights into a distribution, dropping zeros.
    pub fn from_weights(
        n_qubits: usize,
        weights: impl IntoIterator<Item = (BitString, f64)>,
    ) -> Result<Self> {
        check_width(n_qubits)?;
        let mut kept = BTreeMap::new();
        for (k, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("weight of {k} is {w}")));
            }
            if w > 0.0 {
                kept.insert(k, w);
            }
        }
        let total: f64 = kept.values().sum();
        if kept.is_empty() || !total.is_finite() {
            return Err(Error::invalid("weights have no positive finite mass"));
        }
        for w in kept.values_mut() {
            *w /= total;
        }
        Self::new(n_qubits, kept)
    }

    /// Converts counts to probabilities by dividing by the shot count.
    pub fn from_counts(counts: &CountsMap) -> Result<Self> {
        Self::from_counts_with_diagnostics(counts).map(|(d, _)| d)
    }

    /// Like [`from_counts`](Self::from_counts), also reporting whether the
    /// recorded counts covered every shot.
    pub fn from_counts_with_diagnostics(counts: &CountsMap) -> Result<(Self, CountsDiagnostics)> {
        if counts.counts.is_empty() {
            return Err(Error::invalid("field `counts` has no observed outcomes"));
        }
        if counts.shots == 0 {
            return Err(Error::invalid("field `shots` must be positive"));
        }
        let recorded_total = counts.recorded_total();
        // Equal to `shots` unless some shots were never recorded.
        let divisor = recorded_total as f64;
        let probs = counts.counts.iter().map(|(&k, &c)| (k, c as f64 / divisor)).collect();
        let diag = CountsDiagnostics {
            shots: counts.shots,
            recorded_total,
            renormalized: recorded_total != counts.shots,
        };
        Ok((Self::new(counts.n_qubits, probs)?, diag))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of `x`; zero when unobserved.
    pub fn get(&self, x: &BitString) -> f64 {
        self.probs.get(x).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, x: &BitString) -> bool {
        self.probs.contains_key(x)
    }

    /// Outcomes in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&BitString, &f64)> + '_ {
        self.probs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &BitString> + '_ {
        self.probs.keys()
    }

    pub fn probs(&self) -> &BTreeMap<BitString, f64> {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Most likely outcome; ties go to the lexicographically smallest string.
    pub fn argmax(&self) -> BitString {
        let mut best = self.probs.iter().next().expect("non-empty");
        for entry in self.probs.iter() {
            if entry.1 > best.1 {
                best = entry;
            }
        }
        *best.0
    }

    /// Competition rank of `target`: 1 plus the number of outcomes strictly
    /// more likely. An unobserved target has probability 0.
    pub fn rank_of(&self, target: &BitString) -> usize {
        let p = self.get(target);
        1 + self.probs.values().filter(|&&q| q > p).count()
    }

    /// Outcomes sorted by descending probability, ties in lexicographic order.
    pub fn ranked(&self) -> Vec<(BitString, f64)> {
        let mut v: Vec<(BitString, f64)> = self.probs.iter().map(|(&k, &p)| (k, p)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Total variation distance to another distribution over the same register.
    pub fn total_variation(&self, other: &ProbDistribution) -> f64 {
        let mut acc = 0.0;
        for (k, &p) in &self.probs {
            acc += (p - other.get(k)).abs();
        }
        for (k, &q) in &other.probs {
            if !self.probs.contains_key(k) {
                acc += q;
            }
        }
        0.5 * acc
    }

    /// Relabels every outcome through `f`, which must be injective.
    pub fn map_keys(&self, f: impl Fn(&BitString) -> BitString) -> Result<Self> {
        let probs: BTreeMap<_, _> = self.probs.iter().map(|(k, &p)| (f(k), p)).collect();
        if probs.len() != self.probs.len() {
            return Err(Error::invalid("relabeling is not injective"));
        }
        Self::new(self.n_qubits, probs)
    }

    /// Point mass on `x`.
    pub fn delta(x: BitString) -> Self {
        Self { n_qubits: x.n_qubits(), probs: BTreeMap::from([(x, 1.0)]) }
    }
}

/// On-disk form of a distribution, mirroring the counts file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFile {
    pub n_qubits: usize,
    pub probs: BTreeMap<BitString, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<BitString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl DistributionFile {
    pub fn new(d: &ProbDistribution, secret: Option<BitString>, label: Option<String>) -> Self {
        Self { n_qubits: d.n_qubits, probs: d.probs.clone(), secret, label }
    }

    pub fn distribution(&self) -> Result<ProbDistribution> {
        ProbDistribution::new(self.n_qubits, self.probs.clone())
    }
}

/// Observed outcomes joined by edges at Hamming distance 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGraph {
    nodes: Vec<(BitString, f64)>,
    edges: Vec<(usize, usize)>,
}

impl StateGraph {
    /// Nodes in lexicographic order of their strings.
    pub fn nodes(&self) -> &[(BitString, f64)] {
        &self.nodes
    }

    /// Index pairs `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_strings(&self) -> Vec<(BitString, BitString)> {
        self.edges.iter().map(|&(a, b)| (self.nodes[a].0, self.nodes[b].0)).collect()
    }

    /// Indices of the nodes one bit flip away from node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }
}

/// Builds the state graph of a distribution.
pub fn build_state_graph(d: &ProbDistribution) -> StateGraph {
    let nodes: Vec<(BitString, f64)> = d.iter().map(|(&k, &p)| (k, p)).collect();
    let index: HashMap<BitString, usize> =
        nodes.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();
    let mut edges = Vec::new();
    for (a, (x, _)) in nodes.iter().enumerate() {
        for q in 0..d.n_qubits() {
            if let Some(&b) = index.get(&x.with_flipped(q)) {
                if a < b {
                    edges.push((a, b));
                }
            }
        }
    }
    edges.sort_unstable();
    StateGraph { nodes, edges }
}

/// Free-function form of [`ProbDistribution::rank_of`].
pub fn rank_of(d: &ProbDistribution, target: &BitString) -> usize {
    d.rank_of(target)
}
