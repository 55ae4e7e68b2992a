//! Richardson-Lucy deconvolution on the Hamming state graph.
//!
//! The observed distribution `d` is modelled as a true distribution `u`
//! blurred by a kernel that depends only on Hamming distance,
//! `d_i = sum_j p(h(i, j)) u_j`. Starting from `u = d`, each step computes
//!
//! ```text
//! c_i  = sum_j p_ij u_j
//! u_j <- u_j * sum_i (d_i / c_i) p_ij
//! ```
//!
//! over the observed outcomes only, and the final iterate is rescaled to unit
//! mass. The kernel is used as given; it is not normalized.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete, Poisson};

use crate::distribution::ProbDistribution;
use crate::error::{Error, Result};
use crate::hamming::BitString;

/// Above this many observed outcomes the kernel is evaluated on the fly
/// instead of being cached as a dense matrix.
const DENSE_KERNEL_LIMIT: usize = 2048;

/// Rows per rayon task.
const MIN_ROWS_PER_TASK: usize = 32;

/// Kernel weight as a function of Hamming distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PsfObject", try_from = "PsfRepr")]
pub enum PointSpreadFunction {
    /// `1 / (h + 1)`.
    Reciprocal,
    /// Poisson pmf at `h`.
    Poisson { lambda: f64 },
    /// Binomial pmf at `h` with `n` trials of success probability `p`.
    Binomial { n: u64, p: f64 },
    /// Explicit weights indexed by distance.
    Table { weights: Vec<f64> },
}

impl Default for PointSpreadFunction {
    fn default() -> Self {
        PointSpreadFunction::Reciprocal
    }
}

impl PointSpreadFunction {
    /// Checks the parameters and that the self-weight is positive.
    pub fn validate(&self) -> Result<()> {
        match self {
            PointSpreadFunction::Reciprocal => Ok(()),
            PointSpreadFunction::Poisson { lambda } => {
                if lambda.is_finite() && *lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("poisson psf needs lambda > 0, got {lambda}")))
                }
            }
            PointSpreadFunction::Binomial { n, p } => {
                if *n == 0 {
                    Err(Error::invalid("binomial psf needs n >= 1"))
                } else if !(0.0..1.0).contains(p) {
                    // p = 1 puts zero weight on distance 0
                    Err(Error::invalid(format!("binomial psf needs 0 <= p < 1, got {p}")))
                } else {
                    Ok(())
                }
            }
            PointSpreadFunction::Table { weights } => {
                if weights.is_empty() {
                    return Err(Error::invalid("table psf has no weights"));
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                    return Err(Error::invalid(format!("table psf weight {w} is not >= 0")));
                }
                if weights[0] <= 0.0 {
                    return Err(Error::invalid("table psf weight at distance 0 must be positive"));
                }
                Ok(())
            }
        }
    }

    fn raw_weight(&self, distance: usize) -> Result<f64> {
        Ok(match self {
            PointSpreadFunction::Reciprocal => 1.0 / (distance as f64 + 1.0),
            PointSpreadFunction::Poisson { lambda } => Poisson::new(*lambda)
                .map_err(|e| Error::invalid(format!("poisson psf: {e}")))?
                .pmf(distance as u64),
            PointSpreadFunction::Binomial { n, p } => Binomial::new(*p, *n)
                .map_err(|e| Error::invalid(format!("binomial psf: {e}")))?
                .pmf(distance as u64),
            PointSpreadFunction::Table { weights } => *weights.get(distance).ok_or_else(|| {
                Error::invalid(format!(
                    "table psf has {} weights, no entry for distance {distance}",
                    weights.len()
                ))
            })?,
        })
    }

    /// Weights for every distance `0..=n_qubits`.
    pub fn weights(&self, n_qubits: usize) -> Result<Vec<f64>> {
        self.validate()?;
        (0..=n_qubits).map(|h| self.raw_weight(h)).collect()
    }
}

/// The kernel evaluated at a Hamming distance within an `n_qubits` register.
pub fn psf_weight(psf: &PointSpreadFunction, distance: usize, n_qubits: usize) -> Result<f64> {
    if distance > n_qubits {
        return Err(Error::invalid(format!(
            "distance {distance} exceeds register width {n_qubits}"
        )));
    }
    psf.validate()?;
    psf.raw_weight(distance)
}

impl fmt::Display for PointSpreadFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointSpreadFunction::Reciprocal => f.write_str("reciprocal"),
            PointSpreadFunction::Poisson { lambda } => write!(f, "poisson:{lambda}"),
            PointSpreadFunction::Binomial { n, p } => write!(f, "binomial:{n}:{p}"),
            PointSpreadFunction::Table { weights } => {
                f.write_str("table:")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `reciprocal`, `poisson:<lambda>`, `binomial:<n>:<p>` or
/// `table:<w0>,<w1>,...`.
impl FromStr for PointSpreadFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::invalid(format!("psf {s:?}: {what}"));
        let mut parts = s.trim().splitn(2, ':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let rest = parts.next();
        let psf = match (kind.as_str(), rest) {
            ("reciprocal", None) => PointSpreadFunction::Reciprocal,
            ("poisson", Some(l)) => PointSpreadFunction::Poisson {
                lambda: l.parse().map_err(|_| bad("lambda is not a number"))?,
            },
            ("binomial", Some(args)) => {
                let (n, p) = args.split_once(':').ok_or_else(|| bad("expected binomial:<n>:<p>"))?;
                PointSpreadFunction::Binomial {
                    n: n.parse().map_err(|_| bad("n is not an integer"))?,
                    p: p.parse().map_err(|_| bad("p is not a number"))?,
                }
            }
            ("table", Some(ws)) => PointSpreadFunction::Table {
                weights: ws
                    .split(',')
                    .map(|w| w.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("weights must be numbers"))?,
            },
            _ => return Err(bad("unknown kind")),
        };
        psf.validate()?;
        Ok(psf)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum PsfObject {
    Reciprocal,
    Poisson { lambda: f64 },
    Binomial { n: u64, p: f64 },
    Table { weights: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PsfRepr {
    Name(String),
    Object(PsfObject),
}

impl From<PointSpreadFunction> for PsfObject {
    fn from(p: PointSpreadFunction) -> Self {
        match p {
            PointSpreadFunction::Reciprocal => PsfObject::Reciprocal,
            PointSpreadFunction::Poisson { lambda } => PsfObject::Poisson { lambda },
            PointSpreadFunction::Binomial { n, p } => PsfObject::Binomial { n, p },
            PointSpreadFunction::Table { weights } => PsfObject::Table { weights },
        }
    }
}

impl TryFrom<PsfRepr> for PointSpreadFunction {
    type Error = Error;

    fn try_from(r: PsfRepr) -> Result<Self> {
        let psf = match r {
            PsfRepr::Name(s) => return s.parse(),
            PsfRepr::Object(PsfObject::Reciprocal) => PointSpreadFunction::Reciprocal,
            PsfRepr::Object(PsfObject::Poisson { lambda }) => PointSpreadFunction::Poisson { lambda },
            PsfRepr::Object(PsfObject::Binomial { n, p }) => PointSpreadFunction::Binomial { n, p },
            PsfRepr::Object(PsfObject::Table { weights }) => PointSpreadFunction::Table { weights },
        };
        psf.validate()?;
        Ok(psf)
    }
}

/// Iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvolutionConfig {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Stop once the L1 change between successive un-normalized iterates
    /// drops below this.
    #[serde(rename = "tolerance", default = "default_tolerance")]
    pub convergence_tol: f64,
    /// Pairs further apart than this do not interact.
    #[serde(default)]
    pub distance_cutoff: Option<usize>,
    /// Whether each node's own term (distance 0) enters the sums.
    #[serde(default = "default_include_self")]
    pub include_self: bool,
}

fn default_max_iterations() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_include_self() -> bool {
    true
}

impl Default for DeconvolutionConfig {
    fn default() -> Self {
        Self {
            max_iterations: default_max_iterations(),
            convergence_tol: default_tolerance(),
            distance_cutoff: None,
            include_self: default_include_self(),
        }
    }
}

impl DeconvolutionConfig {
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        if let Some(cut) = self.distance_cutoff {
            if cut == 0 || cut > n_qubits {
                return Err(Error::invalid(format!(
                    "distance_cutoff must be in 1..={n_qubits}, got {cut}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconvolutionResult {
    pub mitigated: ProbDistribution,
    pub iterations_run: usize,
    pub converged: bool,
    /// L1 change of each iteration, before normalization.
    pub l1_history: Vec<f64>,
}

/// Distance-indexed weights over the observed nodes of one distribution.
struct Kernel {
    keys: Vec<BitString>,
    by_distance: Vec<f64>,
    dense: Option<Vec<f64>>,
}

impl Kernel {
    fn new(
        keys: Vec<BitString>,
        n_qubits: usize,
        psf: &PointSpreadFunction,
        cfg: &DeconvolutionConfig,
    ) -> Result<Self> {
        cfg.validate(n_qubits)?;
        let mut by_distance = psf.weights(n_qubits)?;
        if let Some(cut) = cfg.distance_cutoff {
            by_distance.iter_mut().skip(cut + 1).for_each(|w| *w = 0.0);
        }
        if !cfg.include_self {
            // distinct observed strings are never at distance 0
            by_distance[0] = 0.0;
        }
        let m = keys.len();
        let dense = (m <= DENSE_KERNEL_LIMIT).then(|| {
            let mut mat = vec![0.0; m * m];
            mat.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = by_distance[keys[i].distance_unchecked(&keys[j]) as usize];
                }
            });
            mat
        });
        Ok(Self { keys, by_distance, dense })
    }

    /// `out_i = sum_j p_ij v_j`, each row summed in index order.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let m = self.keys.len();
        match &self.dense {
            Some(mat) => out
                .par_iter_mut()
                .with_min_len(MIN_ROWS_PER_TASK)
                .zip(mat.par_chunks(m))
                .for_each(|(o, row)| *o = row.iter().zip(v).map(|(p, x)| p * x).sum()),
            None => out
                .par_iter_mut()
                .with_min_len(MIN_ROWS_PER_TASK)
                .enumerate()
                .for_each(|(i, o)| {
                    let ki = self.keys[i];
                    *o = self
                        .keys
                        .iter()
                        .zip(v)
                        .map(|(kj, x)| self.by_distance[ki.distance_unchecked(kj) as usize] * x)
                        .sum()
                }),
        }
    }

    /// One multiplicative update; returns the new iterate.
    fn step(&self, u: &[f64], d: &[f64], iteration: usize) -> Result<Vec<f64>> {
        let m = u.len();
        let mut c = vec![0.0; m];
        self.apply(u, &mut c);
        if let Some(i) = c.iter().position(|&ci| !(ci > 0.0)) {
            return Err(Error::Degenerate { node: self.keys[i], iteration });
        }
        let ratio: Vec<f64> = d.iter().zip(&c).map(|(di, ci)| di / ci).collect();
        let mut back = vec![0.0; m];
        self.apply(&ratio, &mut back);
        Ok(u.iter().zip(&back).map(|(uj, bj)| uj * bj).collect())
    }
}

fn observed(d: &ProbDistribution) -> (Vec<BitString>, Vec<f64>) {
    d.iter().map(|(&k, &p)| (k, p)).unzip()
}

/// Applies one Richardson-Lucy update to `u`, indexed like `d`'s outcomes in
/// lexicographic order. The result is not normalized.
pub fn rl_single_iteration(
    u: &[f64],
    d: &ProbDistribution,
    psf: &PointSpreadFunction,
    cfg: &DeconvolutionConfig,
) -> Result<Vec<f64>> {
    if u.len() != d.len() {
        return Err(Error::invalid(format!(
            "estimate has {} entries but the distribution has {} outcomes",
            u.len(),
            d.len()
        )));
    }
    if let Some(x) = u.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::invalid(format!("estimate entry {x} is not a nonnegative number")));
    }
    let (keys, dv) = observed(d);
    let kernel = Kernel::new(keys, d.n_qubits(), psf, cfg)?;
    kernel.step(u, &dv, 1)
}

/// Runs Richardson-Lucy deconvolution from `u = d` until the L1 change falls
/// under the tolerance or the iteration budget is spent.
pub fn richardson_lucy(
    d: &ProbDistribution,
    psf: &PointSpreadFunction,
    cfg: &DeconvolutionConfig,
) -> Result<DeconvolutionResult> {
    let (keys, dv) = observed(d);
    let kernel = Kernel::new(keys.clone(), d.n_qubits(), psf, cfg)?;
    let mut u = dv.clone();
    let mut l1_history = Vec::with_capacity(cfg.max_iterations);
    let mut converged = false;
    for iteration in 1..=cfg.max_iterations {
        let next = kernel.step(&u, &dv, iteration)?;
        let l1: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
        u = next;
        l1_history.push(l1);
        if l1 < cfg.convergence_tol {
            converged = true;
            break;
        }
    }
    let mitigated = ProbDistribution::from_weights(d.n_qubits(), keys.into_iter().zip(u))?;
    Ok(DeconvolutionResult { mitigated, iterations_run: l1_history.len(), converged, l1_history })
}
