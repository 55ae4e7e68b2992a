//! Mitigation methods behind one interface, as selected on the command line.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::baselines::{hammer_mitigate, poisson_mitigate, PoissonBaselineConfig, POISSON_LABEL};
use crate::deconv::{richardson_lucy, DeconvolutionConfig, PointSpreadFunction};
use crate::distribution::ProbDistribution;
use crate::error::{Error, Result};
use crate::simulator::{BvCircuitSpec, NoiseModel};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Richardson-Lucy deconvolution on the state graph.
    HammrL { psf: PointSpreadFunction, config: DeconvolutionConfig },
    Hammer,
    /// Poisson-weighted neighborhood score. Without a lambda, the expected
    /// flip count of the simulating noise model is used.
    Poisson { lambda: Option<f64> },
    /// Returns its input; the reference for rank changes.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutput {
    #[serde(skip)]
    pub distribution: ProbDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations_run: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub l1_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl MethodOutput {
    fn plain(distribution: ProbDistribution) -> Self {
        Self { distribution, iterations_run: None, converged: None, l1_history: Vec::new(), lambda: None }
    }
}

impl Method {
    pub fn hammr_l_default() -> Self {
        Method::HammrL { psf: PointSpreadFunction::Reciprocal, config: DeconvolutionConfig::default() }
    }

    /// Command-line name.
    pub fn name(&self) -> &'static str {
        match self {
            Method::HammrL { .. } => "hammr-l",
            Method::Hammer => "hammer",
            Method::Poisson { .. } => "poisson",
            Method::Identity => "identity",
        }
    }

    /// Human-readable label for reports.
    pub fn label(&self) -> &'static str {
        match self {
            Method::HammrL { .. } => "HAMMR-L",
            Method::Hammer => "HAMMER",
            Method::Poisson { .. } => POISSON_LABEL,
            Method::Identity => "identity",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::HammrL { psf, config } => {
                psf.validate()?;
                config.validate(crate::hamming::MAX_QUBITS)
            }
            Method::Poisson { lambda: Some(l) } => PoissonBaselineConfig::new(*l).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, d: &ProbDistribution) -> Result<MethodOutput> {
        self.apply_with_noise(d, None)
    }

    /// Applies the method; `circuit` supplies the default Poisson lambda.
    pub fn apply_with_noise(
        &self,
        d: &ProbDistribution,
        circuit: Option<(&BvCircuitSpec, &NoiseModel)>,
    ) -> Result<MethodOutput> {
        match self {
            Method::HammrL { psf, config } => {
                let r = richardson_lucy(d, psf, config)?;
                Ok(MethodOutput {
                    distribution: r.mitigated,
                    iterations_run: Some(r.iterations_run),
                    converged: Some(r.converged),
                    l1_history: r.l1_history,
                    lambda: None,
                })
            }
            Method::Hammer => Ok(MethodOutput::plain(hammer_mitigate(d)?)),
            Method::Poisson { lambda } => {
                let lambda = match (lambda, circuit) {
                    (Some(l), _) => *l,
                    (None, Some((spec, noise))) => noise.expected_flips(spec),
                    (None, None) => {
                        return Err(Error::invalid("poisson method needs --lambda for this input"))
                    }
                };
                let cfg = PoissonBaselineConfig::new(lambda)?;
                let mut out = MethodOutput::plain(poisson_mitigate(d, &cfg)?);
                out.lambda = Some(lambda);
                Ok(out)
            }
            Method::Identity => Ok(MethodOutput::plain(d.clone())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a bare method name with default parameters.
impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hammr-l" | "hammrl" => Ok(Method::hammr_l_default()),
            "hammer" => Ok(Method::Hammer),
            "poisson" | "qbeep" => Ok(Method::Poisson { lambda: None }),
            "identity" | "none" => Ok(Method::Identity),
            other => Err(Error::invalid(format!(
                "unknown method {other:?}; expected hammr-l, hammer, poisson or identity"
            ))),
        }
    }
}
