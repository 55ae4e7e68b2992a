//! Noise mitigation for quantum measurement distributions by Richardson-Lucy
//! deconvolution over Hamming-distance state graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`hamming`]: packed bitstrings and the Hamming metric.
//! - [`distribution`]: counts files, sparse probability distributions, state graphs and ranks.
//! - [`deconv`]: point-spread functions and the Richardson-Lucy iteration.
//! - [`baselines`]: HAMMER neighborhood scoring and a Poisson-weighted variant.
//! - [`simulator`]: Bernstein-Vazirani outcomes under independent bit-flip noise.
//! - [`evaluation`]: rank-change scoring and report tables.
//! - [`cli`]: the `hammrl` command-line pipeline.
//!
//! ```
//! use hammrl::{richardson_lucy, CountsMap, DeconvolutionConfig, PointSpreadFunction, ProbDistribution};
//!
//! let counts = CountsMap::from_json(
//!     r#"{"n_qubits":3,"shots":1000,"counts":{"111":850,"011":80,"101":50,"110":10,"100":10}}"#,
//! )
//! .unwrap();
//! let observed = ProbDistribution::from_counts(&counts).unwrap();
//! let result = richardson_lucy(&observed, &PointSpreadFunction::Reciprocal, &DeconvolutionConfig::default()).unwrap();
//! assert_eq!(result.mitigated.argmax().to_string(), "111");
//! ```

pub mod baselines;
pub mod cli;
pub mod deconv;
pub mod distribution;
pub mod error;
pub mod evaluation;
pub mod hamming;
pub mod method;
pub mod simulator;

pub use baselines::{hammer_mitigate, hammer_scores, poisson_mitigate, HammerScore, PoissonBaselineConfig};
pub use deconv::{
    psf_weight, richardson_lucy, rl_single_iteration, DeconvolutionConfig, DeconvolutionResult,
    PointSpreadFunction,
};
pub use distribution::{build_state_graph, rank_of, CountsMap, ProbDistribution, StateGraph};
pub use error::{Error, Result};
pub use evaluation::{aggregate, compare_methods, score_circuit, Dataset, DatasetReport, RankCategory, RankChangeRecord};
pub use hamming::{hamming_distance, neighbors_at_distance, BitString, HammingSpace};
pub use method::Method;
pub use simulator::{
    analytic_noisy_distribution, generate_dataset, sample_counts, BvCircuitSpec, DatasetSpec, NoiseModel,
};
