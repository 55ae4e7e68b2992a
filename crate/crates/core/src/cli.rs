//! Batch command-line front end: `generate`, `mitigate`, `evaluate`, `compare`.
//!
//! Flags override values from `--config <json>`, which override built-in
//! defaults. Exit codes: 0 success, 1 runtime or IO failure, 2 usage or
//! validation error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::deconv::{DeconvolutionConfig, PointSpreadFunction};
use crate::distribution::{CountsDiagnostics, CountsMap, DistributionFile, ProbDistribution};
use crate::error::{Error, Result};
use crate::evaluation::{compare_methods, top_k_rows, write_top_k_csv, Comparison, Dataset};
use crate::method::{Method, MethodOutput};
use crate::simulator::{write_dataset, DatasetSpec, FlipAsymmetry, NoiseModel, DEFAULT_SHOTS};

const DEFAULT_METHODS: &str = "hammr-l,hammer,poisson,identity";
const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "hammrl", version, about = "Hamming-space Richardson-Lucy mitigation of measurement distributions")]
struct Cli {
    /// JSON file with default parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for dataset generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (mitigate) or directory (generate, evaluate, compare).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a Bernstein-Vazirani permutation dataset.
    Generate(GenerateArgs),
    /// Mitigate one counts file.
    Mitigate(MitigateArgs),
    /// Score methods on one dataset.
    Evaluate(EvaluateArgs),
    /// Score methods on several datasets and report grand means.
    Compare(EvaluateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    ones: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    base_flip: Option<f64>,
    #[arg(long)]
    per_cnot: Option<f64>,
    #[arg(long, requires = "p10")]
    p01: Option<f64>,
    #[arg(long, requires = "p01")]
    p10: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct MethodArgs {
    /// reciprocal | poisson:<lambda> | binomial:<n>:<p> | table:<w0>,<w1>,...
    #[arg(long)]
    psf: Option<String>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    distance_cutoff: Option<usize>,
    #[arg(long)]
    include_self: Option<bool>,
    /// Poisson baseline rate.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct MitigateArgs {
    #[arg(long)]
    input: PathBuf,
    /// hammr-l | hammer | poisson | identity
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    params: MethodArgs,
    /// Also write top-k plot data next to the output.
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, required = true)]
    manifest: Vec<PathBuf>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    #[command(flatten)]
    params: MethodArgs,
    /// Also write rank-histogram and top-k CSVs.
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    top_k: Option<usize>,
}

/// Keys accepted in a `--config` file. All optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    out: Option<PathBuf>,
    qubits: Option<usize>,
    ones: Option<usize>,
    shots: Option<u64>,
    base_flip_prob: Option<f64>,
    per_cnot_flip_prob: Option<f64>,
    asymmetry: Option<FlipAsymmetry>,
    method: Option<String>,
    methods: Option<Vec<String>>,
    psf: Option<PointSpreadFunction>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
    distance_cutoff: Option<usize>,
    include_self: Option<bool>,
    lambda: Option<f64>,
    plot: Option<bool>,
    top_k: Option<usize>,
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineConfig {
    Generate { spec: DatasetSpec, out: PathBuf },
    Mitigate { input: PathBuf, method: Method, out: Option<PathBuf>, plot: bool, top_k: usize },
    Evaluate { manifest: PathBuf, methods: Vec<Method>, out: PathBuf, plot: bool, top_k: usize },
    Compare { manifests: Vec<PathBuf>, methods: Vec<Method>, out: PathBuf, plot: bool, top_k: usize },
}

fn read_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { context: path.display().to_string(), source })
}

fn resolve_methods(names: &[String], params: &MethodArgs, cfg: &ConfigFile) -> Result<Vec<Method>> {
    let psf = match &params.psf {
        Some(text) => text.parse()?,
        None => cfg.psf.clone().unwrap_or_default(),
    };
    let defaults = DeconvolutionConfig::default();
    let config = DeconvolutionConfig {
        max_iterations: params.max_iterations.or(cfg.max_iterations).unwrap_or(defaults.max_iterations),
        convergence_tol: params.tolerance.or(cfg.tolerance).unwrap_or(defaults.convergence_tol),
        distance_cutoff: params.distance_cutoff.or(cfg.distance_cutoff),
        include_self: params.include_self.or(cfg.include_self).unwrap_or(defaults.include_self),
    };
    let lambda = params.lambda.or(cfg.lambda);
    let mut methods = Vec::new();
    for name in names {
        let method = match name.parse::<Method>()? {
            Method::HammrL { .. } => Method::HammrL { psf: psf.clone(), config: config.clone() },
            Method::Poisson { .. } => Method::Poisson { lambda },
            other => other,
        };
        method.validate()?;
        if methods.iter().any(|m: &Method| m.name() == method.name()) {
            return Err(Error::invalid(format!("method {} listed twice", method.name())));
        }
        methods.push(method);
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    Ok(methods)
}

fn split_names(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl PipelineConfig {
    /// Parses command-line arguments (including the program name).
    pub fn from_args<I, T>(args: I) -> std::result::Result<Self, CliFailure>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args).map_err(CliFailure::Clap)?;
        Self::resolve(cli).map_err(CliFailure::Run)
    }

    fn resolve(cli: Cli) -> Result<Self> {
        let cfg = read_config(cli.config.as_deref())?;
        let out = cli.out.or_else(|| cfg.out.clone());
        Ok(match cli.command {
            Command::Generate(a) => {
                let n_qubits = a.qubits.or(cfg.qubits).ok_or_else(|| Error::invalid("--qubits is required"))?;
                let ones_count = a.ones.or(cfg.ones).ok_or_else(|| Error::invalid("--ones is required"))?;
                let asymmetry = match (a.p01, a.p10) {
                    (Some(p01), Some(p10)) => Some(FlipAsymmetry { p01, p10 }),
                    _ => cfg.asymmetry,
                };
                let spec = DatasetSpec {
                    n_qubits,
                    ones_count,
                    shots: a.shots.or(cfg.shots).unwrap_or(DEFAULT_SHOTS),
                    noise: NoiseModel {
                        base_flip_prob: a.base_flip.or(cfg.base_flip_prob).unwrap_or(0.0),
                        per_cnot_flip_prob: a.per_cnot.or(cfg.per_cnot_flip_prob).unwrap_or(0.0),
                        asymmetry,
                        seed: cli.seed.or(cfg.seed).unwrap_or(0),
                    },
                };
                spec.validate()?;
                PipelineConfig::Generate { spec, out: out.unwrap_or_else(|| PathBuf::from("dataset")) }
            }
            Command::Mitigate(a) => {
                let name = a.method.or_else(|| cfg.method.clone()).unwrap_or_else(|| "hammr-l".into());
                let method = resolve_methods(&[name], &a.params, &cfg)?.remove(0);
                let plot = a.plot || cfg.plot.unwrap_or(false);
                if plot && out.is_none() {
                    return Err(Error::invalid("--plot needs --out"));
                }
                PipelineConfig::Mitigate {
                    input: a.input,
                    method,
                    out,
                    plot,
                    top_k: a.top_k.or(cfg.top_k).unwrap_or(DEFAULT_TOP_K),
                }
            }
            Command::Evaluate(a) => {
                let (methods, plot, top_k) = resolve_eval(&a, &cfg)?;
                if a.manifest.len() != 1 {
                    return Err(Error::invalid("evaluate takes one --manifest; use compare for several"));
                }
                PipelineConfig::Evaluate {
                    manifest: a.manifest[0].clone(),
                    methods,
                    out: out.unwrap_or_else(|| PathBuf::from("report")),
                    plot,
                    top_k,
                }
            }
            Command::Compare(a) => {
                let (methods, plot, top_k) = resolve_eval(&a, &cfg)?;
                PipelineConfig::Compare {
                    manifests: a.manifest,
                    methods,
                    out: out.unwrap_or_else(|| PathBuf::from("report")),
                    plot,
                    top_k,
                }
            }
        })
    }

    /// Renders an invocation that parses back to this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut v = vec!["hammrl".to_string()];
        let mut push = |k: &str, val: String| {
            v.push(format!("--{k}"));
            v.push(val);
        };
        match self {
            PipelineConfig::Generate { spec, out } => {
                push("qubits", spec.n_qubits.to_string());
                push("ones", spec.ones_count.to_string());
                push("shots", spec.shots.to_string());
                push("base-flip", spec.noise.base_flip_prob.to_string());
                push("per-cnot", spec.noise.per_cnot_flip_prob.to_string());
                if let Some(a) = spec.noise.asymmetry {
                    push("p01", a.p01.to_string());
                    push("p10", a.p10.to_string());
                }
                push("seed", spec.noise.seed.to_string());
                push("out", out.display().to_string());
                v.insert(1, "generate".into());
            }
            PipelineConfig::Mitigate { input, method, out, plot, top_k } => {
                push("input", input.display().to_string());
                push("method", method.name().to_string());
                method_args(std::slice::from_ref(method), &mut push);
                if let Some(out) = out {
                    push("out", out.display().to_string());
                }
                push("top-k", top_k.to_string());
                if *plot {
                    v.push("--plot".into());
                }
                v.insert(1, "mitigate".into());
            }
            PipelineConfig::Evaluate { manifest, methods, out, plot, top_k } => {
                eval_args(std::slice::from_ref(manifest), methods, out, *top_k, &mut push);
                if *plot {
                    v.push("--plot".into());
                }
                v.insert(1, "evaluate".into());
            }
            PipelineConfig::Compare { manifests, methods, out, plot, top_k } => {
                eval_args(manifests, methods, out, *top_k, &mut push);
                if *plot {
                    v.push("--plot".into());
                }
                v.insert(1, "compare".into());
            }
        }
        v
    }
}

fn method_args(methods: &[Method], push: &mut impl FnMut(&str, String)) {
    for m in methods {
        match m {
            Method::HammrL { psf, config } => {
                push("psf", psf.to_string());
                push("max-iterations", config.max_iterations.to_string());
                push("tolerance", config.convergence_tol.to_string());
                if let Some(c) = config.distance_cutoff {
                    push("distance-cutoff", c.to_string());
                }
                push("include-self", config.include_self.to_string());
            }
            Method::Poisson { lambda: Some(l) } => push("lambda", l.to_string()),
            _ => {}
        }
    }
}

fn eval_args(
    manifests: &[PathBuf],
    methods: &[Method],
    out: &Path,
    top_k: usize,
    push: &mut impl FnMut(&str, String),
) {
    for m in manifests {
        push("manifest", m.display().to_string());
    }
    let names: Vec<&str> = methods.iter().map(Method::name).collect();
    push("methods", names.join(","));
    method_args(methods, push);
    push("out", out.display().to_string());
    push("top-k", top_k.to_string());
}

fn resolve_eval(a: &EvaluateArgs, cfg: &ConfigFile) -> Result<(Vec<Method>, bool, usize)> {
    let names = match (&a.methods, &cfg.methods) {
        (Some(text), _) => split_names(text),
        (None, Some(list)) => list.clone(),
        (None, None) => split_names(DEFAULT_METHODS),
    };
    let methods = resolve_methods(&names, &a.params, cfg)?;
    Ok((methods, a.plot || cfg.plot.unwrap_or(false), a.top_k.or(cfg.top_k).unwrap_or(DEFAULT_TOP_K)))
}

/// Why a command-line run stopped.
#[derive(Debug)]
pub enum CliFailure {
    Clap(clap::Error),
    Run(Error),
}

impl CliFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliFailure::Clap(e) => e.exit_code(),
            CliFailure::Run(e) => e.exit_code(),
        }
    }
}

/// JSON written by `mitigate`.
#[derive(Debug, Serialize)]
pub struct MitigateOutput {
    pub method: String,
    pub label: String,
    pub mitigated: DistributionFile,
    #[serde(flatten)]
    pub details: MethodOutput,
    pub diagnostics: CountsDiagnostics,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Mitigates one counts file; returns the output JSON.
pub fn mitigate_counts(counts: &CountsMap, method: &Method) -> Result<MitigateOutput> {
    let (d, diagnostics) = ProbDistribution::from_counts_with_diagnostics(counts)?;
    let details = method.apply(&d)?;
    Ok(MitigateOutput {
        method: method.name().to_string(),
        label: method.label().to_string(),
        mitigated: DistributionFile::new(&details.distribution, counts.secret, counts.label.clone()),
        details,
        diagnostics,
    })
}

fn write_reports(cmp: &Comparison, out: &Path, plot: bool, grand: bool) -> Result<()> {
    let files: Vec<(&str, Vec<u8>)> = {
        let mut f = vec![
            ("records.csv", csv_bytes(|b| cmp.write_records_csv(b))?),
            ("summary.csv", csv_bytes(|b| cmp.write_summary_csv(b))?),
            ("report.json", cmp.to_json().into_bytes()),
        ];
        if grand {
            f.push(("grand_means.csv", csv_bytes(|b| cmp.write_grand_means_csv(b))?));
        }
        if plot {
            f.push(("rank_histogram.csv", csv_bytes(|b| cmp.write_rank_histogram_csv(b))?));
            f.push(("topk.csv", csv_bytes(|b| cmp.write_top_k_csv(b))?));
        }
        f
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (name, bytes) in files {
        write_file(&out.join(name), &bytes)?;
    }
    Ok(())
}

/// Runs a resolved command. Inputs are fully loaded and validated before
/// anything is written.
pub fn execute(cfg: &PipelineConfig) -> Result<()> {
    match cfg {
        PipelineConfig::Generate { spec, out } => {
            spec.validate()?;
            let manifest = write_dataset(spec, out)?;
            eprintln!("wrote {} circuits to {}", manifest.circuits.len(), out.display());
        }
        PipelineConfig::Mitigate { input, method, out, plot, top_k } => {
            let counts = CountsMap::read(input)?;
            let result = mitigate_counts(&counts, method)?;
            let text = serde_json::to_string_pretty(&result).expect("output serializes") + "\n";
            match out {
                Some(path) => {
                    let topk = if *plot {
                        let before = ProbDistribution::from_counts(&counts)?;
                        let after = result.details.distribution.clone();
                        let secret = counts.secret.unwrap_or_else(|| before.argmax());
                        let rows = top_k_rows(method.name(), "", &secret, &before, &after, *top_k);
                        Some(csv_bytes(|b| write_top_k_csv(&rows, b))?)
                    } else {
                        None
                    };
                    write_file(path, text.as_bytes())?;
                    if let Some(bytes) = topk {
                        write_file(&sibling(path, ".topk.csv"), &bytes)?;
                    }
                }
                None => print!("{text}"),
            }
        }
        PipelineConfig::Evaluate { manifest, methods, out, plot, top_k } => {
            let ds = Dataset::from_manifest(manifest)?;
            let k = if *plot { *top_k } else { 0 };
            let cmp = compare_methods(&[ds], methods, k)?;
            write_reports(&cmp, out, *plot, false)?;
        }
        PipelineConfig::Compare { manifests, methods, out, plot, top_k } => {
            let datasets: Vec<Dataset> = manifests.iter().map(|m| Dataset::from_manifest(m)).collect::<Result<_>>()?;
            let k = if *plot { *top_k } else { 0 };
            let cmp = compare_methods(&datasets, methods, k)?;
            write_reports(&cmp, out, *plot, true)?;
        }
    }
    Ok(())
}

/// Parses and runs; returns the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = PipelineConfig::from_args(args).and_then(|cfg| execute(&cfg).map_err(CliFailure::Run));
    match outcome {
        Ok(()) => 0,
        Err(CliFailure::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(CliFailure::Run(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
