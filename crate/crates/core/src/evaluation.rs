//! Rank-change scoring of mitigation methods against known secrets.
//!
//! Rank 1 is the most likely outcome. A positive rank change means the secret
//! moved up (4th to 2nd is +2).

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{CountsMap, ProbDistribution};
use crate::error::{Error, Result};
use crate::hamming::BitString;
use crate::method::Method;
use crate::simulator::{BvCircuitSpec, DatasetManifest, NoiseModel};

pub const RECORDS_HEADER: [&str; 7] =
    ["method", "dataset", "secret", "rank_before", "rank_after", "rank_change", "category"];
pub const SUMMARY_HEADER: [&str; 6] =
    ["method", "dataset", "pct_improved", "pct_unchanged", "pct_worsened", "mean_rank_change"];
pub const GRAND_MEAN_HEADER: [&str; 3] = ["method", "n_datasets", "grand_mean_rank_change"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankCategory {
    Improved,
    Unchanged,
    Worsened,
}

impl RankCategory {
    pub fn of(rank_change: i64) -> Self {
        match rank_change.signum() {
            1 => RankCategory::Improved,
            0 => RankCategory::Unchanged,
            _ => RankCategory::Worsened,
        }
    }
}

impl fmt::Display for RankCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankCategory::Improved => "improved",
            RankCategory::Unchanged => "unchanged",
            RankCategory::Worsened => "worsened",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankChangeRecord {
    pub secret: BitString,
    pub rank_before: usize,
    pub rank_after: usize,
    pub rank_change: i64,
    pub category: RankCategory,
    /// Total variation distance to the ideal outcome, before and after.
    /// Informational only.
    pub tvd_before: f64,
    pub tvd_after: f64,
}

/// Scores one circuit: where the secret ranks before and after mitigation.
pub fn score_circuit(
    before: &ProbDistribution,
    after: &ProbDistribution,
    secret: &BitString,
) -> Result<RankChangeRecord> {
    if before.n_qubits() != after.n_qubits() || before.n_qubits() != secret.n_qubits() {
        return Err(Error::invalid(format!(
            "register mismatch: before {}, after {}, secret {} qubits",
            before.n_qubits(),
            after.n_qubits(),
            secret.n_qubits()
        )));
    }
    let rank_before = before.rank_of(secret);
    let rank_after = after.rank_of(secret);
    let rank_change = rank_before as i64 - rank_after as i64;
    Ok(RankChangeRecord {
        secret: *secret,
        rank_before,
        rank_after,
        rank_change,
        category: RankCategory::of(rank_change),
        tvd_before: 1.0 - before.get(secret),
        tvd_after: 1.0 - after.get(secret),
    })
}

/// Per-method, per-dataset summary in the layout of a rank-change table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub method: String,
    pub label: String,
    pub dataset: String,
    pub pct_improved: f64,
    pub pct_unchanged: f64,
    pub pct_worsened: f64,
    pub mean_rank_change: f64,
    pub records: Vec<RankChangeRecord>,
}

pub fn aggregate(
    method: &str,
    label: &str,
    dataset: &str,
    records: Vec<RankChangeRecord>,
) -> Result<DatasetReport> {
    if records.is_empty() {
        return Err(Error::invalid(format!("no records for method {method} on dataset {dataset}")));
    }
    let n = records.len() as f64;
    let pct = |cat: RankCategory| 100.0 * records.iter().filter(|r| r.category == cat).count() as f64 / n;
    let mean_rank_change = records.iter().map(|r| r.rank_change as f64).sum::<f64>() / n;
    Ok(DatasetReport {
        method: method.to_string(),
        label: label.to_string(),
        dataset: dataset.to_string(),
        pct_improved: pct(RankCategory::Improved),
        pct_unchanged: pct(RankCategory::Unchanged),
        pct_worsened: pct(RankCategory::Worsened),
        mean_rank_change,
        records,
    })
}

impl DatasetReport {
    /// Summary row as rendered: one decimal for percentages, two for the mean.
    pub fn summary_row(&self) -> [String; 6] {
        [
            self.method.clone(),
            self.dataset.clone(),
            format!("{:.1}", self.pct_improved),
            format!("{:.1}", self.pct_unchanged),
            format!("{:.1}", self.pct_worsened),
            format!("{:.2}", self.mean_rank_change),
        ]
    }
}

/// A set of circuits with known secrets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub circuits: Vec<CountsMap>,
    /// Noise model the circuits were simulated with, when known.
    pub noise: Option<NoiseModel>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, circuits: Vec<CountsMap>, noise: Option<NoiseModel>) -> Result<Self> {
        let name = name.into();
        if circuits.is_empty() {
            return Err(Error::invalid(format!("dataset {name} has no circuits")));
        }
        if let Some(c) = circuits.iter().find(|c| c.secret.is_none()) {
            return Err(Error::invalid(format!(
                "dataset {name}: circuit {} has no `secret` field",
                c.label.as_deref().unwrap_or("<unlabeled>")
            )));
        }
        Ok(Self { name, circuits, noise })
    }

    pub fn from_manifest(path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(path)?;
        let circuits = manifest.load_circuits(path)?;
        Self::new(manifest.dataset_name(), circuits, Some(manifest.noise))
    }
}

/// One row of top-k plot data: a string's probability before and after.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKRow {
    pub method: String,
    pub dataset: String,
    pub secret: BitString,
    pub position: usize,
    pub bitstring: BitString,
    pub prob_before: f64,
    pub prob_after: f64,
}

pub const TOPK_HEADER: [&str; 7] =
    ["method", "dataset", "secret", "position", "bitstring", "prob_before", "prob_after"];

pub fn top_k_rows(
    method: &str,
    dataset: &str,
    secret: &BitString,
    before: &ProbDistribution,
    after: &ProbDistribution,
    k: usize,
) -> Vec<TopKRow> {
    before
        .ranked()
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (x, p))| TopKRow {
            method: method.to_string(),
            dataset: dataset.to_string(),
            secret: *secret,
            position: i + 1,
            bitstring: x,
            prob_before: p,
            prob_after: after.get(&x),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrandMean {
    pub method: String,
    pub n_datasets: usize,
    pub mean_rank_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reports: Vec<DatasetReport>,
    pub grand_means: Vec<GrandMean>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub top_k: Vec<TopKRow>,
}

/// Runs every method on every circuit of every dataset and scores the
/// secret's rank change. `top_k > 0` also collects plot rows.
pub fn compare_methods(datasets: &[Dataset], methods: &[Method], top_k: usize) -> Result<Comparison> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods to compare"));
    }
    let mut reports = Vec::new();
    let mut top_rows = Vec::new();
    for dataset in datasets {
        let befores: Vec<ProbDistribution> = dataset
            .circuits
            .iter()
            .map(ProbDistribution::from_counts)
            .collect::<Result<_>>()?;
        for method in methods {
            let scored: Vec<(RankChangeRecord, Vec<TopKRow>)> = dataset
                .circuits
                .par_iter()
                .zip(befores.par_iter())
                .map(|(counts, before)| {
                    let secret = counts.secret.expect("dataset checks secrets");
                    let spec = BvCircuitSpec::new(secret);
                    let ctx = dataset.noise.as_ref().map(|n| (&spec, n));
                    let after = method.apply_with_noise(before, ctx)?.distribution;
                    let record = score_circuit(before, &after, &secret)?;
                    let rows = top_k_rows(method.name(), &dataset.name, &secret, before, &after, top_k);
                    Ok((record, rows))
                })
                .collect::<Result<_>>()?;
            let (records, rows): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
            top_rows.extend(rows.into_iter().flatten());
            reports.push(aggregate(method.name(), method.label(), &dataset.name, records)?);
        }
    }
    let grand_means = methods
        .iter()
        .map(|m| {
            let means: Vec<f64> =
                reports.iter().filter(|r| r.method == m.name()).map(|r| r.mean_rank_change).collect();
            GrandMean {
                method: m.name().to_string(),
                n_datasets: means.len(),
                mean_rank_change: means.iter().sum::<f64>() / means.len() as f64,
            }
        })
        .collect();
    Ok(Comparison { reports, grand_means, top_k: top_rows })
}

impl Comparison {
    pub fn grand_mean(&self, method: &str) -> Option<f64> {
        self.grand_means.iter().find(|g| g.method == method).map(|g| g.mean_rank_change)
    }

    pub fn report(&self, method: &str, dataset: &str) -> Option<&DatasetReport> {
        self.reports.iter().find(|r| r.method == method && r.dataset == dataset)
    }

    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RECORDS_HEADER)?;
        for r in &self.reports {
            for rec in &r.records {
                w.write_record([
                    r.method.clone(),
                    r.dataset.clone(),
                    rec.secret.to_string(),
                    rec.rank_before.to_string(),
                    rec.rank_after.to_string(),
                    rec.rank_change.to_string(),
                    rec.category.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        for r in &self.reports {
            w.write_record(r.summary_row())?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_grand_means_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(GRAND_MEAN_HEADER)?;
        for g in &self.grand_means {
            w.write_record([g.method.clone(), g.n_datasets.to_string(), format!("{:.3}", g.mean_rank_change)])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Count of circuits per (method, dataset, rank change).
    pub fn write_rank_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "dataset", "rank_change", "count"])?;
        for r in &self.reports {
            let mut hist = std::collections::BTreeMap::<i64, usize>::new();
            for rec in &r.records {
                *hist.entry(rec.rank_change).or_default() += 1;
            }
            for (change, count) in hist {
                w.write_record([r.method.clone(), r.dataset.clone(), change.to_string(), count.to_string()])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_top_k_csv<W: Write>(&self, out: W) -> Result<()> {
        write_top_k_csv(&self.top_k, out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes") + "\n"
    }
}

pub fn write_top_k_csv<W: Write>(rows: &[TopKRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TOPK_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.dataset.clone(),
            r.secret.to_string(),
            r.position.to_string(),
            r.bitstring.to_string(),
            format!("{:e}", r.prob_before),
            format!("{:e}", r.prob_after),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    /// Distribution over 3 qubits where `secret` sits at the given rank.
    fn ranked_at(secret: &str, rank: usize) -> ProbDistribution {
        let others = ["000", "001", "010", "011", "100", "101", "110", "111"]
            .into_iter()
            .filter(|s| *s != secret);
        let mut weights: Vec<(BitString, f64)> =
            others.enumerate().map(|(i, s)| (bs(s), 100.0 - i as f64)).collect();
        let w = if rank == 1 { 200.0 } else { 0.5 * (weights[rank - 2].1 + weights[rank - 1].1) };
        weights.push((bs(secret), w));
        ProbDistribution::from_weights(3, weights).unwrap()
    }

    fn record(before: usize, after: usize) -> RankChangeRecord {
        score_circuit(&ranked_at("111", before), &ranked_at("111", after), &bs("111")).unwrap()
    }

    #[test]
    fn rank_change_table_rows() {
        let r = record(4, 2);
        assert_eq!((r.rank_before, r.rank_after, r.rank_change, r.category), (4, 2, 2, RankCategory::Improved));
        let r = record(4, 4);
        assert_eq!((r.rank_change, r.category), (0, RankCategory::Unchanged));
        let r = record(4, 7);
        assert_eq!((r.rank_change, r.category), (-3, RankCategory::Worsened));
    }

    #[test]
    fn score_rejects_mismatched_registers() {
        let a = ProbDistribution::delta(bs("11"));
        let b = ProbDistribution::delta(bs("111"));
        assert!(score_circuit(&a, &b, &bs("11")).is_err());
    }

    #[test]
    fn aggregate_table_example() {
        let rep = aggregate("m", "M", "d", vec![record(4, 2), record(4, 4), record(4, 7)]).unwrap();
        assert!((rep.mean_rank_change - (-1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(
            rep.summary_row(),
            ["m", "d", "33.3", "33.3", "33.3", "-0.33"].map(String::from)
        );
        let total = rep.pct_improved + rep.pct_unchanged + rep.pct_worsened;
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_all_unchanged_and_empty() {
        let rep = aggregate("identity", "identity", "d", vec![record(2, 2), record(1, 1)]).unwrap();
        assert_eq!(rep.summary_row()[2..], ["0.0", "100.0", "0.0", "0.00"].map(String::from));
        assert!(aggregate("m", "m", "d", vec![]).is_err());
    }

    #[test]
    fn rendering_matches_table_precision() {
        // 30 improved, 4 unchanged, 11 worsened out of 45
        let mut records = Vec::new();
        records.extend((0..30).map(|_| record(4, 2)));
        records.extend((0..4).map(|_| record(4, 4)));
        records.extend((0..11).map(|_| record(4, 7)));
        let rep = aggregate("hammr-l", "HAMMR-L", "n10-k8", records).unwrap();
        assert_eq!(rep.summary_row()[2..5], ["66.7", "8.9", "24.4"].map(String::from));
    }

    fn tiny_dataset() -> Dataset {
        let mk = |secret: &str, counts: &[(&str, u64)]| {
            let map: BTreeMap<_, _> = counts.iter().map(|&(k, c)| (bs(k), c)).collect();
            let total = map.values().sum();
            CountsMap::new(3, total, map).unwrap().with_secret(bs(secret)).unwrap()
        };
        Dataset::new(
            "tiny",
            vec![
                mk("111", &[("111", 850), ("011", 80), ("101", 50), ("110", 10), ("100", 10)]),
                mk("011", &[("011", 40), ("111", 50), ("001", 30), ("010", 30)]),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_and_single_method_comparisons() {
        let ds = tiny_dataset();
        let cmp = compare_methods(std::slice::from_ref(&ds), &[Method::Identity], 0).unwrap();
        assert_eq!(cmp.reports.len(), 1);
        assert_eq!(cmp.reports[0].pct_unchanged, 100.0);
        assert_eq!(cmp.grand_mean("identity"), Some(0.0));

        let one = Dataset::new("one", ds.circuits[..1].to_vec(), None).unwrap();
        let cmp = compare_methods(&[one], &[Method::Hammer], 0).unwrap();
        assert_eq!(cmp.reports[0].records.len(), 1);
    }

    #[test]
    fn category_counts_partition_records() {
        let cmp = compare_methods(&[tiny_dataset()], &[Method::hammr_l_default(), Method::Hammer], 3).unwrap();
        for r in &cmp.reports {
            let n = r.records.len() as f64;
            let counted = (r.pct_improved + r.pct_unchanged + r.pct_worsened) * n / 100.0;
            assert!((counted - n).abs() < 1e-9);
        }
        assert_eq!(cmp.top_k.len(), 2 * (3 + 3));
    }

    #[test]
    fn csv_headers_are_exact() {
        let cmp = compare_methods(&[tiny_dataset()], &[Method::Identity], 0).unwrap();
        let mut buf = Vec::new();
        cmp.write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "method,dataset,pct_improved,pct_unchanged,pct_worsened,mean_rank_change\n\
             identity,tiny,0.0,100.0,0.0,0.00\n"
        );
        let mut buf = Vec::new();
        cmp.write_records_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,dataset,secret,rank_before,rank_after,rank_change,category\n"));
        assert!(text.contains("identity,tiny,011,2,2,0,unchanged"));
    }

    #[test]
    fn missing_secret_is_rejected() {
        let c = CountsMap::new(1, 1, BTreeMap::from([(bs("1"), 1)])).unwrap();
        assert!(Dataset::new("x", vec![c], None).is_err());
    }
}
