mod support;

use std::path::Path;
use std::process::{Command, Output};

use hammrl::{BitString, ProbDistribution};
use serde_json::Value;
use support::bs;

const FIVE_NODE: &str = r#"{"n_qubits":3,"shots":1000,"counts":{"100":10,"110":10,"101":50,"111":850,"011":80}}"#;

fn hammrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hammrl")).args(args).output().expect("binary runs")
}

fn path(dir: &Path, rel: &str) -> String {
    dir.join(rel).display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn mitigated_probs(v: &Value) -> Vec<(BitString, f64)> {
    v["mitigated"]["probs"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, p)| (bs(k), p.as_f64().unwrap()))
        .collect()
}

fn generate(dir: &Path, qubits: &str, ones: &str, seed: &str) -> Output {
    hammrl(&[
        "generate", "--qubits", qubits, "--ones", ones, "--shots", "2048", "--base-flip", "0.02", "--per-cnot", "0.05",
        "--seed", seed, "--out", &path(dir, "data"),
    ])
}

#[test]
fn generate_writes_one_file_per_secret() {
    let dir = tempfile::tempdir().unwrap();
    for (ones, expected) in [("6", 84), ("2", 36)] {
        let out = hammrl(&[
            "generate", "--qubits", "9", "--ones", ones, "--shots", "512", "--seed", "3", "--out",
            &path(dir.path(), ones),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let files = std::fs::read_dir(dir.path().join(ones)).unwrap().count();
        assert_eq!(files, expected + 1, "circuits plus manifest");
    }
    let out = hammrl(&["generate", "--qubits", "10", "--ones", "7", "--shots", "64", "--out", &path(dir.path(), "t")]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_dir(dir.path().join("t")).unwrap().count(), 121);
}

#[test]
fn generate_is_reproducible_per_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(generate(a.path(), "6", "3", "5").status.success());
    assert!(generate(b.path(), "6", "3", "5").status.success());
    for name in ["manifest.json", "000111.json", "111000.json"] {
        let x = std::fs::read(a.path().join("data").join(name)).unwrap();
        let y = std::fs::read(b.path().join("data").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    assert!(generate(c.path(), "6", "3", "6").status.success());
    assert_ne!(
        std::fs::read(a.path().join("data/000111.json")).unwrap(),
        std::fs::read(c.path().join("data/000111.json")).unwrap()
    );
}

#[test]
fn mitigate_sharpens_the_example_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "five_node.json", FIVE_NODE);
    let out = hammrl(&["mitigate", "--input", &input, "--method", "hammr-l"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["method"], "hammr-l");
    let probs = mitigated_probs(&v);
    let top = probs.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(top.0, bs("111"));
    assert!(top.1 > 0.85);
    assert!((probs.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn mitigate_leaves_a_delta_alone() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "delta.json", r#"{"n_qubits":4,"shots":100,"counts":{"1010":100}}"#);
    for method in ["hammr-l", "hammer", "identity"] {
        let out = hammrl(&["mitigate", "--input", &input, "--method", method]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(mitigated_probs(&v), vec![(bs("1010"), 1.0)], "{method}");
    }
}

#[test]
fn poisson_output_matches_hand_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "five_node.json", FIVE_NODE);
    let out = hammrl(&["mitigate", "--input", &input, "--method", "poisson", "--lambda", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["label"], "QBEEP-style (simplified)");

    // score = sum over distance shells i = 1 of pmf(i; 0.5) * sum of filtered neighbor probabilities
    let d: Vec<(&str, f64)> = vec![("100", 0.01), ("110", 0.01), ("101", 0.05), ("111", 0.85), ("011", 0.08)];
    let w1 = 0.5 * (-0.5f64).exp();
    let dist = |a: &str, b: &str| a.chars().zip(b.chars()).filter(|(x, y)| x != y).count();
    let liks: Vec<(BitString, f64)> = d
        .iter()
        .map(|&(x, px)| {
            let s: f64 = d.iter().filter(|&&(y, py)| dist(x, y) == 1 && py < px).map(|&(_, py)| w1 * py).sum();
            (bs(x), s * px)
        })
        .collect();
    let expected = ProbDistribution::from_weights(3, liks).unwrap();
    for (k, p) in mitigated_probs(&v) {
        assert!((p - expected.get(&k)).abs() < 1e-12, "{k}");
    }
    assert_eq!(mitigated_probs(&v).len(), expected.len());
}

#[test]
fn malformed_input_exits_2_and_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("badkey.json", r#"{"n_qubits":3,"shots":10,"counts":{"1x1":10}}"#, "1x1"),
        ("unknown.json", r#"{"n_qubits":3,"shots":10,"counts":{"101":10},"colour":1}"#, "colour"),
        ("width.json", r#"{"n_qubits":3,"shots":10,"counts":{"1011":10}}"#, "1011"),
        ("missing.json", r#"{"n_qubits":3,"counts":{"101":10}}"#, "shots"),
    ];
    for (name, text, needle) in cases {
        let input = write(dir.path(), name, text);
        let out = hammrl(&["mitigate", "--input", &input]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{name}: {err}");
    }
}

#[test]
fn evaluate_requires_secrets() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.json", FIVE_NODE);
    let manifest = write(
        dir.path(),
        "manifest.json",
        r#"{"n_qubits":3,"ones_count":3,"shots":1000,"noise":{"base_flip_prob":0.0,"per_cnot_flip_prob":0.01,"seed":0},"master_seed":0,"circuits":["a.json"]}"#,
    );
    let out = hammrl(&["evaluate", "--manifest", &manifest, "--out", &path(dir.path(), "r")]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_writes_exact_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = hammrl(&[
        "generate", "--qubits", "9", "--ones", "6", "--shots", "10240", "--base-flip", "0.02", "--per-cnot", "0.072",
        "--seed", "7", "--out", &path(dir.path(), "data"),
    ]);
    assert!(out.status.success());
    let report = path(dir.path(), "report");
    let out = hammrl(&[
        "evaluate", "--manifest", &path(dir.path(), "data/manifest.json"), "--methods", "hammr-l,identity", "--out",
        &report, "--plot",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = std::fs::read_to_string(dir.path().join("report/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("method,dataset,pct_improved,pct_unchanged,pct_worsened,mean_rank_change"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let identity = rows.iter().find(|r| r[0] == "identity").unwrap();
    assert_eq!(identity[1..].join(","), "n9-k6,0.0,100.0,0.0,0.00");
    let hl = rows.iter().find(|r| r[0] == "hammr-l").unwrap();
    assert!(hl[5].parse::<f64>().unwrap() > 0.0, "{hl:?}");

    let records = std::fs::read_to_string(dir.path().join("report/records.csv")).unwrap();
    assert_eq!(
        records.lines().next(),
        Some("method,dataset,secret,rank_before,rank_after,rank_change,category")
    );
    assert_eq!(records.lines().count(), 1 + 2 * 84);
    for f in ["report.json", "rank_histogram.csv", "topk.csv"] {
        assert!(dir.path().join("report").join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        &format!(
            r#"{{"seed":4,"qubits":5,"ones":2,"shots":256,"per_cnot_flip_prob":0.03,"out":{:?}}}"#,
            path(dir.path(), "gen")
        ),
    );
    let out = hammrl(&["--config", &cfg, "generate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path().join("gen")).unwrap().count(), 11);

    let bad = write(dir.path(), "bad.json", r#"{"qubitz":5}"#);
    let out = hammrl(&["--config", &bad, "generate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qubitz"));
}
