use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

use rfis::cli::{run_subcommand, EXIT_INVALID, EXIT_OK, EXIT_USAGE};
use rfis::{example, BilinearRfis};

fn fixture(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corrected() -> BilinearRfis {
    BilinearRfis::uniform(
        &example::heights(),
        &example::factors_corrected(),
        &example::XPRIME_IDX,
        &example::YPRIME_IDX,
    )
    .unwrap()
}

fn csv_rows(text: &str) -> Vec<[f64; 3]> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,f"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn validate_accepts_corrected_and_rejects_original() {
    let dir = TempDir::new().unwrap();
    let good = fixture(&dir, "good.json", example::CORRECTED_JSON);
    let out = run_subcommand(["rfis", "validate", arg(&good)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], true);

    let bad = fixture(&dir, "bad.json", example::ORIGINAL_JSON);
    let out = run_subcommand(["rfis", "validate", arg(&bad)]);
    assert_eq!(out.code, EXIT_INVALID);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let msg = report["uniform_sums_error"].as_str().unwrap();
    assert!(msg.contains("(r,t)=(1,2)") && msg.contains("sum 2 "), "{msg}");
}

#[test]
fn malformed_and_missing_configs() {
    let dir = TempDir::new().unwrap();
    let cut = fixture(&dir, "cut.json", &example::CORRECTED_JSON[..200]);
    let out = run_subcommand(["rfis", "validate", arg(&cut)]);
    assert_eq!(out.code, EXIT_INVALID);
    assert!(out.stderr.contains("parse error at line"), "{}", out.stderr);

    let missing = dir.path().join("nope.json");
    let out = run_subcommand(["rfis", "validate", arg(&missing)]);
    assert_eq!(out.code, EXIT_USAGE);
}

#[test]
fn sample_level_zero_reproduces_heights() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "c.json", example::CORRECTED_JSON);
    let out = run_subcommand(["rfis", "sample", arg(&cfg), "--level", "0", "--format", "csv"]);
    assert_eq!(out.code, EXIT_OK);
    let rows = csv_rows(out.stdout_str());
    assert_eq!(rows.len(), 25);
    let z = example::heights();
    for (idx, row) in rows.iter().enumerate() {
        let (p, q) = (idx / 5, idx % 5);
        assert_eq!(*row, [p as f64 / 4.0, q as f64 / 4.0, z[p][q]]);
    }
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "c.json", example::CORRECTED_JSON);
    let path = dir.path().join("s.csv");
    let out = run_subcommand(["rfis", "sample", arg(&cfg), "--level", "4", "--format", "csv", "--out", arg(&path)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["nodes"], 65 * 65);
    let rows = csv_rows(&std::fs::read_to_string(&path).unwrap());
    let s = corrected().sample_surface(4).unwrap();
    assert_eq!(rows.len(), 65 * 65);
    for (idx, row) in rows.iter().enumerate() {
        let (kx, ly) = (idx / 65, idx % 65);
        assert_eq!(row[0].to_bits(), s.coord(kx).to_bits());
        assert_eq!(row[1].to_bits(), s.coord(ly).to_bits());
        assert_eq!(row[2].to_bits(), s.get(kx, ly).to_bits());
    }
}

#[test]
fn obj_vertex_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "c.json", example::CORRECTED_JSON);
    for level in 0..=3u32 {
        let out = run_subcommand(["rfis", "sample", arg(&cfg), "--level", &level.to_string(), "--format", "obj"]);
        let text = out.stdout_str();
        let side = 4 << level;
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), (side + 1) * (side + 1));
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * side * side);
    }
}

#[test]
fn dim_theory_and_empirical() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "c.json", example::CORRECTED_JSON);
    let out = run_subcommand(["rfis", "dim", arg(&cfg), "--method", "theory"]);
    assert_eq!(out.code, EXIT_OK);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["dimension"].as_f64().unwrap() - 2.166712).abs() < 1e-6);

    let out = run_subcommand(["rfis", "dim", arg(&cfg), "--method", "empirical", "--levels", "3..7"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["profile"]["levels"].as_array().unwrap().len(), 5);
    let d = report["estimate"]["dimension"].as_f64().unwrap();
    assert!((2.0..2.5).contains(&d), "{d}");

    let bad = fixture(&dir, "o.json", example::ORIGINAL_JSON);
    let out = run_subcommand(["rfis", "dim", arg(&bad), "--method", "theory"]);
    assert_eq!(out.code, EXIT_INVALID);
}

#[test]
fn attractor_check_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "c.json", example::CORRECTED_JSON);
    let out = run_subcommand(["rfis", "attractor-check", arg(&cfg), "--level", "2", "--steps", "30"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["report"]["distances"].as_array().unwrap().len(), 31);
    assert!(report["final_distance_in_diagonals"].as_f64().unwrap() <= 2.0);
}

#[test]
fn reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture(&dir, "c.json", example::CORRECTED_JSON);
    let a = run_subcommand(["rfis", "validate", arg(&cfg)]);
    let b = run_subcommand(["rfis", "validate", arg(&cfg)]);
    assert_eq!(a, b);
    let a = run_subcommand(["rfis", "sample", arg(&cfg), "--level", "3", "--format", "pgm16"]);
    let b = run_subcommand(["rfis", "sample", arg(&cfg), "--level", "3", "--format", "pgm16"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn binary_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = fixture(&dir, "good.json", example::CORRECTED_JSON);
    let bad = fixture(&dir, "bad.json", example::ORIGINAL_JSON);
    let bin = env!("CARGO_BIN_EXE_rfis");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["validate", arg(&good)]), Some(0));
    assert_eq!(code(&["validate", arg(&bad)]), Some(2));
    assert_eq!(code(&["sample", arg(&good), "--format", "tiff", "--level", "1"]), Some(1));
    let out = Command::new(bin).args(["example-paper", "--emit-config"]).output().unwrap();
    assert_eq!(out.stdout, example::CORRECTED_JSON.as_bytes());
}
