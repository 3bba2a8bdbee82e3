use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn twolocal(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twolocal"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = twolocal(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a summary.csv, skipping the comment header.
fn summary(dir: &Path) -> Vec<csv::StringRecord> {
    let text = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(text.starts_with("# twolocal"));
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().clone();
    let mut rows = vec![header];
    rows.extend(r.records().map(|x| x.unwrap()));
    rows
}

fn column(rows: &[csv::StringRecord], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].to_string()).collect()
}

#[test]
fn gen_spectrum_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    ok(a.path(), &["gen-spectrum", "--n", "4", "--count", "3", "--seed", "11"]);
    ok(b.path(), &["--jobs", "1", "gen-spectrum", "--n", "4", "--count", "3", "--seed", "11"]);
    let files: Vec<_> = fs::read_dir(a.path().join("results")).unwrap().collect();
    assert_eq!(files.len(), 3);
    for i in 0..3 {
        let name = format!("results/spectrum_n4_{i:04}.json");
        let (x, y) = (json(&a.path().join(&name)), json(&b.path().join(&name)));
        assert_eq!(x["data"], y["data"]);
        assert_eq!(x["tool"], "twolocal");
        assert_eq!(x["seed"], 11);
    }
}

#[test]
fn oversized_request_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = twolocal(dir.path(), &["gen-spectrum", "--n", "25"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn bad_flag_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let o = twolocal(dir.path(), &["localize", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn localize_writes_results_and_summary() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["localize", "--n", "3-4", "--count", "2", "--seed", "5"]);
    let rows = summary(dir.path());
    assert_eq!(column(&rows, "n"), ["3", "4"]);
    assert_eq!(column(&rows, "n_failed"), ["0", "0"]);
    for c in column(&rows, "max_final_cost") {
        assert!(c.parse::<f64>().unwrap() < 1e-10);
    }
    let r = json(&dir.path().join("results/localize_n4_0001.json"));
    assert_eq!(r["command"], "localize");
    assert!(r["stream"].is_u64());
    assert_eq!(r["data"]["best"]["couplings"].as_array().unwrap().len(), 2 * 4 + 5 * 6);
}

#[test]
fn sparse_variant_reports_sparsity() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["localize", "--n", "4", "--count", "2", "--variant", "sparse", "--lambda", "1e-3"]);
    let rows = summary(dir.path());
    assert!(column(&rows, "variant")[0].starts_with("sparse"));
    let s: f64 = column(&rows, "mean_sparsity")[0].parse().unwrap();
    assert!(s > 0.0 && s <= 1.0);
}

#[test]
fn stability_of_z_only_minimum_is_identity() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["localize", "--n", "5", "--count", "1", "--flavor", "z_only_2local"]);
    let input = dir.path().join("results/localize_n5_0000.json");
    let st = TempDir::new().unwrap();
    ok(st.path(), &["stability", "--input", input.to_str().unwrap()]);
    let rows = summary(st.path());
    assert_eq!(column(&rows, "identity"), ["true"]);
    let lambda_1: f64 = column(&rows, "lambda_1")[0].parse().unwrap();
    assert!((lambda_1 - 1.0).abs() < 1e-12);
}

#[test]
fn stability_reports_unit_top_eigenvalue() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["localize", "--n", "4", "--count", "1"]);
    let input = dir.path().join("results/localize_n4_0000.json");
    let st = TempDir::new().unwrap();
    ok(st.path(), &["stability", "--input", input.to_str().unwrap()]);
    let rows = summary(st.path());
    let lambda_1: f64 = column(&rows, "lambda_1")[0].parse().unwrap();
    assert!((lambda_1 - 1.0).abs() < 1e-8);
    assert!(fs::read_dir(st.path().join("results")).unwrap().count() >= 3);
}

#[test]
fn missing_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let o = twolocal(dir.path(), &["stability", "--input", "/nonexistent/run.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sff_starts_at_squared_dimension() {
    let spectra = TempDir::new().unwrap();
    ok(spectra.path(), &["gen-spectrum", "--n", "5", "--count", "4"]);
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["sff", "--input", spectra.path().join("results").to_str().unwrap(), "--t-min", "1e-8", "--points", "20"]);
    let text = fs::read_to_string(dir.path().join("results/sff.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let first = r.records().next().unwrap().unwrap();
    let value: f64 = first[1].parse().unwrap();
    assert!((value - 1024.0).abs() < 1e-6, "{value}");
}

#[test]
fn sw_demo_converges() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["sw", "--demo", "xxx", "--flavor", "complex_2local"]);
    assert!(stdout.contains("converged=true"), "{stdout}");
    let r = json(&dir.path().join("results/sw.json"));
    assert!(r["data"]["residual_norm"].as_f64().unwrap() < 1e-8);
    assert!(r["data"]["local_cost"].as_f64().unwrap() < 1e-12);
    assert!(dir.path().join("results/sw_trace.csv").exists());
}

#[test]
fn rank_bound_reports_tight_value() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["rank-bound", "--n", "3,4"]);
    assert!(stdout.contains("tight 1.333333"), "{stdout}");
    let rows = summary(dir.path());
    assert_eq!(column(&rows, "basis_size"), ["36", "66"]);
}

#[test]
fn lambda2_forms_agree() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["lambda2", "--n", "4,6", "--count", "3"]);
    let rows = summary(dir.path());
    let closed = column(&rows, "lambda2_closed");
    let brute = column(&rows, "lambda2_bruteforce");
    assert_eq!(closed.len(), 6);
    for (a, b) in closed.iter().zip(&brute) {
        let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs());
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 3, "count": 4, "seed": 9}"#).unwrap();
    let out = dir.path().join("out");
    ok(&out, &["--config", cfg.to_str().unwrap(), "gen-spectrum", "--count", "2"]);
    assert_eq!(fs::read_dir(out.join("results")).unwrap().count(), 2);
    let r = json(&out.join("results/spectrum_n3_0000.json"));
    assert_eq!(r["seed"], 9);

    fs::write(&cfg, r#"{"n": 3, "bogus": 1}"#).unwrap();
    let o = twolocal(&dir.path().join("bad"), &["--config", cfg.to_str().unwrap(), "gen-spectrum"]);
    assert_eq!(o.status.code(), Some(1));
}
