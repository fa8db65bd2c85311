use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eprsim")).args(args).output().unwrap()
}

fn jsonl(out: &Output) -> Vec<Value> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn f(v: &Value, k: &str) -> f64 {
    v[k].as_f64().unwrap_or_else(|| panic!("{k} in {v}"))
}

#[test]
fn analytic_rows() {
    let rows = jsonl(&run(&["analytic", "--from", "0", "--to", "180", "--step", "15", "--format", "jsonl"]));
    assert_eq!(rows.len(), 13);
    assert_eq!(f(&rows[0], "e_entangled"), -1.0);
    assert_eq!(f(&rows[0], "e_disentangled_raw"), -0.125);
    assert_eq!(f(&rows[0], "e_disentangled_per_pairs"), -0.5);
    let ninety = &rows[6];
    assert_eq!(f(ninety, "theta_ab_deg"), 90.0);
    for k in ["e_entangled", "e_disentangled_raw", "e_disentangled_per_pairs"] {
        assert!(f(ninety, k).abs() < 1e-15, "{k}");
    }
    for r in &rows {
        let dis: f64 = ["dis_pp", "dis_pm", "dis_mp", "dis_mm"].iter().map(|k| f(r, k)).sum();
        let ent: f64 = ["ent_pp", "ent_pm", "ent_mp", "ent_mm"].iter().map(|k| f(r, k)).sum();
        assert!((dis - 1.0).abs() < 1e-12 && (ent - 1.0).abs() < 1e-12);
    }
}

#[test]
fn analytic_raw_tables_and_bad_sweep() {
    let rows = jsonl(&run(&["analytic", "--to", "0", "--normalization", "raw", "--model", "disentangled", "--format", "jsonl"]));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].get("ent_pp").is_none());
    assert_eq!(f(&rows[0], "dis_pp"), 1.0 / 32.0);
    let bad = run(&["analytic", "--step", "0", "--from", "10", "--to", "5"]);
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("--step") && err.contains("--to"), "{err}");
    assert_eq!(run(&["analytic", "--normalization", "per-spins"]).status.code(), Some(2));
}

#[test]
fn simulate_usage_errors_list_every_field() {
    let out = run(&["simulate", "--pairs", "0", "--sampler", "cubic", "--thin", "2", "--setting-a", "90,0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for field in ["--pairs", "--sampler", "--thin", "--setting-a/--setting-b"] {
        assert!(err.contains(field), "{field} missing from {err}");
    }
}

#[test]
fn simulate_is_byte_reproducible() {
    let args = ["simulate", "--model", "disentangled", "--sampler", "isotropic", "--pairs", "5000", "--seed", "3", "--theta-ab", "20"];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("pair_id,axis_x,axis_y,axis_z,branch,a_theta_deg,b_theta_deg,outcome_a,outcome_b,a_phi_deg,b_phi_deg")
    );
    assert_eq!(lines.count(), 5000);
    let summary: Value = serde_json::from_slice(&b.stderr).unwrap();
    assert_eq!(summary["pairs_used"], 5000);
}

#[test]
fn entangled_summary_within_band() {
    let rows = jsonl(&run(&[
        "simulate", "--model", "entangled", "--theta-ab", "45", "--pairs", "1000000", "--summary-only", "--format", "jsonl",
    ]));
    let s = &rows[0];
    assert!((f(s, "correlation") + std::f64::consts::FRAC_1_SQRT_2).abs() < 3.0 * f(s, "std_error"));
    assert_eq!(s["within_3sigma"], true);
}

#[test]
fn detector_view_hides_hidden_variables() {
    let out = run(&["simulate", "--model", "disentangled", "--pairs", "4", "--detector-view", "--format", "jsonl"]);
    let rows = jsonl(&out);
    assert!(rows.iter().all(|r| r.get("axis_x").is_none() && r.get("branch").is_none()));
    let full = jsonl(&run(&["simulate", "--model", "entangled", "--pairs", "2", "--format", "jsonl"]));
    assert!(full[0]["axis_x"].is_null() && full[0]["branch"].is_null());
}

#[test]
fn thinning_reduces_pairs() {
    let rows = jsonl(&run(&[
        "simulate", "--model", "disentangled", "--pairs", "20000", "--thin", "0.5", "--summary-only", "--format", "jsonl",
    ]));
    let used = rows[0]["pairs_used"].as_u64().unwrap();
    assert!((9_000..11_000).contains(&used), "{used}");
}

#[test]
fn chsh_values_and_scan() {
    let ent = jsonl(&run(&["chsh", "--format", "jsonl"]));
    assert!((f(&ent[0], "abs_s") - 2.8284271247461903).abs() < 1e-12);
    let dis = jsonl(&run(&["chsh", "--model", "disentangled", "--format", "jsonl"]));
    assert!((f(&dis[0], "abs_s") - 2f64.sqrt()).abs() < 1e-12);
    let raw = jsonl(&run(&["chsh", "--model", "disentangled", "--normalization", "raw", "--format", "jsonl"]));
    assert!((f(&raw[0], "abs_s") - 2f64.sqrt() / 4.0).abs() < 1e-12);
    let scan = jsonl(&run(&["chsh", "--scan", "72", "--format", "jsonl"]));
    assert!(f(&scan[0], "abs_s") >= f(&ent[0], "abs_s") - 1e-12);
    let odd = jsonl(&run(&["chsh", "--angles", "10,-20,35,70", "--format", "jsonl"]));
    assert!(f(&scan[0], "abs_s") >= f(&odd[0], "abs_s"));
    assert_eq!(run(&["chsh", "--scan", "3"]).status.code(), Some(2));
}

#[test]
fn report_rows_match_references() {
    let rows = jsonl(&run(&["report", "--pairs", "0", "--format", "jsonl"]));
    assert!(rows.len() >= 15);
    for r in &rows {
        if let Some(d) = r["abs_diff"].as_f64() {
            assert!(d < 1e-9, "{r}");
        }
    }
    assert!(rows.iter().any(|r| r["note"].as_str().is_some_and(|n| n.contains("discrepancy:"))));
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 7] = [
        ("analytic", &["--model", "--from", "--to", "--step", "--normalization", "--format", "--out"]),
        (
            "simulate",
            &[
                "--model", "--sampler", "--pairs", "--seed", "--theta-ab", "--setting-a", "--setting-b", "--thin",
                "--detector-view", "--summary-only", "--format", "--out",
            ],
        ),
        ("chsh", &["--model", "--normalization", "--angles", "--scan", "--format", "--out"]),
        ("net-source", &["--connect", "--pairs", "--seed", "--sampler"]),
        ("net-detector", &["--wing", "--setting", "--listen", "--connect", "--seed", "--capture"]),
        ("net-collector", &["--listen", "--pairs", "--mismatch", "--capacity", "--format", "--out"]),
        ("report", &["--pairs", "--seed", "--format", "--out"]),
    ];
    for (cmd, flags) in cases {
        let out = run(&[cmd, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout);
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn net_source_needs_two_endpoints() {
    let out = run(&["net-source", "--connect", "127.0.0.1:9", "--sampler", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--connect") && err.contains("--sampler"), "{err}");
}

#[test]
fn csv_output_parses_back() {
    let dir = std::env::temp_dir().join(format!("eprsim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("analytic.csv");
    let out = run(&["analytic", "--step", "30", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "theta_ab_deg");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 7);
    let e: f64 = rows[2][1].parse().unwrap();
    assert_eq!(e, -(60f64.to_radians().cos()));
    std::fs::remove_dir_all(&dir).ok();
}
