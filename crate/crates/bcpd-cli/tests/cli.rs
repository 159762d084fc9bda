//! End-to-end tests of the command-line interface: exit codes, output
//! formats, and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bcpd"))
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("bcpd-cli-test-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).expect("write temp file");
    path
}

fn golden_map_file() -> PathBuf {
    write_temp(
        "golden.json",
        r#"{"dim": 1, "A": [[0.5]], "B": [[-1.5]], "c": [1.0]}"#,
    )
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn analyze_golden_map_passes() {
    let map = golden_map_file();
    let out = bin().arg("analyze").arg(&map).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["stable_fixed_point"]["status"], "pass");
    assert_eq!(json["contraction"]["status"], "pass");
    let theta = json["contraction"]["witnesses"]["theta"].as_f64().unwrap();
    assert!((theta - 0.75).abs() < 1e-9);
}

#[test]
fn analyze_malformed_json_exits_one() {
    let map = write_temp("broken.json", "{ not json");
    let out = bin().arg("analyze").arg(&map).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn analyze_missing_file_exits_one() {
    let out = bin()
        .arg("analyze")
        .arg("/nonexistent/map.json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_failing_condition_exits_two() {
    // b = 0.5 keeps the lower branch contracting: no unstable fixed point.
    let map = write_temp(
        "contracting.json",
        r#"{"dim": 1, "A": [[0.5]], "B": [[0.5]], "c": [1.0]}"#,
    );
    let out = bin().arg("analyze").arg(&map).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["unstable_fixed_point"]["status"], "fail");
    assert!(json["unstable_fixed_point"]["witnesses"]["max_eigenvalue_b"].is_number());
}

#[test]
fn pace_reports_bilateral_response() {
    let map = golden_map_file();
    let out = bin()
        .args(["pace"])
        .arg(&map)
        .args(["--mu", "0.1", "--delta", "1", "--x0", "0.5", "--beats", "8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let csv_rows: Vec<&str> = text.lines().take_while(|l| !l.starts_with('{')).collect();
    assert_eq!(csv_rows[0], "n,x1");
    assert_eq!(csv_rows.len(), 9, "header plus eight beats");
    let json_start = text.find('{').unwrap();
    let json: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(json["converged"], true);
    assert_eq!(json["response"]["kind"], "bilateral_in_phase");
    let upper = json["response"]["y_upper"][0].as_f64().unwrap();
    let lower = json["response"]["y_lower"][0].as_f64().unwrap();
    assert!((upper - 1.4).abs() < 1e-9);
    assert!((lower + 0.2).abs() < 1e-9);
}

#[test]
fn pace_zero_delta_reduces_to_fixed_point() {
    let map = golden_map_file();
    let out = bin()
        .args(["pace"])
        .arg(&map)
        .args([
            "--mu", "0.4", "--delta", "0", "--x0", "0.79", "--beats", "2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let json_start = text.find('{').unwrap();
    let json: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    let upper = json["response"]["y_upper"][0].as_f64().unwrap();
    let lower = json["response"]["y_lower"][0].as_f64().unwrap();
    assert!((upper - 0.8).abs() < 1e-8);
    assert!((lower - 0.8).abs() < 1e-8);
}

#[test]
fn pace_records_series_even_without_stability_claim() {
    let map = golden_map_file();
    // Seeded at the opposite-phase orbit; the series is recorded and the
    // summary states whatever the simulation found.
    let out = bin()
        .args(["pace"])
        .arg(&map)
        .args([
            "--mu",
            "-6",
            "--delta",
            "1",
            "--x0",
            "0.2857142857142857",
            "--beats",
            "4",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.lines().count() >= 5);
    let json_start = text.find('{').unwrap();
    let json: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert!(json["converged"].is_boolean());
}

#[test]
fn gain_scan_classical_decreases() {
    let out = bin()
        .args([
            "gain-scan",
            "--classical",
            "--axis",
            "delta",
            "--fixed",
            "0.5",
            "--range",
            "0.1",
            "2",
            "20",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "param,gamma_theory,gamma_sim");
    let gains: Vec<f64> = lines
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            assert!(fields[2].is_empty(), "classical rows have no simulation");
            fields[1].parse().unwrap()
        })
        .collect();
    assert_eq!(gains.len(), 20);
    for w in gains.windows(2) {
        assert!(w[1] < w[0], "classical gain must decrease in delta");
    }
}

#[test]
fn gain_scan_single_point() {
    let out = bin()
        .args([
            "gain-scan",
            "--classical",
            "--axis",
            "mu",
            "--fixed",
            "0",
            "--range",
            "1",
            "1",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_str(&out).lines().count(), 2);
}

#[test]
fn gain_scan_without_target_exits_one() {
    let out = bin()
        .args([
            "gain-scan",
            "--axis",
            "delta",
            "--fixed",
            "0.1",
            "--range",
            "0.1",
            "1",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gain_scan_map_is_deterministic() {
    let map = golden_map_file();
    let run = || {
        bin()
            .args(["gain-scan"])
            .arg(&map)
            .args([
                "--axis", "delta", "--fixed", "0.1", "--range", "0.2", "1", "5", "--seed", "7",
            ])
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(
        first.stdout, second.stdout,
        "identical runs, identical bytes"
    );
    // Theory and simulation agree on the golden map.
    let text = stdout_str(&first);
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let theory: f64 = fields[1].parse().unwrap();
        let sim: f64 = fields[2].parse().unwrap();
        assert!((theory - sim).abs() < 1e-8);
    }
}

#[test]
fn sun_scan_increases_at_onset_window() {
    let out = bin()
        .args([
            "sun", "--axis", "delta", "--fixed", "0.5", "--range", "0.4", "2", "5",
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout_str(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().unwrap())
                .collect::<Vec<f64>>()
        })
        .collect();
    assert_eq!(rows.len(), 5);
    // Past the kink (delta_crit = 0.5/rho ~ 0.3 ms) the theory rises.
    let theories: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    assert!(theories.windows(2).all(|w| w[1] > w[0]));
    // Metadata goes to stderr and names the bifurcation point.
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("h_bif_ms"));
}

#[test]
fn classify_border_collision_curve() {
    // Theory samples of the scalar example map at mu = 0.1 with a small
    // deterministic perturbation.
    let mut csv = String::from("delta,gamma\n");
    for i in 0..8 {
        let delta = 0.1 + 1.9 * i as f64 / 7.0;
        let gamma = (2.0 / 3.0) + (4.0 / 7.0) * (1.0f64 / 3.0 - 0.1 / delta).max(0.0);
        let fuzz = 1.0 + 0.02 * ((i * 37 % 11) as f64 / 11.0 - 0.5);
        csv.push_str(&format!("{delta},{}\n", gamma * fuzz));
    }
    let path = write_temp("bc.csv", &csv);
    let out = bin().arg("classify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["label"], "border_collision");
    assert!(json["bc_fit"]["residual"].as_f64().unwrap() >= 0.0);
}

#[test]
fn classify_classical_curve() {
    // Classical cubic samples at mu = 0.5: delta^2 g^3 + mu g - 1 = 0.
    let root = |delta: f64| {
        let (mut lo, mut hi) = (0.0f64, 3.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if delta * delta * mid * mid * mid + 0.5 * mid - 1.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut csv = String::from("delta,gamma\n");
    for i in 0..8 {
        let delta = 0.1 + 1.9 * i as f64 / 7.0;
        let fuzz = 1.0 + 0.02 * ((i * 23 % 7) as f64 / 7.0 - 0.5);
        csv.push_str(&format!("{delta},{}\n", root(delta) * fuzz));
    }
    let path = write_temp("classical.csv", &csv);
    let out = bin().arg("classify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["label"], "classical");
}

#[test]
fn classify_three_rows_exits_three() {
    let path = write_temp("short.csv", "delta,gamma\n0.1,1.0\n0.2,1.0\n0.3,1.0\n");
    let out = bin().arg("classify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn classify_malformed_csv_exits_one() {
    let path = write_temp("bad.csv", "delta,gamma\n0.1,abc\n");
    let out = bin().arg("classify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_one() {
    let out = bin().args(["analyze", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.contains("gain-scan"));
}
