use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vee-ww-sim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV output, skipping comment lines and the header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn header(text: &str) -> String {
    text.lines().find(|l| !l.starts_with('#')).unwrap().to_owned()
}

#[test]
fn weak_value_at_quarter_pi() {
    let out = run(&["weak-value", "--epsilon", "0.7853981633974483"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["re"].as_f64().unwrap().abs() < 1e-12);
    assert!((v["im"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(v["config"]["mode"], "weak-value");
}

#[test]
fn tau_curve_strictly_decreasing_above_threshold() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"params": {"delta_over_gamma": 0.1, "form": "small"},
            "grid": {"min": 0.11, "max": 1.5707963267948966, "count": 200, "spacing": "log"}}"#,
    );
    let out_path = dir.path().join("tau.csv");
    let out = run(&["tau-curve", "--config", s(&cfg), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("# config: "));
    assert_eq!(header(&text), "epsilon,tau_gamma,rate_over_gamma,physical");
    assert!(!text.contains('\r'));
    let taus: Vec<f64> = rows(&text).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(taus.len(), 200);
    assert!(taus.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn smaller_splitting_weaker_amplification_at_fixed_angle() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"grid": {"values": [0.2]}}"#);
    let tau_at = |dg: &str| -> f64 {
        let out = run(&["tau-curve", "--config", s(&cfg), "--delta-over-gamma", dg]);
        assert_eq!(code(&out), 0);
        rows(&String::from_utf8(out.stdout).unwrap())[0][1].parse().unwrap()
    };
    let (a, b) = (tau_at("0.01"), tau_at("0.1"));
    assert!((a - 1.0 / 0.95).abs() < 1e-12, "{a}");
    assert!((b - 2.0).abs() < 1e-12, "{b}");
    assert!(a < b);
}

#[test]
fn curve_mode_flags_unphysical_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"grid": {"values": [0.05, 0.1, 0.15]}}"#);
    let out = run(&["tau-curve", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r[0][1], "");
    assert_eq!(r[0][3], "false");
    assert_eq!(r[1][3], "false");
    assert_eq!(r[2][3], "true");
}

#[test]
fn outputs_reproduce_from_their_echo() {
    let dir = TempDir::new().unwrap();
    let small_bath = r#""bath": {"cutoff_over_gamma": 20.0, "n_modes": 1024, "dt_gamma": 0.005, "t_end_gamma": 1.0}"#;
    let cases = [
        (
            "tau-curve",
            r#"{"grid": {"min": 0.01, "max": 1.5, "count": 50, "spacing": "log"}}"#.to_owned(),
        ),
        (
            "mc",
            r#"{"mc": {"n": 2000, "seed": 7}, "output": {"format": "csv"}}"#.to_owned(),
        ),
        ("mc", r#"{"mc": {"n": 2000, "model": "conditional"}}"#.to_owned()),
        ("evolve", format!("{{{small_bath}}}")),
        ("evolve", r#"{"bath": {"integrator": "markov"}}"#.to_owned()),
        (
            "compare",
            format!(r#"{{{small_bath}, "grid": {{"values": [0.3, 0.8]}}, "mc": {{"n": 500}}}}"#),
        ),
        ("weak-value", "{}".to_owned()),
    ];
    for (i, (mode, cfg)) in cases.iter().enumerate() {
        let cfg = write(&dir, &format!("c{i}.json"), cfg);
        let first = dir.path().join(format!("first{i}"));
        let second = dir.path().join(format!("second{i}"));
        let out = run(&[mode, "--config", s(&cfg), "--out", s(&first)]);
        assert_eq!(code(&out), 0, "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        let out = run(&[mode, "--config", s(&first), "--out", s(&second)]);
        assert_eq!(code(&out), 0, "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap(),
            "{mode}"
        );
    }
}

#[test]
fn compare_is_ordered_and_worker_independent() {
    let dir = TempDir::new().unwrap();
    let body = |workers: usize| {
        format!(
            r#"{{"bath": {{"cutoff_over_gamma": 20.0, "n_modes": 1024, "dt_gamma": 0.005}},
                "grid": {{"values": [1.2, 0.05, 0.4, 0.15]}},
                "mc": {{"n": 1000, "workers": {workers}}}}}"#
        )
    };
    let go = |workers: usize| {
        let cfg = write(&dir, &format!("w{workers}.json"), &body(workers));
        let out = run(&["compare", "--config", s(&cfg)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        rows(&String::from_utf8(out.stdout).unwrap())
    };
    let one = go(1);
    assert_eq!(one, go(4));
    let eps: Vec<&str> = one.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(eps, ["1.2", "0.05", "0.4", "0.15"]);
    // Below the threshold: flagged, Markov columns empty, jump-model mean still reported.
    assert_eq!(one[1][1], "false");
    assert_eq!(one[1][5], "");
    assert!(!one[1][9].is_empty());
    let dev: f64 = one[0][4].parse().unwrap();
    assert!(dev.abs() < 0.05, "{dev}");
}

#[test]
fn si_block_adds_physical_units() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "si.json",
        r#"{"si": {"omega": 2.416e15, "eta": 2.537e-29, "delta": 3.828e6, "epsilon": 0.3},
            "grid": {"values": [0.2, 0.5]}}"#,
    );
    let out = run(&["tau-curve", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        header(&text),
        "epsilon,tau_gamma,rate_over_gamma,physical,tau_s,rate_per_s"
    );
    let gamma = 38_280_147.048_686_33;
    for r in rows(&text) {
        let (tg, ts): (f64, f64) = (r[1].parse().unwrap(), r[4].parse().unwrap());
        assert!((ts * gamma / tg - 1.0).abs() < 1e-9);
    }
    let out = run(&["tau-curve", "--config", s(&cfg), "--delta-over-gamma", "0.1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "{not json",
        r#"{"params": {}, "si": {"omega": 1e15, "eta": 1e-29, "delta": 1e6}}"#,
        r#"{"grid": {"min": 0.0, "max": 1.0, "count": 10, "spacing": "log"}}"#,
        r#"{"grid": {"min": 0.1, "max": 1.0}}"#,
        r#"{"params": {"delta_over_gamma": 0.1, "eps": 0.2}}"#,
        r#"{"mode": "mc"}"#,
        r#"{"params": {"epsilon": 2.0}}"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(&dir, &format!("bad{i}.json"), text);
        let out = run(&["tau-curve", "--config", s(&cfg)]);
        assert_eq!(code(&out), 2, "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&run(&["tau-curve", "--config", "/nonexistent/c.json"])), 2);
    assert_eq!(code(&run(&["mc", "--n", "10"])), 2);
    assert_eq!(code(&run(&["evolve", "--preset", "fig2", "--svg", "x.svg"])), 2);
}

#[test]
fn unphysical_scalar_requests_exit_three() {
    for mode in ["mc", "evolve"] {
        let out = run(&[mode, "--delta-over-gamma", "0.1", "--epsilon", "0.05"]);
        assert_eq!(code(&out), 3, "{mode}");
        let msg = String::from_utf8_lossy(&out.stderr);
        assert!(msg.contains("delta/gamma"), "{msg}");
    }
}

#[test]
fn numeric_failure_exits_four() {
    assert_eq!(code(&run(&["weak-value", "--epsilon", "0"])), 4);
}

#[test]
fn mc_summary_json() {
    let out = run(&[
        "mc",
        "--epsilon",
        "0.2",
        "--delta-over-gamma",
        "0.1",
        "--n",
        "100000",
        "--seed",
        "42",
    ]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (mean, se) = (v["mean"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((mean - 2.0).abs() <= 3.0 * se);
    let total: u64 = v["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(total, 100_000);

    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"params": {"delta_over_gamma": 0.001, "epsilon": 0.0}, "mc": {"model": "conditional"}}"#,
    );
    let out = run(&["mc", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["analytic_mean"].as_f64().unwrap() / 3.0 - 1.0).abs() < 5e-3);
    assert!(v["z_score"].as_f64().unwrap().abs() < 4.0);
    let acc = v["acceptance_rate"].as_f64().unwrap();
    assert!(acc > 0.0 && acc <= 1.0);
}

#[test]
fn presets_and_svg() {
    let dir = TempDir::new().unwrap();
    let svg = dir.path().join("fig3.svg");
    let out = run(&["tau-curve", "--preset", "fig3", "--svg", s(&svg)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(r#""delta_over_gamma":0.01"#));
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg") && plot.contains("<polyline"));
}
