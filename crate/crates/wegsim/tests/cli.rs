//! End-to-end runs of the `wegsim` binary.

use std::path::Path;
use std::process::{Command, Output};

fn wegsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wegsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_face_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("face.json");
    std::fs::write(
        &path,
        r#"{
  "stream": {
    "num_classes": 2622,
    "segments": [{"n_dominant": 5, "skew": 0.9, "length": 600, "dominant_set": [0, 1, 2, 3, 4]}]
  },
  "oracle": "face-like",
  "templates": ["F2-like"],
  "weg": {"tau_a": -0.05},
  "run": {"policy": "weg", "seed": 11, "repetitions": 2, "mode": "streaming"}
}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_metrics_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_face_config(dir.path());
    let out = wegsim(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "metrics.csv",
            "--log",
            "steps.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,policy,seed,repetition,items,accuracy,mean_cost_ms,oracle_only_cost_ms,speedup,special_rate,cascade_rate,retargets,mean_dom_size,mean_window_size,regret_ms"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "one row per repetition");
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 15);
        assert_eq!(fields[1], "weg");
        assert_eq!(fields[4], "600");
    }

    let log = std::fs::read_to_string(dir.path().join("steps.jsonl")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 1200, "two repetitions of 600 items");
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    for key in [
        "t", "true_label", "predicted", "correct", "phase", "cascaded", "explored", "retargeted",
        "cost_ms",
    ] {
        assert!(first.get(key).is_some(), "log line missing {key}");
    }
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_face_config(dir.path());
    for name in ["a.jsonl", "b.jsonl"] {
        let out = wegsim(
            &["simulate", "--config", config.to_str().unwrap(), "--log", name],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn policy_and_seed_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_face_config(dir.path());
    let out = wegsim(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--policy",
            "oracle",
            "--seed",
            "99",
            "--out",
            "m.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let row = metrics.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[1], "oracle_only");
    assert_eq!(fields[2], "99");
}

#[test]
fn config_errors_exit_2_and_io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"stream": {"num_classes": 2622, "segments": []}}"#).unwrap();
    let out = wegsim(&["simulate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let out = wegsim(&["simulate", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    // Unknown key: fail fast with exit 2.
    let typo = dir.path().join("typo.json");
    std::fs::write(
        &typo,
        r#"{
  "stream": {"num_classes": 2622, "segments": [{"n_dominant": 0, "length": 10}]},
  "oracle": "face-like",
  "templates": ["F2-like"],
  "weg": {"tau_alpha": -0.05}
}"#,
    )
    .unwrap();
    let out = wegsim(&["simulate", "--config", typo.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_window_support_prints_builtin_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = wegsim(&["analyze", "window-support"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,N,a,n,p,w,c,p_in,p_out");
    assert_eq!(lines.len(), 9);
    assert!(lines[2].starts_with("2,1000,0.68,10,0.9,30,2,0.558,6.53E-5"), "row 2: {}", lines[2]);
    assert!(lines[8].contains(",N/A,"), "uniform row keeps N/A: {}", lines[8]);
}

#[test]
fn analyze_window_support_accepts_custom_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let regimes = dir.path().join("regimes.csv");
    std::fs::write(&regimes, "index,N,a,n,p,w,c\n1,1000,0.68,10,0.9,60,2\n2,205,0.58,0,N/A,90,3\n")
        .unwrap();
    let out = wegsim(
        &["analyze", "window-support", "--regimes", regimes.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].ends_with("0.891,2.64E-4"), "{}", lines[1]);
    assert!(lines[2].ends_with("N/A,9.95E-3"), "{}", lines[2]);
}

#[test]
fn analyze_skew_measures_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    // Two segments of 6: one dominated by label 3, one uniform over 0..6.
    let mut text = String::from("#N=10\n");
    for (i, l) in [3, 3, 3, 3, 3, 9, 0, 1, 2, 3, 4, 5].iter().enumerate() {
        text.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(&trace, text).unwrap();
    let out = wegsim(
        &[
            "analyze",
            "skew",
            "--trace",
            trace.to_str().unwrap(),
            "--segment-items",
            "6",
            "--skews",
            "80",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "skew,n,fraction");
    // Covering >80% of 6 items needs 5 of 6: label 3 alone covers the first
    // segment, the uniform one needs 5 labels.
    assert_eq!(lines[1], "80,1,0.5");
    assert_eq!(lines[2], "80,2,0.5");
    assert!(lines.contains(&"80,5,1"));
}

#[test]
fn trace_replay_reports_no_regret() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let mut text = String::from("#N=2622\n");
    for i in 0..200 {
        text.push_str(&format!("{i},{}\n", i % 5));
    }
    std::fs::write(&trace, text).unwrap();
    let config = dir.path().join("replay.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
  "stream": {{"trace": "{}"}},
  "oracle": "face-like",
  "templates": ["F2-like"],
  "weg": {{"tau_a": -0.05}},
  "run": {{"seed": 3}}
}}"#,
            trace.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = wegsim(
        &["simulate", "--config", config.to_str().unwrap(), "--out", "m.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let row = metrics.lines().nth(1).unwrap();
    assert!(row.ends_with(','), "regret cell empty for trace replay: {row}");
}

#[test]
fn sweep_emits_one_row_per_value_and_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_face_config(dir.path());
    let out = wegsim(
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--param",
            "weg.epsilon",
            "--values",
            "0.005,0.01,0.02",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("param,value,run_id"));
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("weg.epsilon,0.005,"));

    // Unknown parameter paths are a config error.
    let out = wegsim(
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--param",
            "weg.unknown",
            "--values",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}
