use std::process::{Command, Output};

fn flexkv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexkv"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn analyze_prints_the_case_study() {
    let out = flexkv(&[
        "analyze", "--T", "10", "--C", "1024000", "--B", "4096", "--E", "1024", "--K", "5",
        "--Kp", "4", "--x", "0.5", "--f", "0.01", "--gamma", "0.5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (kind, cost) in [("greedy", "125.000"), ("lazy", "3.750"), ("flexible", "2.500")] {
        let line = text.lines().find(|l| l.starts_with(kind)).unwrap();
        assert_eq!(line.split_whitespace().last(), Some(cost), "{text}");
    }
}

#[test]
fn analyze_rejects_gamma_of_one() {
    let out = flexkv(&[
        "analyze", "--T", "10", "--C", "1024000", "--B", "4096", "--E", "1024", "--K", "5",
        "--Kp", "4", "--x", "0.5", "--f", "0.01", "--gamma", "1",
    ]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn run_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
            "engine": {"buffer_capacity": 13600},
            "workload": {"sessions": [{"op_count": 3000, "lookup_fraction": 0.5, "key_space": 10000}],
                         "mission_size": 1000, "preload": 2000},
            "policy": {"mode": "fixed", "k": 3}
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = flexkv(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn bad_config_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"policy": {"mode": "fixed", "k": 42}}"#).unwrap();
    let out = flexkv(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cfg.json"));

    let out = flexkv(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn unknown_transition_is_rejected() {
    let out = flexkv(&["microbench", "--transition", "eager", "--missions", "2"]);
    assert!(!out.status.success());
}
