use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn blindqc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindqc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_bfk_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = blindqc(
        &[
            "run",
            "--protocol",
            "bfk",
            "--m",
            "2",
            "--shots",
            "10000",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&dir.path().join("result.json"));
    assert!(r["tv"].as_f64().unwrap() < 0.05);
    assert_eq!(r["completed"], 10000);
    let transcript = fs::read_to_string(dir.path().join("transcript.jsonl")).unwrap();
    for line in transcript.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["seq", "from", "to", "kind", "payload"] {
            assert!(rec.get(key).is_some(), "{line}");
        }
    }
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--protocol",
        "single",
        "--shots",
        "200",
        "--seed",
        "9",
        "--decoys",
        "2",
        "--check-decoys",
        "1",
    ];
    assert_eq!(blindqc(&args, a.path()).status.code(), Some(0));
    assert_eq!(blindqc(&args, b.path()).status.code(), Some(0));
    for f in ["result.json", "transcript.jsonl"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ not json").unwrap();
    let out = blindqc(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out = blindqc(&["run", "--p-forward", "3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = blindqc(&["run", "--adversary", "teleport"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = blindqc(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"variant": "double", "seed": 4}"#).unwrap();
    let comp = dir.path().join("comp.json");
    fs::write(
        &comp,
        r#"{"vertices": 3, "edges": [[0,1],[1,2]], "order": [0,1], "outputs": [2], "phi": {"0": 2, "1": 1}, "x_deps": {"1": [0], "2": [1]}, "z_deps": {"2": [0]}}"#,
    )
    .unwrap();
    let out = blindqc(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--computation",
            comp.to_str().unwrap(),
            "--shots",
            "20",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&dir.path().join("result.json"));
    assert_eq!(r["protocol"], "double");
    assert_eq!(r["seed"], 4);
    assert_eq!(r["vertices"], 3);

    let out = blindqc(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--protocol",
            "triple",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("result.json"));
    assert_eq!(r["protocol"], "triple");
    assert_eq!(r["seed"], 5);

    // m disagreeing with the computation is rejected
    let out = blindqc(
        &["run", "--computation", comp.to_str().unwrap(), "--m", "4"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cheating_server_aborts_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut aborted = 0;
    for seed in 0..20 {
        let s = seed.to_string();
        let out = blindqc(
            &[
                "run",
                "--adversary",
                "guess_bell",
                "--decoys",
                "3",
                "--check-decoys",
                "2",
                "--seed",
                &s,
            ],
            dir.path(),
        );
        match out.status.code() {
            Some(2) => aborted += 1,
            Some(0) => {}
            other => panic!("{other:?}"),
        }
    }
    // each seed escapes with probability 1/16
    assert!(aborted >= 15, "{aborted}");
    let r = json(&dir.path().join("result.json"));
    assert!(r["aborts"].get("cheating").is_some() || r["completed"] == 1);
}

#[test]
fn collusion_aborts_double_server() {
    let dir = tempfile::tempdir().unwrap();
    let out = blindqc(
        &["run", "--protocol", "double", "--adversary", "collude"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let r = json(&dir.path().join("result.json"));
    assert_eq!(r["aborts"]["policy"], 1);
}

#[test]
fn check_passes_and_flipped_sign_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = blindqc(&["check"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("check.json"));
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 8);
    assert!(checks
        .iter()
        .all(|c| c["pass"] == true && c["name"].is_string()));

    let cfg = dir.path().join("flipped.json");
    fs::write(
        &cfg,
        r#"{"variant": "single", "signs": {"bfk": 1, "frame": 1}}"#,
    )
    .unwrap();
    let out = blindqc(&["check", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = json(&dir.path().join("check.json"));
    let residual = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "residual_identity")
        .unwrap()
        .clone();
    assert_eq!(residual["pass"], false);
}

#[test]
fn analysis_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = blindqc(&["blindness"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("blindness.json"));
    assert!(r["estimate"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["pass"], true);

    let out = blindqc(&["blindness", "--padding", "constant-zero"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(
        json(&dir.path().join("blindness.json"))["estimate"]
            .as_f64()
            .unwrap()
            > 0.0
    );

    let out = blindqc(
        &["detect", "--check-decoys", "1", "--trials", "100000"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("detect.json"));
    assert!((r["estimate"].as_f64().unwrap() - 0.75).abs() < 0.01);
    assert_eq!(r["pass"], true);

    let out = blindqc(
        &["forward-stats", "--p-forward", "1", "--trials", "100"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("forward.json"))["estimate"], 1.0);
}
