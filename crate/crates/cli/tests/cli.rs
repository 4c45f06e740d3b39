use std::path::Path;
use std::process::{Command, Output};

fn scgrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scgrec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) {
    let config = serde_json::json!({
        "filter": {"min_games": 1, "min_total_minutes": 0},
        "sample_fraction": 1.0,
        "split": {"num_eval_users": 200},
        "synthetic": {"n_users": 400, "n_games": 60},
        "training": {"max_epochs": 3, "validation_users": 100, "batch_size": 256},
        "sweep": {"w_social": [0.0], "w_context": [0.2]},
    });
    std::fs::write(dir.join("config.json"), config.to_string()).unwrap();
}

#[test]
fn unknown_key_exits_with_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scgrec(tmp.path(), &["--set", "training.learnin_rate=0.1", "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learnin_rate"));

    std::fs::write(tmp.path().join("bad.json"), r#"{"learnin_rate": 0.1}"#).unwrap();
    let out = scgrec(tmp.path(), &["--config", "bad.json", "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learnin_rate"));

    let out = scgrec(tmp.path(), &["--set", "graph.tau_t=1.5", "build-graph"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph.tau_t"));
}

#[test]
fn missing_data_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scgrec(tmp.path(), &["--set", "data_dir=nowhere", "train"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_writes_reports_and_recommends() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_config(dir);
    for command in ["gen-synthetic", "analyze", "build-graph", "train", "evaluate"] {
        let out = scgrec(dir, &["--config", "config.json", command]);
        assert!(
            out.status.success(),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in [
        "metrics.json",
        "metrics.csv",
        "model.ckpt",
        "train_log.jsonl",
        "log.jsonl",
        "graph/graph_manifest.json",
        "split/train.tsv",
        "analysis/analysis_summary.json",
    ] {
        assert!(dir.join("out").join(file).is_file(), "{file}");
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("out/metrics.json")).unwrap()).unwrap();
    let methods: Vec<&str> = metrics["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["scgrec", "pop_count", "pop_time"]);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("out/run_manifest.json")).unwrap()).unwrap();
    for command in ["gen-synthetic", "train", "evaluate"] {
        assert!(manifest[command]["config"].is_object(), "{command}");
    }
    let checksums = manifest["train"]["inputs"].as_object().unwrap();
    assert_eq!(checksums.len(), 3);
    assert!(checksums.values().all(|v| v.as_str().unwrap().len() == 64));

    let first_user = std::fs::read_to_string(dir.join("data/engagements.tsv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .next()
        .unwrap()
        .to_string();
    let out = scgrec(
        dir,
        &[
            "--config",
            "config.json",
            "recommend",
            "--user",
            &first_user,
            "--k",
            "10",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<(u64, f64)> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| {
            let (g, s) = l.split_once('\t').unwrap();
            (g.parse().unwrap(), s.parse().unwrap())
        })
        .collect();
    assert_eq!(lines.len(), 10);
    assert!(lines.windows(2).all(|w| w[0].1 >= w[1].1));

    let out = scgrec(dir, &["--config", "config.json", "recommend", "--user", "999999999"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_rejects_a_checkpoint_from_other_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_config(dir);
    for command in ["gen-synthetic", "train"] {
        assert!(scgrec(dir, &["--config", "config.json", command]).status.success());
    }
    let out = scgrec(dir, &["--config", "config.json", "--set", "seed=5", "evaluate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different training split"));
}

#[test]
fn grad_check_and_sweep_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_config(dir);
    assert!(scgrec(dir, &["--config", "config.json", "grad-check"]).status.success());
    assert!(dir.join("out/grad_check.json").is_file());
    assert!(scgrec(dir, &["--config", "config.json", "gen-synthetic"])
        .status
        .success());
    let out = scgrec(dir, &["--config", "config.json", "sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
