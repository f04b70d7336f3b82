use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sem4d(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sem4d"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn fixture_build_query_bench() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let list = sem4d(&["fixture", "--list"], dir);
    assert!(String::from_utf8_lossy(&list.stdout).lines().any(|l| l == "contact"));

    let made = stdout_json(&sem4d(&["fixture", "contact", "--out", "fx"], dir));
    assert_eq!(made["num_queries"], 11);
    assert!(dir.join("fx/queries.jsonl").is_file());

    let report = stdout_json(&sem4d(&["validate", "fx/bundle/manifest.json"], dir));
    assert_eq!(report["violations"], Value::Array(Vec::new()));

    let built = stdout_json(&sem4d(
        &["build", "fx/bundle/manifest.json", "--out", "again", "--cache", "cache"],
        dir,
    ));
    assert_eq!(built["fingerprint"], made["fingerprint"]);
    let cached = stdout_json(&sem4d(
        &["build", "fx/bundle/manifest.json", "--out", "again", "--cache", "cache"],
        dir,
    ));
    assert_eq!(cached["cached_stages"].as_array().unwrap().len(), 3);
    for name in ["scene.json", "controls.json", "dense.json", "instances.json"] {
        assert_eq!(
            std::fs::read(dir.join("again").join(name)).unwrap(),
            std::fs::read(dir.join("fx/scenes/contact").join(name)).unwrap(),
            "{name}"
        );
    }

    let r = stdout_json(&sem4d(&["query", "again", "summary"], dir));
    assert_eq!(r["status"], "ok");
    let tool = r["payload"]["instances"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["class"] == "tool")
        .unwrap()["id"]
        .as_u64()
        .unwrap()
        .to_string();
    let r = stdout_json(&sem4d(&["query", "again", "dominant-direction", "--a", &tool, "--t0", "0", "--t1", "10"], dir));
    assert_eq!(r["payload"]["direction"], serde_json::json!([1, 0, 1]));

    let bad = sem4d(&["query", "again", "overlap-score", "--a", &tool, "--b", "999", "--t", "0"], dir);
    assert!(!bad.status.success());
    let body: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(body["error"]["code"], "unknown_instance");

    let bench = sem4d(
        &["bench", "--fixtures", "fx/queries.jsonl", "--scenes", "fx/scenes", "--runner", "mock", "--out", "report.json"],
        dir,
    );
    assert!(bench.status.success(), "{}", String::from_utf8_lossy(&bench.stderr));
    let table = String::from_utf8_lossy(&bench.stdout);
    assert!(table.contains("parse failures: 0"), "{table}");
    let saved: Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(saved["answers"].as_array().unwrap().len(), 11);

    let ply = stdout_json(&sem4d(&["export-ply", "again", "--t", "3", "--out", "cloud.ply"], dir));
    assert!(ply["points"].as_u64().unwrap() > 0);
    assert!(std::fs::read(dir.join("cloud.ply")).unwrap().starts_with(b"ply\nformat binary_little_endian 1.0\n"));
}

#[test]
fn staged_commands_match_the_full_build() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    stdout_json(&sem4d(&["fixture", "two_objects", "--out", "fx"], dir));
    let m = "fx/bundle/manifest.json";
    let lifted = stdout_json(&sem4d(&["lift", m, "--out", "stages"], dir));
    // Tracks on the box silhouette flip between box and plane depth.
    assert!(lifted["removed_by_jump_filter"].as_u64().unwrap() < lifted["num_points"].as_u64().unwrap() / 10);
    assert!(dir.join("stages/lift_report.json").is_file());
    stdout_json(&sem4d(&["densify", m, "--controls", "stages/controls.json", "--out", "stages"], dir));
    stdout_json(&sem4d(
        &["semantics", m, "--controls", "stages/controls.json", "--dense", "stages/dense.json", "--out", "stages"],
        dir,
    ));
    for name in ["controls.json", "dense.json", "instances.json"] {
        assert_eq!(
            std::fs::read(dir.join("stages").join(name)).unwrap(),
            std::fs::read(dir.join("fx/scenes/two_objects").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_flags_change_the_fingerprint() {
    let tmp = tempfile::tempdir().unwrap();
    let base = stdout_json(&sem4d(&["config"], tmp.path()));
    let off = stdout_json(&sem4d(&["config", "--no-jump-filter"], tmp.path()));
    assert_ne!(base["fingerprint"], off["fingerprint"]);
    assert_eq!(off["config"]["lift"]["enable_jump_filter"], false);
    std::fs::write(tmp.path().join("c.json"), serde_json::to_string(&base["config"]).unwrap()).unwrap();
    let reread = stdout_json(&sem4d(&["config", "--config", "c.json"], tmp.path()));
    assert_eq!(reread["fingerprint"], base["fingerprint"]);
    std::fs::write(tmp.path().join("bad.json"), r#"{"lift": {"kappa": 3}}"#).unwrap();
    let bad = sem4d(&["config", "--config", "bad.json"], tmp.path());
    assert!(!bad.status.success());
}

#[test]
fn invalid_bundle_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    stdout_json(&sem4d(&["fixture", "static_plane", "--out", "fx", "--no-build"], dir));
    let path = dir.join("fx/bundle/manifest.json");
    let mut manifest: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    manifest["intrinsics"]["fx"] = serde_json::json!(-1.0);
    std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
    let out = sem4d(&["validate", "fx/bundle/manifest.json"], dir);
    assert!(!out.status.success());
}
