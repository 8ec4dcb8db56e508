//! CLI behavior: exit codes, snapshots, determinism of gen-data.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shapegen4d"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sg4d_cli_tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let mut entries: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap()).collect();
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = bin().args(["gen-data", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");
}

#[test]
fn runtime_failure_exits_1_with_diagnostic() {
    let dir = tmp("fail");
    let out = bin()
        .args([
            "train-vae",
            "--data",
            dir.join("missing").to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
            "--steps",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn gen_data_is_byte_deterministic() {
    let a = tmp("det_a");
    let b = tmp("det_b");
    for dir in [&a, &b] {
        let out = bin()
            .args([
                "gen-data",
                "--count",
                "2",
                "--frames",
                "3",
                "--seed",
                "7",
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
}

#[test]
fn gen_data_writes_config_snapshot() {
    let dir = tmp("snapshot");
    let out = bin()
        .args([
            "gen-data",
            "--count",
            "1",
            "--frames",
            "2",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("config.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["schema_version"], 1);
    assert_eq!(parsed["command"], "gen-data");
    assert_eq!(parsed["gen_data.count"], 1);
}

#[test]
fn config_file_keys_apply_and_flags_override() {
    let dir = tmp("config_file");
    std::fs::write(
        dir.join("run.json"),
        r#"{"vae.supervision_per_step": 16}"#,
    )
    .unwrap();
    // gen-data first so train-vae has input.
    assert!(bin()
        .args([
            "gen-data",
            "--count",
            "1",
            "--frames",
            "2",
            "--out",
            dir.join("data").to_str().unwrap(),
        ])
        .output()
        .unwrap()
        .status
        .success());
    let out = bin()
        .args([
            "--config",
            dir.join("run.json").to_str().unwrap(),
            "--set",
            "vae.supervision_pool=64",
            "train-vae",
            "--data",
            dir.join("data").to_str().unwrap(),
            "--out",
            dir.join("vae").to_str().unwrap(),
            "--steps",
            "2",
            "--preset",
            "micro",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("vae").join("config.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["vae.supervision_per_step"], 16);
    assert_eq!(parsed["vae.supervision_pool"], 64);
}
