use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-rl"))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).env_remove("HYBRID_RL_OUT").output().unwrap()
}

const SMALL: &str = r#"
name = "small"
behaviors = ["uniform", "optimal"]
n_off = 5
n_on = 8
trials = 3
metrics = ["coverage", "visits", "avg_reward", "regret"]

[environment]
name = "forest"

[agent]
name = "ucbvi"
params = { bonus_scale = 0.2 }
"#;

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn lists_registered_names() {
    let tmp = tempfile::tempdir().unwrap();
    let envs = run(&["list-envs"], tmp.path());
    assert!(envs.status.success());
    assert_eq!(String::from_utf8_lossy(&envs.stdout), "forest\ntetris\nrandom\nblock\n");
    let agents = run(&["list-agents"], tmp.path());
    assert_eq!(String::from_utf8_lossy(&agents.stdout), "ucbvi\nlsvi_ucb\ndisc_golf\n");
}

#[test]
fn unknown_agent_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, SMALL.replace("\"ucbvi\"", "\"ucbvii\"")).unwrap();
    let out = run(&["validate", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ucbvii"), "{err}");
}

#[test]
fn missing_config_and_bad_format() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "nope.toml"], tmp.path()).status.code(), Some(1));
    let path = tmp.path().join("c.toml");
    fs::write(&path, SMALL).unwrap();
    let out = run(&["run", path.to_str().unwrap(), "--format", "png"], tmp.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in ["forest_repro", "tetris_repro"] {
        let out = run(&["validate", name], &workspace_root());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn run_then_replay_and_parallel_equivalence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let serial = tmp.path().join("serial");
    let parallel = tmp.path().join("parallel");

    let out = run(&["run", cfg.to_str().unwrap(), "--out", serial.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(
        &["run", cfg.to_str().unwrap(), "--out", parallel.to_str().unwrap(), "--parallel", "8"],
        tmp.path(),
    );
    assert!(out.status.success());

    let a = csv_files(&serial.join("small"));
    let b = csv_files(&parallel.join("small"));
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let manifest = serial.join("small/manifest.json");
    let out = run(&["replay", manifest.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // A tampered CSV is caught.
    let (name, _) = &a[0];
    fs::write(serial.join("small").join(name), "episode,mean,lo,hi\n").unwrap();
    let out = run(&["replay", manifest.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replay mismatch"));
}

#[test]
fn trials_override_is_echoed_in_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["run", "forest_repro", "--trials", "2", "--seed", "11", "--format", "csv", "--out", tmp.path().to_str().unwrap()],
        &workspace_root(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("forest_repro/manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["config"]["trials"], 2);
    assert_eq!(manifest["config"]["base_seed"], 11);
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["trials"][1]["seed"], 12);
    assert_eq!(manifest["paired"], true);
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL.replace("trials = 3", "trials = 1")).unwrap();
    let root = tmp.path().join("from_env");
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--format", "svg"])
        .current_dir(tmp.path())
        .env("HYBRID_RL_OUT", &root)
        .output()
        .unwrap();
    assert!(out.status.success());
    let dir = root.join("small");
    assert!(dir.join("manifest.json").exists());
    assert!(csv_files(&dir).is_empty());
    assert!(fs::read_dir(&dir).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "svg")));
}
