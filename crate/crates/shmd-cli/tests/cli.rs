//! End-to-end exercises of the shmd binary: exit codes, artifact and
//! manifest layout, flag overrides, and the repro drift check. Sized to
//! run in seconds, not to reproduce the benchmark numbers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn shmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shmd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A deliberately small run: every stage finishes in well under a
/// second while still producing both classes in every fold.
const SMALL_CONFIG: &str = r#"
master_seed = 11
repetitions = 2

[corpus]
n_malware = 24
n_benign = 24
n_families = 2
windows_per_program_range = [3, 5]
counts_per_window = 1000
class_separation = 1.2

[train]
epochs = 4

[faults]
rates = [0.0, 0.5]

[attack]
epsilon = 0.05

[attack.proxy]
max_windows = 40

[attack.proxy.train]
epochs = 3
"#;

fn setup(dir: &Path) -> (PathBuf, PathBuf) {
    let config = dir.join("run.toml");
    fs::write(&config, SMALL_CONFIG).unwrap();
    (config, dir.join("out"))
}

fn run_ok(config: &Path, out: &Path, subcommand: &str) {
    let r = shmd(&[
        subcommand,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{subcommand}: {}", stderr(&r));
}

fn manifest_json(out: &Path, name: &str) -> serde_json::Value {
    let text = fs::read_to_string(out.join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn pipeline_produces_artifacts_and_honest_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = setup(dir.path());

    for sub in ["gen-data", "train", "attack", "sweep", "pac"] {
        run_ok(&config, &out, sub);
    }

    for f in [
        "corpus.json",
        "model.json",
        "proxy.json",
        "evasive_set.json",
        "sweep_long.csv",
        "sweep_summary.csv",
        "sweep_tradeoff.csv",
        "pac_bounds.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    // Every manifest entry must hash to the bytes actually on disk.
    for m in [
        "gen_data_manifest.json",
        "train_manifest.json",
        "attack_manifest.json",
        "sweep_manifest.json",
        "pac_manifest.json",
    ] {
        let v = manifest_json(&out, m);
        let artifacts = v["artifacts"].as_array().unwrap();
        assert!(!artifacts.is_empty(), "{m} lists nothing");
        for a in artifacts {
            let path = out.join(a["path"].as_str().unwrap());
            let actual = sha256_hex(&fs::read(&path).unwrap());
            assert_eq!(a["sha256"].as_str().unwrap(), actual, "{m}: {}", path.display());
        }
        assert_eq!(v["master_seed"].as_u64().unwrap(), 11);
        assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    }

    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert!(summary.starts_with("fault_rate,metric,mean,std"));
    let bounds = fs::read_to_string(out.join("pac_bounds.csv")).unwrap();
    assert!(bounds.starts_with("fault_rate,lower,upper,proxy_error"));
    assert_eq!(bounds.lines().count(), 3, "one row per swept rate");
}

#[test]
fn missing_upstream_artifacts_name_the_producing_command() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = setup(dir.path());

    let r = shmd(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("shmd gen-data"), "{}", stderr(&r));

    run_ok(&config, &out, "gen-data");
    let r = shmd(&[
        "pac",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("shmd train"), "{}", stderr(&r));
}

#[test]
fn config_problems_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let r = shmd(&["gen-data", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&r), 1);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "master_sead = 3\n").unwrap();
    let r = shmd(&["gen-data", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("master_sead"), "{}", stderr(&r));

    let unsorted = dir.path().join("grid.toml");
    fs::write(&unsorted, "[faults]\nrates = [0.5, 0.1]\n").unwrap();
    let r = shmd(&["gen-data", "--config", unsorted.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("ascending"), "{}", stderr(&r));

    let r = shmd(&["gen-data"]);
    assert_eq!(code(&r), 1, "missing --config is a usage error");
}

#[test]
fn seed_override_changes_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = setup(dir.path());

    let run = |seed: &str, out: &Path| {
        let r = shmd(&[
            "gen-data",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        manifest_json(out, "gen_data_manifest.json")["artifacts"][0]["sha256"]
            .as_str()
            .unwrap()
            .to_owned()
    };
    let a = run("1", &out.join("a"));
    let b = run("2", &out.join("b"));
    let a_again = run("1", &out.join("c"));
    assert_ne!(a, b);
    assert_eq!(a, a_again);
}

#[test]
fn scenario_and_rates_overrides_reach_the_attack() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = setup(dir.path());
    run_ok(&config, &out, "gen-data");
    run_ok(&config, &out, "train");

    let run_attack = |extra: &[&str], out_dir: &Path| {
        let mut args = vec![
            "attack",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let r = shmd(&args);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        fs::read(out_dir.join("proxy.json")).unwrap()
    };
    // Upstream artifacts are shared; only the attack reruns.
    let base = run_attack(&[], &out);
    let scenario = run_attack(&["--scenario", "victim_data"], &out);
    assert_ne!(base, scenario, "scenario changes the proxy's training data");

    let r = shmd(&[
        "attack",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--scenario",
        "sideways",
    ]);
    assert_eq!(code(&r), 1, "unknown scenario is a usage error");
}

#[test]
fn repro_is_byte_identical_and_detects_drift() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = setup(dir.path());

    run_ok(&config, &out, "repro");
    let tables: Vec<PathBuf> = ["sweep_long.csv", "sweep_summary.csv", "sweep_tradeoff.csv", "pac_bounds.csv"]
        .iter()
        .map(|f| out.join(f))
        .collect();
    let first: Vec<Vec<u8>> = tables.iter().map(|p| fs::read(p).unwrap()).collect();

    // Second run with the same config must regenerate identical bytes
    // and pass its own comparison against the recorded manifest.
    run_ok(&config, &out, "repro");
    let second: Vec<Vec<u8>> = tables.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(first, second);

    // Simulate drift by corrupting a recorded hash: the next run must
    // refuse with the acceptance exit code.
    let manifest_path = out.join("repro_manifest.json");
    let text = fs::read_to_string(&manifest_path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["artifacts"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    fs::write(&manifest_path, serde_json::to_string_pretty(&v).unwrap()).unwrap();

    let r = shmd(&[
        "repro",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    assert!(stderr(&r).contains("drifted"), "{}", stderr(&r));

    // A different config hash must not be compared against the stale
    // manifest: changing the seed starts a fresh reproducibility line.
    let r = shmd(&[
        "repro",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "12",
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
}
