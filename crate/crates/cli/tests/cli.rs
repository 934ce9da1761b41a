use std::path::Path;
use std::process::Command;

use ncgft_cli::config::{parse_config, Format, Overrides, RunConfig};

fn ncgft(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ncgft"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_SCAN: &str = r#"
source = [2]
target = [3]
multiplicity = [[1]]

[optimizer]
restarts = 3

[path]
kind = "diagonal"
from = 0.3
to = 0.8
samples = 11
"#;

#[test]
fn k0_example() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.json",
        r#"{"source": [2, 3], "target": [5], "multiplicity": [[1, 1]]}"#,
    );
    let out = ncgft(&["k0", "--config", &cfg, "--vector", "1,2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("(1, 2) -> (3)"));
}

#[test]
fn scan_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL_SCAN);
    let mut csvs = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = ncgft(&[
            "scan",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(std::fs::read(out_dir.join("scan.csv")).unwrap());
        assert!(out_dir.join("summary.json").exists() && out_dir.join("basis.json").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("path_param,lambda_1,V_min,converged,mass_1,"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn scan_detects_the_first_jump_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL_SCAN);
    let out_dir = dir.path().join("out");
    let out = ncgft(&["scan", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    let first = summary["table"][0]["lambda_first"].as_f64().unwrap();
    assert!((first - 0.563).abs() < 0.02, "{first}");
    assert_eq!(summary["metadata"]["config"]["seed"], 0);

    // echoed config re-parses to the same resolved configuration
    let echoed = serde_json::to_string(&summary["metadata"]["config"]).unwrap();
    let parsed = parse_config(&echoed, Format::Json).unwrap();
    let (again, _) = parsed.clone().resolve(&Overrides::default()).unwrap();
    assert_eq!(parsed, again);
    let (original, _) = parse_config(SMALL_SCAN, Format::Toml)
        .unwrap()
        .resolve(&Overrides {
            out: Some(out_dir.clone()),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(parsed, original);
}

#[test]
fn toml_round_trip() {
    let (cfg, _) = RunConfig::default()
        .resolve(&Overrides {
            preset: Some("case4".into()),
            seed: Some(11),
            ..Default::default()
        })
        .unwrap();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(parse_config(&text, Format::Toml).unwrap(), cfg);
}

#[test]
fn unknown_key_fails_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "source = [2]\ntarget = [3]\nmultiplicity = [[1]]\nrestartz = 4\n",
    );
    let out = ncgft(&["basis", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("restartz"));
}

#[test]
fn infeasible_embedding_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"source": [2, 2], "target": [3], "multiplicity": [[1, 1]]}"#,
    );
    let out = ncgft(&["basis", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn unknown_extension_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.yaml", "source: [2]");
    assert!(!ncgft(&["basis", "--config", &cfg]).status.success());
}

#[test]
fn basis_dump_has_labels_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncgft(&[
        "basis",
        "--preset",
        "case1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("basis.json")).unwrap()).unwrap();
    assert_eq!(v["n_idof"], 3);
    assert_eq!(v["n_ndof"], 5);
    assert_eq!(v["class_counts"]["c1"], 4);
    assert_eq!(v["labels"].as_array().unwrap().len(), 8);
}

#[test]
fn masses_at_one_are_sqrt_2m() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncgft(&[
        "masses",
        "--preset",
        "case2",
        "--lambda",
        "1,1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("masses.json")).unwrap()).unwrap();
    let top = &v["clusters"][0];
    assert_eq!(top["degeneracy"], 15);
    assert!((top["mass"].as_f64().unwrap() - 8f64.sqrt()).abs() < 1e-6);
}

#[test]
fn check_passes() {
    let out = ncgft(&["check"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
