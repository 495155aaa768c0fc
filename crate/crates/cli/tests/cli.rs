use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use brpi_core::dynamics::DynamicsConfig;
use brpi_core::experiment::{available_checkpoints, ExperimentConfig, MetagameStage, RunSpec};
use brpi_core::game::GameSpec;
use brpi_core::metagame::Estimation;

fn brpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brpi"))
        .args(args)
        .env_remove("BRPI_WORKERS")
        .output()
        .expect("spawn brpi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        name: "cli".into(),
        seed: 11,
        output_dir: None,
        metric_cadence: None,
        checkpoint_every: None,
        snapshot_every: None,
        runs: vec![RunSpec {
            label: "fp".into(),
            game: GameSpec::blotto(3, 6, 3),
            dynamics: DynamicsConfig::fp(20),
        }],
        metagame: Some(MetagameStage {
            checkpoints: 3,
            estimation: Estimation::Exact { seat: None },
            taus: vec![0.05],
            runs: None,
        }),
    }
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, cfg.canonical_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn full_pipeline_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = brpi(&["run", &config, "--out", out_s, "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("out"));

    for kind in ["convergence", "heatmap", "league", "bars"] {
        let o = brpi(&["plot", out_s, "--kind", kind]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", stderr(&o));
        let files: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
        assert!(!files.is_empty());
        for f in files {
            assert!(Path::new(&f).exists(), "{f}");
        }
    }

    let o = brpi(&["metagame", out_s, "--tau", "0.1", "--tau", "0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(doc["run"], "fp");
    assert_eq!(doc["leagues"].as_array().unwrap().len(), 2);

    let its = available_checkpoints(&out, "fp").unwrap();
    let last = its.last().unwrap().to_string();
    let o = brpi(&[
        "exploit",
        out_s,
        "--checkpoint",
        &last,
        "--episodes",
        "20",
        "--candidates",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(doc["estimate"].is_object(), "{doc}");
}

#[test]
fn invalid_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(
        &path,
        r#"{"name":"x","seed":1,"runs":[{"label":"a","game":{"kind":"builtin","name":"rps"},
            "dynamics":{"algorithm":"fpp","iterations":3}}]}"#,
    )
    .unwrap();
    let o = brpi(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("algorithm"), "{}", stderr(&o));
}

#[test]
fn missing_stage_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = brpi(&["plot", tmp.path().to_str().unwrap(), "--kind", "league"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("available"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(brpi(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(brpi(&["plot", ".", "--kind", "pie"]).status.code(), Some(1));
    assert_eq!(brpi(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &small_config());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("run");
    let o = brpi(&["run", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
