//! Fuzz target bodies, shared by the libFuzzer binaries and the corpus replay test.
//!
//! Each function must never panic on arbitrary input and reports whether the
//! input was accepted. Inputs that parse are
//! re-serialized and parsed again; the second serialization must match the first.

use brpi_core::dynamics::{DynamicsConfig, RunTrace};
use brpi_core::experiment::ExperimentConfig;
use brpi_core::game::{build_game_with, GameOptions, GameSpec};
use brpi_core::plot::PlotKind;
use brpi_core::responses::SbrConfig;
use brpi_core::strategy::{CheckpointDoc, CorrelationDevice};
use serde::de::DeserializeOwned;
use serde::Serialize;

const SMALL: GameOptions = GameOptions {
    action_cap: 4096,
    dense_cap: 1 << 16,
};

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

fn reserialize_stable<T: Serialize + DeserializeOwned>(value: &T) {
    let first = serde_json::to_string(value).expect("serializable");
    let back: T = serde_json::from_str(&first).expect("own output parses");
    let second = serde_json::to_string(&back).expect("serializable");
    assert_eq!(first, second);
}

pub fn game_spec(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(spec) = GameSpec::from_json(s) else {
        return false;
    };
    reserialize_stable(&spec);
    if let Ok(game) = build_game_with(&spec, SMALL) {
        let mut a = vec![0; game.num_players()];
        let mut r = vec![0.0; game.num_players()];
        let last = game.joint_actions() - 1;
        game.decode(last, &mut a);
        game.payoffs(last, &mut r);
        assert!(a.iter().zip(game.action_counts()).all(|(x, k)| x < k));
    }
    true
}

pub fn sbr_config(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(cfg) = serde_json::from_str::<SbrConfig>(s) else {
        return false;
    };
    let _ = cfg.validate();
    reserialize_stable(&cfg);
    true
}

pub fn dynamics_config(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(cfg) = serde_json::from_str::<DynamicsConfig>(s) else {
        return false;
    };
    let _ = cfg.validate("dynamics");
    reserialize_stable(&cfg);
    true
}

pub fn experiment_config(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(cfg) = ExperimentConfig::from_json(s) else {
        return false;
    };
    let canonical = cfg.canonical_json();
    let back = ExperimentConfig::from_json(&canonical).expect("canonical form parses");
    assert_eq!(canonical, back.canonical_json());
    assert_eq!(cfg.hash(), back.hash());
    true
}

pub fn checkpoint(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(doc) = CheckpointDoc::from_json(s) else {
        return false;
    };
    let device = doc.to_device();
    assert_eq!(device.num_players(), doc.players.len());
    reserialize_stable(&doc);
    true
}

pub fn device(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(device) = serde_json::from_str::<CorrelationDevice>(s) else {
        return false;
    };
    let total: f64 = device.components().iter().map(|c| c.0).sum();
    assert!((total - 1.0).abs() <= 1e-9);
    reserialize_stable(&device);
    true
}

pub fn trace_csv(data: &[u8]) -> bool {
    let Ok(trace) = RunTrace::read_csv(data) else {
        return false;
    };
    let players = trace.rows.first().map_or(0, |r| r.eps.len());
    if players > 0 {
        let first = trace.to_csv_string(players);
        let back = RunTrace::read_csv(first.as_bytes()).expect("own output parses");
        assert_eq!(first, back.to_csv_string(players));
    }
    true
}

pub fn plot_kind(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    match s.parse::<PlotKind>() {
        Ok(kind) => {
            assert_eq!(kind.name(), s);
            true
        }
        Err(_) => false,
    }
}
