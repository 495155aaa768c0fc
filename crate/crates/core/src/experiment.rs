//! Experiment configs and run directories.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json
//! RUNNING                         present until every stage has finished
//! runs/<label>/trace.csv          written once the run completes
//! runs/<label>/state.json         resumable snapshot of an unfinished run
//! runs/<label>/checkpoints/<d>.json
//! metagame/<label>/table.{csv,json}
//! metagame/<label>/league.json
//! ```
//!
//! Every CSV starts with a `# config_sha256=<hex>` line.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{DynamicsConfig, PolicyKind, RunTrace, Runner, TraceRow};
use crate::error::{Error, Result};
use crate::game::{build_game, Game, GameSpec};
use crate::metagame::{
    build_one_vs_rest_table, exponential_checkpoints, nash_league, sbr_exploit_lower_bound,
    Estimation, ExploitEstimate, MetaGameTable, NashLeague, SeatChoice, DEFAULT_LEAGUE_TAUS,
};
use crate::responses::SbrConfig;
use crate::rng::{derive_seed, Domain};
use crate::strategy::{CheckpointDoc, MixedStrategy, PolicyHistory, ProductProfile};

pub const WORKERS_ENV: &str = "BRPI_WORKERS";
pub const RUNNING_MARKER: &str = "RUNNING";
pub const DEFAULT_SNAPSHOT_EVERY: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    pub game: GameSpec,
    pub dynamics: DynamicsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetagameStage {
    /// Number of exponentially spaced checkpoints per run.
    pub checkpoints: usize,
    #[serde(default = "default_estimation")]
    pub estimation: Estimation,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    /// Labels of runs to evaluate; all runs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<Vec<String>>,
}

fn default_estimation() -> Estimation {
    Estimation::Exact { seat: None }
}

fn default_taus() -> Vec<f64> {
    DEFAULT_LEAGUE_TAUS.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Default cadence for runs that do not set their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_cadence: Option<usize>,
    /// Extra checkpoint files every this many iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    pub runs: Vec<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metagame: Option<MetagameStage>,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label != "."
        && label != ".."
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(
                if path == "." { "config".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !valid_label(&self.name) {
            return Err(invalid(
                "name",
                "must be nonempty and use only [A-Za-z0-9_.-]",
            ));
        }
        if self.runs.is_empty() {
            return Err(invalid("runs", "need at least one run"));
        }
        for (field, v) in [
            ("metric_cadence", self.metric_cadence),
            ("checkpoint_every", self.checkpoint_every),
            ("snapshot_every", self.snapshot_every),
        ] {
            if v == Some(0) {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, run) in self.runs.iter().enumerate() {
            if !valid_label(&run.label) {
                return Err(invalid(
                    format!("runs[{i}].label"),
                    "must be nonempty and use only [A-Za-z0-9_.-]",
                ));
            }
            if !seen.insert(run.label.as_str()) {
                return Err(invalid(
                    format!("runs[{i}].label"),
                    format!("duplicate label `{}`", run.label),
                ));
            }
            run.dynamics.validate(&format!("runs[{i}].dynamics"))?;
            build_game(&run.game).map_err(|e| invalid(format!("runs[{i}].game"), e.to_string()))?;
        }
        if let Some(stage) = &self.metagame {
            if stage.checkpoints == 0 {
                return Err(invalid("metagame.checkpoints", "must be at least 1"));
            }
            if stage.taus.is_empty() || stage.taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(invalid(
                    "metagame.taus",
                    "need positive finite temperatures",
                ));
            }
            if let Estimation::MonteCarlo { samples, .. } = stage.estimation {
                if samples < 2 {
                    return Err(invalid("metagame.estimation.samples", "need at least 2"));
                }
            }
            if let Some(labels) = &stage.runs {
                for (j, l) in labels.iter().enumerate() {
                    if !seen.contains(l.as_str()) {
                        return Err(invalid(
                            format!("metagame.runs[{j}]"),
                            format!("no run labelled `{l}`"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// The dynamics config of run `index` with seed and cadence resolved.
    pub fn resolved_dynamics(&self, index: usize) -> DynamicsConfig {
        let mut d = self.runs[index].dynamics.clone();
        if d.seed.is_none() {
            d.seed = Some(derive_seed(self.seed, Domain::Dynamics, &[index as u64]));
        }
        if d.metric_cadence.is_none() {
            d.metric_cadence = self.metric_cadence;
        }
        d
    }

    pub fn run_index(&self, label: &str) -> Result<usize> {
        self.runs
            .iter()
            .position(|r| r.label == label)
            .ok_or_else(|| invalid("run", format!("no run labelled `{label}`")))
    }

    /// Iterations at which run `index` writes checkpoint files.
    pub fn checkpoint_iterations(&self, index: usize) -> BTreeSet<usize> {
        let last = self.runs[index].dynamics.iterations;
        let mut out: BTreeSet<usize> = [0, last].into_iter().collect();
        if let Some(stage) = &self.metagame {
            out.extend(exponential_checkpoints(last, stage.checkpoints));
        }
        if let Some(k) = self.checkpoint_every {
            out.extend((0..=last).step_by(k));
        }
        out
    }
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn hash_line(hash: &str) -> String {
    format!("# config_sha256={hash}\n")
}

pub fn run_dir(dir: &Path, label: &str) -> PathBuf {
    dir.join("runs").join(label)
}

pub fn trace_path(dir: &Path, label: &str) -> PathBuf {
    run_dir(dir, label).join("trace.csv")
}

pub fn checkpoint_path(dir: &Path, label: &str, iteration: usize) -> PathBuf {
    run_dir(dir, label)
        .join("checkpoints")
        .join(format!("{iteration:08}.json"))
}

fn state_path(dir: &Path, label: &str) -> PathBuf {
    run_dir(dir, label).join("state.json")
}

pub fn metagame_dir(dir: &Path, label: &str) -> PathBuf {
    dir.join("metagame").join(label)
}

#[derive(Serialize, Deserialize)]
struct RunState {
    config_hash: String,
    wall_ms: u64,
    rows: Vec<TraceRow>,
    history: PolicyHistory,
}

/// Knobs that do not change results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop each run after this many new iterations, leaving it resumable.
    pub stop_after: Option<usize>,
    /// Thread count; falls back to `BRPI_WORKERS`, then all cores.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub dir: PathBuf,
    pub complete: bool,
    pub config_hash: String,
}

pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid(
                WORKERS_ENV,
                format!("`{v}` is not a positive integer"),
            )),
        },
        Err(_) => Ok(None),
    }
}

/// Reads `config.json` from a run directory.
pub fn load_config(dir: &Path) -> Result<ExperimentConfig> {
    let path = dir.join("config.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Malformed {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    ExperimentConfig::from_json(&text).map_err(|e| Error::Malformed {
        path,
        reason: e.to_string(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<ExperimentSummary> {
    run_experiment_with(cfg, dir, &RunOptions::default())
}

/// Runs every configured stage, resuming whatever an earlier attempt left behind.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    dir: Option<&Path>,
    opts: &RunOptions,
) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dir = match dir {
        Some(d) => d.to_path_buf(),
        None => cfg
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.name)),
    };
    let hash = cfg.hash();
    if dir.join("config.json").exists() {
        let existing = load_config(&dir)?;
        if existing.hash() != hash {
            return Err(invalid(
                "output_dir",
                format!("{} holds a different experiment", dir.display()),
            ));
        }
    }
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join(RUNNING_MARKER), hash.as_bytes())?;
    write_atomic(&dir.join("config.json"), cfg.canonical_json().as_bytes())?;

    let workers = match opts.workers {
        Some(w) => Some(w),
        None => workers_from_env()?,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(WORKERS_ENV, e.to_string()))?;
    let finished: Vec<bool> = pool.install(|| {
        (0..cfg.runs.len())
            .into_par_iter()
            .map(|i| execute_run(cfg, i, &dir, &hash, opts.stop_after))
            .collect::<Result<Vec<bool>>>()
    })?;
    let complete = finished.iter().all(|&f| f);
    if complete {
        if let Some(stage) = &cfg.metagame {
            for (i, run) in cfg.runs.iter().enumerate() {
                if stage.runs.as_ref().is_none_or(|l| l.contains(&run.label)) {
                    let iters = exponential_checkpoints(run.dynamics.iterations, stage.checkpoints);
                    let table = pool.install(|| {
                        build_run_table(cfg, i, &dir, &iters, stage.estimation.clone())
                    })?;
                    write_metagame(&dir, &run.label, &hash, &iters, &table, &stage.taus)?;
                }
            }
        }
        fs::remove_file(dir.join(RUNNING_MARKER))?;
    }
    Ok(ExperimentSummary {
        dir,
        complete,
        config_hash: hash,
    })
}

fn checkpoint_doc(game: &Game, runner: &Runner, kind: PolicyKind, hash: &str) -> CheckpointDoc {
    let mut doc = match kind {
        PolicyKind::Current => {
            CheckpointDoc::from_device(game, runner.iteration(), runner.current())
        }
        PolicyKind::Average => CheckpointDoc {
            iteration: runner.iteration(),
            players: runner
                .accumulator()
                .average_marginals()
                .strategies()
                .to_vec(),
            device: None,
            config_hash: None,
        },
    };
    doc.config_hash = Some(hash.to_string());
    doc
}

fn write_checkpoint(path: &Path, doc: &CheckpointDoc) -> Result<()> {
    write_atomic(path, serde_json::to_string(doc)?.as_bytes())
}

/// Returns whether the run reached its final iteration.
fn execute_run(
    cfg: &ExperimentConfig,
    index: usize,
    dir: &Path,
    hash: &str,
    stop_after: Option<usize>,
) -> Result<bool> {
    let spec = &cfg.runs[index];
    let label = &spec.label;
    if trace_path(dir, label).exists() {
        return Ok(true);
    }
    let game = build_game(&spec.game)?;
    let dyn_cfg = cfg.resolved_dynamics(index);
    let kind = dyn_cfg.policy_kind();
    let (mut runner, mut trace) = match fs::read_to_string(state_path(dir, label)) {
        Ok(text) => {
            let state: RunState = serde_json::from_str(&text).map_err(|e| Error::Malformed {
                path: state_path(dir, label),
                reason: e.to_string(),
            })?;
            if state.config_hash != hash {
                return Err(Error::Malformed {
                    path: state_path(dir, label),
                    reason: "snapshot belongs to a different config".into(),
                });
            }
            let runner = Runner::resume(&game, dyn_cfg, state.history, state.wall_ms)?;
            (runner, RunTrace { rows: state.rows })
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            (Runner::new(&game, dyn_cfg)?, RunTrace::default())
        }
        Err(e) => return Err(e.into()),
    };
    let saves = cfg.checkpoint_iterations(index);
    let snapshot_every = cfg.snapshot_every.unwrap_or(DEFAULT_SNAPSHOT_EVERY);
    if runner.iteration() == 0 {
        write_checkpoint(
            &checkpoint_path(dir, label, 0),
            &checkpoint_doc(&game, &runner, kind, hash),
        )?;
    }
    let mut taken = 0;
    while !runner.is_done() {
        if stop_after.is_some_and(|s| taken >= s) {
            save_state(dir, label, hash, &runner, &trace)?;
            return Ok(false);
        }
        if let Some(row) = runner.step() {
            trace.rows.push(row);
        }
        taken += 1;
        let t = runner.iteration();
        if saves.contains(&t) {
            write_checkpoint(
                &checkpoint_path(dir, label, t),
                &checkpoint_doc(&game, &runner, kind, hash),
            )?;
        }
        if t % snapshot_every == 0 && !runner.is_done() {
            save_state(dir, label, hash, &runner, &trace)?;
        }
    }
    let mut body = hash_line(hash);
    body.push_str(&trace.to_csv_string(game.num_players()));
    write_atomic(&trace_path(dir, label), body.as_bytes())?;
    match fs::remove_file(state_path(dir, label)) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
        _ => {}
    }
    Ok(true)
}

fn save_state(
    dir: &Path,
    label: &str,
    hash: &str,
    runner: &Runner,
    trace: &RunTrace,
) -> Result<()> {
    let state = RunState {
        config_hash: hash.to_string(),
        wall_ms: runner.wall_ms(),
        rows: trace.rows.clone(),
        history: runner.history().clone(),
    };
    write_atomic(
        &state_path(dir, label),
        serde_json::to_string(&state)?.as_bytes(),
    )
}

pub fn read_trace(dir: &Path, label: &str) -> Result<RunTrace> {
    let path = trace_path(dir, label);
    let file = fs::File::open(&path).map_err(|e| Error::Malformed {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    RunTrace::read_csv(file).map_err(|e| match e {
        Error::Malformed { reason, .. } => Error::Malformed { path, reason },
        other => other,
    })
}

pub fn read_checkpoint(dir: &Path, label: &str, iteration: usize) -> Result<CheckpointDoc> {
    let path = checkpoint_path(dir, label, iteration);
    let text = fs::read_to_string(&path).map_err(|e| Error::Malformed {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    CheckpointDoc::from_json(&text).map_err(|e| Error::Malformed {
        path,
        reason: e.to_string(),
    })
}

/// Iterations with a checkpoint file on disk, ascending.
pub fn available_checkpoints(dir: &Path, label: &str) -> Result<Vec<usize>> {
    let cdir = run_dir(dir, label).join("checkpoints");
    let mut out = Vec::new();
    for entry in fs::read_dir(&cdir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(".json") {
            if let Ok(d) = stem.parse::<usize>() {
                out.push(d);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// The strategy an agent from this checkpoint plays in any seat.
pub fn agent_strategy(doc: &CheckpointDoc) -> Result<MixedStrategy> {
    doc.profile().seat_average()
}

fn build_run_table(
    cfg: &ExperimentConfig,
    index: usize,
    dir: &Path,
    iters: &[usize],
    estimation: Estimation,
) -> Result<MetaGameTable> {
    let label = &cfg.runs[index].label;
    let game = build_game(&cfg.runs[index].game)?;
    let strategies = iters
        .iter()
        .map(|&d| agent_strategy(&read_checkpoint(dir, label, d)?))
        .collect::<Result<Vec<_>>>()?;
    build_one_vs_rest_table(&game, &strategies, estimation)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeagueDoc {
    pub config_sha256: String,
    pub checkpoints: Vec<usize>,
    pub leagues: Vec<NashLeague>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub config_sha256: String,
    pub checkpoints: Vec<usize>,
    pub table: MetaGameTable,
}

fn write_metagame(
    dir: &Path,
    label: &str,
    hash: &str,
    iters: &[usize],
    table: &MetaGameTable,
    taus: &[f64],
) -> Result<LeagueDoc> {
    let mdir = metagame_dir(dir, label);
    let mut csv = hash_line(hash);
    csv.push_str(&table.to_csv_string());
    write_atomic(&mdir.join("table.csv"), csv.as_bytes())?;
    let tdoc = TableDoc {
        config_sha256: hash.to_string(),
        checkpoints: iters.to_vec(),
        table: table.clone(),
    };
    write_atomic(
        &mdir.join("table.json"),
        serde_json::to_string_pretty(&tdoc)?.as_bytes(),
    )?;
    write_leagues(dir, label, &tdoc, taus)
}

fn write_leagues(dir: &Path, label: &str, tdoc: &TableDoc, taus: &[f64]) -> Result<LeagueDoc> {
    let leagues = taus
        .iter()
        .map(|&tau| nash_league(&tdoc.table, tau))
        .collect::<Result<Vec<_>>>()?;
    let doc = LeagueDoc {
        config_sha256: tdoc.config_sha256.clone(),
        checkpoints: tdoc.checkpoints.clone(),
        leagues,
    };
    write_atomic(
        &metagame_dir(dir, label).join("league.json"),
        serde_json::to_string_pretty(&doc)?.as_bytes(),
    )?;
    Ok(doc)
}

pub fn read_table(dir: &Path, label: &str) -> Result<TableDoc> {
    let path = metagame_dir(dir, label).join("table.json");
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path,
        reason: e.to_string(),
    })
}

pub fn read_league(dir: &Path, label: &str) -> Result<LeagueDoc> {
    let path = metagame_dir(dir, label).join("league.json");
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path,
        reason: e.to_string(),
    })
}

/// Recomputes leagues at the given temperatures, building the table first if
/// the run directory has none.
pub fn rerun_metagame(
    dir: &Path,
    label: Option<&str>,
    taus: &[f64],
    checkpoints: Option<usize>,
) -> Result<Vec<(String, LeagueDoc)>> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(invalid("tau", "need positive finite temperatures"));
    }
    let cfg = load_config(dir)?;
    let labels: Vec<usize> = match label {
        Some(l) => vec![cfg.run_index(l)?],
        None => (0..cfg.runs.len())
            .filter(|&i| trace_path(dir, &cfg.runs[i].label).exists())
            .collect(),
    };
    if labels.is_empty() {
        return Err(missing_stage(dir, "runs"));
    }
    let hash = cfg.hash();
    let mut out = Vec::new();
    for i in labels {
        let label = &cfg.runs[i].label;
        let tdoc = match (read_table(dir, label), checkpoints) {
            (Ok(t), None) => t,
            _ => {
                let on_disk = available_checkpoints(dir, label)?;
                let k = checkpoints
                    .or(cfg.metagame.as_ref().map(|s| s.checkpoints))
                    .unwrap_or(on_disk.len());
                let iters = select_spread(&on_disk, k);
                let estimation = cfg
                    .metagame
                    .as_ref()
                    .map(|s| s.estimation.clone())
                    .unwrap_or_else(default_estimation);
                let table = build_run_table(&cfg, i, dir, &iters, estimation)?;
                write_metagame(dir, label, &hash, &iters, &table, taus)?;
                read_table(dir, label)?
            }
        };
        out.push((label.clone(), write_leagues(dir, label, &tdoc, taus)?));
    }
    Ok(out)
}

/// Picks `k` of the available iterations nearest to exponential spacing.
fn select_spread(available: &[usize], k: usize) -> Vec<usize> {
    if k >= available.len() {
        return available.to_vec();
    }
    let last = *available.last().expect("nonempty");
    let mut out: Vec<usize> = Vec::new();
    for target in exponential_checkpoints(last, k) {
        let best = available
            .iter()
            .copied()
            .filter(|d| !out.contains(d))
            .min_by_key(|&d| d.abs_diff(target));
        if let Some(b) = best {
            out.push(b);
        }
    }
    out.sort_unstable();
    out
}

/// Stage names present in a run directory.
pub fn available_stages(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    if dir.join("config.json").exists() {
        out.push("config".to_string());
    }
    let has = |sub: &str, file: &str| {
        fs::read_dir(dir.join(sub))
            .map(|it| it.flatten().any(|e| e.path().join(file).exists()))
            .unwrap_or(false)
    };
    if has("runs", "trace.csv") {
        out.push("runs".into());
    }
    if has("metagame", "table.json") {
        out.push("metagame".into());
    }
    out
}

pub fn missing_stage(dir: &Path, requested: &str) -> Error {
    Error::MissingStage {
        requested: requested.to_string(),
        dir: dir.to_path_buf(),
        available: available_stages(dir).join(", "),
    }
}

/// SBR exploitability estimate of a stored checkpoint.
pub fn exploit_checkpoint(
    dir: &Path,
    label: Option<&str>,
    iteration: usize,
    exploiter: &SbrConfig,
    episodes: usize,
    seed: u64,
) -> Result<(String, ExploitEstimate)> {
    let cfg = load_config(dir)?;
    let index = match label {
        Some(l) => cfg.run_index(l)?,
        None => 0,
    };
    let label = cfg.runs[index].label.clone();
    let game = build_game(&cfg.runs[index].game)?;
    let doc = read_checkpoint(dir, &label, iteration)?;
    let target = if game.is_symmetric() {
        ProductProfile::symmetric(&agent_strategy(&doc)?, game.num_players())
    } else {
        doc.profile()
    };
    let est = sbr_exploit_lower_bound(
        &game,
        &target,
        exploiter,
        episodes,
        SeatChoice::Random,
        seed,
    )?;
    write_atomic(
        &dir.join("exploit")
            .join(format!("{label}_{iteration:08}.json")),
        serde_json::to_string_pretty(&est)?.as_bytes(),
    )?;
    Ok((label, est))
}
