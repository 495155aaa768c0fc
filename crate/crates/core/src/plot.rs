//! Tidy CSV emission for external plotting tools.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Algorithm, RunTrace};
use crate::error::{Error, Result};
use crate::experiment::{
    load_config, metagame_dir, missing_stage, read_league, read_table, read_trace, trace_path,
    write_atomic, ExperimentConfig,
};

/// Fraction of trailing rows averaged for plateau values.
pub const PLATEAU_FRACTION: f64 = 0.2;
pub const PLATEAU_MIN_SAMPLES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Convergence,
    Heatmap,
    League,
    Bars,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::Convergence,
        PlotKind::Heatmap,
        PlotKind::League,
        PlotKind::Bars,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Convergence => "convergence",
            PlotKind::Heatmap => "heatmap",
            PlotKind::League => "league",
            PlotKind::Bars => "bars",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig {
                field: "kind".into(),
                reason: format!(
                    "unknown plot kind `{s}`; expected convergence, heatmap, league or bars"
                ),
            })
    }
}

/// Trailing mean of `values` over the last 20% of rows, at least 50 rows
/// (or all of them when fewer exist).
pub fn plateau_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let window = plateau_window(values.len());
    let tail = &values[values.len() - window..];
    Some(tail.iter().sum::<f64>() / window as f64)
}

pub fn plateau_window(rows: usize) -> usize {
    ((rows as f64 * PLATEAU_FRACTION).ceil() as usize)
        .max(PLATEAU_MIN_SAMPLES)
        .min(rows)
}

/// Name of the response scheme a run uses, as shown in bar charts.
pub fn scheme_name(cfg: &ExperimentConfig, index: usize) -> String {
    let d = &cfg.runs[index].dynamics;
    match (d.algorithm, &d.sbr) {
        (Algorithm::Brpi, Some(sbr)) => sbr.candidates.name().to_string(),
        (alg, _) => alg.name().to_string(),
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("memory write");
    for r in rows {
        w.write_record(&r).expect("memory write");
    }
    String::from_utf8(w.into_inner().expect("memory write")).expect("utf8")
}

fn convergence_rows(trace: &RunTrace) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for r in &trace.rows {
        let mut push = |metric: String, v: f64| {
            out.push(vec![
                r.iteration.to_string(),
                r.wall_ms.to_string(),
                metric,
                v.to_string(),
            ]);
        };
        push("nashconv".into(), r.nashconv);
        push("ccedist".into(), r.ccedist);
        for (i, e) in r.eps.iter().enumerate() {
            push(format!("eps_{i}"), *e);
        }
    }
    out
}

/// Writes plot-ready CSVs under `<dir>/plots` and returns their paths.
pub fn emit_plot_data(dir: &Path, kind: PlotKind) -> Result<Vec<PathBuf>> {
    let cfg = load_config(dir).map_err(|_| missing_stage(dir, "config"))?;
    let out_dir = dir.join("plots");
    let hash = cfg.hash();
    let emit = |path: &Path, body: &str| {
        write_atomic(path, format!("# config_sha256={hash}\n{body}").as_bytes())
    };
    let mut written = Vec::new();
    let finished: Vec<usize> = (0..cfg.runs.len())
        .filter(|&i| trace_path(dir, &cfg.runs[i].label).exists())
        .collect();
    let with_metagame: Vec<usize> = (0..cfg.runs.len())
        .filter(|&i| {
            metagame_dir(dir, &cfg.runs[i].label)
                .join("table.json")
                .exists()
        })
        .collect();
    match kind {
        PlotKind::Convergence | PlotKind::Bars if finished.is_empty() => {
            return Err(missing_stage(dir, "runs"))
        }
        PlotKind::Heatmap | PlotKind::League if with_metagame.is_empty() => {
            return Err(missing_stage(dir, "metagame"))
        }
        _ => {}
    }
    match kind {
        PlotKind::Convergence => {
            for &i in &finished {
                let label = &cfg.runs[i].label;
                let trace = read_trace(dir, label)?;
                let path = out_dir.join(format!("convergence_{label}.csv"));
                let body = csv_string(
                    &["iteration", "wall_ms", "metric", "value"],
                    convergence_rows(&trace),
                );
                emit(&path, &body)?;
                written.push(path);
            }
        }
        PlotKind::Heatmap => {
            for &i in &with_metagame {
                let label = &cfg.runs[i].label;
                let doc = read_table(dir, label)?;
                let its = &doc.checkpoints;
                let has_se = doc.table.stderr.is_some();
                let mut header = vec!["row", "col", "row_iteration", "col_iteration", "value"];
                if has_se {
                    header.push("stderr");
                }
                let mut rows = Vec::new();
                for (r, row) in doc.table.values.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        let mut rec = vec![
                            r.to_string(),
                            c.to_string(),
                            its[r].to_string(),
                            its[c].to_string(),
                            v.to_string(),
                        ];
                        if let Some(se) = &doc.table.stderr {
                            rec.push(se[r][c].to_string());
                        }
                        rows.push(rec);
                    }
                }
                let path = out_dir.join(format!("heatmap_{label}.csv"));
                emit(&path, &csv_string(&header, rows))?;
                written.push(path);
            }
        }
        PlotKind::League => {
            for &i in &with_metagame {
                let label = &cfg.runs[i].label;
                let doc = read_league(dir, label)?;
                for league in &doc.leagues {
                    let path = out_dir.join(format!("league_{label}_tau{}.csv", league.tau));
                    emit(&path, &league.to_csv_string())?;
                    written.push(path);
                }
            }
        }
        PlotKind::Bars => {
            let mut groups: BTreeMap<(String, String), Vec<(f64, usize)>> = BTreeMap::new();
            for &i in &finished {
                let trace = read_trace(dir, &cfg.runs[i].label)?;
                let series: Vec<f64> = trace.rows.iter().map(|r| r.ccedist).collect();
                if let Some(p) = plateau_mean(&series) {
                    groups
                        .entry((cfg.runs[i].game.label(), scheme_name(&cfg, i)))
                        .or_default()
                        .push((p, plateau_window(series.len())));
                }
            }
            let rows = groups.into_iter().map(|((game, scheme), vals)| {
                let mean = vals.iter().map(|v| v.0).sum::<f64>() / vals.len() as f64;
                let window = vals.iter().map(|v| v.1).min().unwrap_or(0);
                vec![
                    game,
                    scheme,
                    mean.to_string(),
                    vals.len().to_string(),
                    window.to_string(),
                ]
            });
            let path = out_dir.join("bars.csv");
            let body = csv_string(
                &["game", "scheme", "plateau_ccedist", "runs", "window"],
                rows,
            );
            emit(&path, &body)?;
            written.push(path);
        }
    }
    Ok(written)
}
