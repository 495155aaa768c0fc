//! Checkpoint evaluation: one-vs-rest tables, Nash leagues, SBR exploitability
//! lower bounds and Wilson intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::qre::{qre_solve, QreConfig};
use crate::responses::{sampled_best_response_traced, CandidatePool, CandidateSource, SbrConfig};
use crate::rng::{stream, Domain};
use crate::strategy::{JointPolicy, MixedStrategy, ProductProfile};

pub const DEFAULT_LEAGUE_TAUS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimation {
    Exact {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seat: Option<usize>,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

/// Row agent in one seat against the column agent in every other seat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaGameTable {
    pub values: Vec<Vec<f64>>,
    /// Standard errors of Monte-Carlo cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<Vec<f64>>>,
    pub estimation: Estimation,
}

impl MetaGameTable {
    pub fn size(&self) -> usize {
        self.values.len()
    }

    /// The table over the first `k` checkpoints.
    pub fn prefix(&self, k: usize) -> MetaGameTable {
        MetaGameTable {
            values: self.values[..k].iter().map(|r| r[..k].to_vec()).collect(),
            stderr: self
                .stderr
                .as_ref()
                .map(|s| s[..k].iter().map(|r| r[..k].to_vec()).collect()),
            estimation: self.estimation.clone(),
        }
    }

    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        let k = values.len();
        if k == 0 || values.iter().any(|r| r.len() != k) {
            return Err(Error::param("table", "must be square and nonempty"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("table", "entries must be finite"));
        }
        Ok(MetaGameTable {
            values,
            stderr: None,
            estimation: Estimation::Exact { seat: None },
        })
    }

    /// Tidy CSV: `row,col,value[,stderr]`.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row", "col", "value"];
        if self.stderr.is_some() {
            header.push("stderr");
        }
        w.write_record(&header).expect("memory write");
        for (r, row) in self.values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let mut rec = vec![r.to_string(), c.to_string(), v.to_string()];
                if let Some(se) = &self.stderr {
                    rec.push(se[r][c].to_string());
                }
                w.write_record(&rec).expect("memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("memory write")).expect("ascii")
    }
}

fn check_seat_strategies(game: &Game, seat: usize, strategies: &[MixedStrategy]) -> Result<()> {
    for (k, s) in strategies.iter().enumerate() {
        for p in 0..game.num_players() {
            if s.len() != game.num_actions(p) {
                return Err(Error::InvalidStrategy(format!(
                    "checkpoint {k} has {} entries but seat {p} has {} actions",
                    s.len(),
                    game.num_actions(p)
                )));
            }
        }
    }
    if seat >= game.num_players() {
        return Err(Error::param("seat", format!("{seat} out of range")));
    }
    Ok(())
}

/// One-vs-rest payoff table between checkpoint strategies.
pub fn build_one_vs_rest_table(
    game: &Game,
    strategies: &[MixedStrategy],
    estimation: Estimation,
) -> Result<MetaGameTable> {
    if strategies.is_empty() {
        return Err(Error::param("checkpoints", "need at least one"));
    }
    let n = game.num_players();
    let k = strategies.len();
    match estimation {
        Estimation::Exact { seat } => {
            let seat = match seat {
                Some(s) => s,
                None if game.is_symmetric() => 0,
                None => return Err(Error::AsymmetricGame),
            };
            check_seat_strategies(game, seat, strategies)?;
            let columns: Vec<Vec<f64>> = strategies
                .par_iter()
                .map(|col| {
                    let dev = ProductProfile::symmetric(col, n).deviation_values(game, seat);
                    strategies.iter().map(|row| row.dot(&dev)).collect()
                })
                .collect();
            let values = (0..k)
                .map(|r| (0..k).map(|c| columns[c][r]).collect())
                .collect();
            Ok(MetaGameTable {
                values,
                stderr: None,
                estimation: Estimation::Exact { seat: Some(seat) },
            })
        }
        Estimation::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::param("samples", "need at least 2"));
            }
            check_seat_strategies(game, 0, strategies)?;
            let samplers: Vec<_> = strategies.iter().map(|s| s.sampler()).collect();
            let cells: Vec<(f64, f64)> = (0..k * k)
                .into_par_iter()
                .map(|cell| {
                    let (r, c) = (cell / k, cell % k);
                    let mut rng = stream(seed, Domain::Evaluation, &[r as u64, c as u64]);
                    let mut a = vec![0; n];
                    let (mut sum, mut sq) = (0.0, 0.0);
                    for _ in 0..samples {
                        let seat = rng.random_range(0..n);
                        for (p, slot) in a.iter_mut().enumerate() {
                            *slot = if p == seat {
                                samplers[r].sample(&mut rng)
                            } else {
                                samplers[c].sample(&mut rng)
                            };
                        }
                        let v = game.payoff(seat, game.joint_index(&a));
                        sum += v;
                        sq += v * v;
                    }
                    let m = samples as f64;
                    let mean = sum / m;
                    let var = ((sq - m * mean * mean) / (m - 1.0)).max(0.0);
                    (mean, (var / m).sqrt())
                })
                .collect();
            let values = cells
                .chunks(k)
                .map(|row| row.iter().map(|x| x.0).collect())
                .collect();
            let stderr = cells
                .chunks(k)
                .map(|row| row.iter().map(|x| x.1).collect())
                .collect();
            Ok(MetaGameTable {
                values,
                stderr: Some(stderr),
                estimation: Estimation::MonteCarlo { samples, seed },
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashLeague {
    pub tau: f64,
    /// Row `i` is a distribution over the first `i + 1` checkpoints.
    pub rows: Vec<Vec<f64>>,
}

impl NashLeague {
    /// Tidy CSV: `prefix,checkpoint,mass`, one row per (prefix, checkpoint).
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["prefix", "checkpoint", "mass"])
            .expect("memory write");
        for (i, row) in self.rows.iter().enumerate() {
            for (c, m) in row.iter().enumerate() {
                w.write_record([(i + 1).to_string(), c.to_string(), m.to_string()])
                    .expect("memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("memory write")).expect("ascii")
    }
}

/// Symmetrized QRE of the two-player symmetric game over a table.
pub fn solve_symmetric_meta_game(table: &MetaGameTable, tau: f64) -> Result<Vec<f64>> {
    let k = table.size();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let a = &table.values;
    let b: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|c| a[c][r]).collect()).collect();
    let game = Game::bimatrix(a, &b)?;
    let profile = qre_solve(&game, &QreConfig::new(tau))?;
    let x0 = profile.strategy(0).probs();
    let x1 = profile.strategy(1).probs();
    let mut row: Vec<f64> = x0.iter().zip(x1).map(|(p, q)| 0.5 * (p + q)).collect();
    let total: f64 = row.iter().sum();
    for m in &mut row {
        *m /= total;
    }
    Ok(row)
}

/// For each prefix of checkpoints, the QRE distribution of the restricted meta-game.
pub fn nash_league(table: &MetaGameTable, tau: f64) -> Result<NashLeague> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", "must be positive"));
    }
    let rows = (1..=table.size())
        .map(|i| solve_symmetric_meta_game(&table.prefix(i), tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(NashLeague { tau, rows })
}

/// Continuity-corrected Wilson score interval, clamped to `[0, 1]`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::param(
            "successes",
            format!("{successes} of {trials} trials"),
        ));
    }
    wilson_interval_fractional(successes as f64, trials, confidence)
}

/// Wilson interval for a fractional success count, as produced by averaging scores in `[0, 1]`.
pub fn wilson_interval_fractional(
    successes: f64,
    trials: u64,
    confidence: f64,
) -> Result<(f64, f64)> {
    if trials == 0 || !(0.0..=trials as f64).contains(&successes) {
        return Err(Error::param(
            "successes",
            format!("{successes} of {trials} trials"),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param("confidence", "must lie in (0, 1)"));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = trials as f64;
    let p = successes / n;
    let z2 = z * z;
    let denom = 2.0 * (n + z2);
    let lower = if p == 0.0 {
        0.0
    } else {
        let rad = (z2 - 2.0 - 1.0 / n + 4.0 * p * (n * (1.0 - p) + 1.0)).max(0.0);
        (2.0 * n * p + z2 - 1.0 - z * rad.sqrt()) / denom
    };
    let upper = if p == 1.0 {
        1.0
    } else {
        let rad = (z2 + 2.0 - 1.0 / n + 4.0 * p * (n * (1.0 - p) - 1.0)).max(0.0);
        (2.0 * n * p + z2 + 1.0 + z * rad.sqrt()) / denom
    };
    Ok((lower.clamp(0.0, 1.0), upper.clamp(0.0, 1.0)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeatChoice {
    Fixed(usize),
    #[default]
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploitEstimate {
    /// Mean gain of the exploiter over the target's own value in the same seat.
    pub margin: f64,
    pub interval: (f64, f64),
    pub episodes: usize,
    pub confidence: f64,
}

/// Lower bound on how much a single SBR agent gains against copies of `target`.
///
/// The exploiter's chosen action is scored exactly, so each episode's gain is
/// at most the exact best-response gain in that seat.
pub fn sbr_exploit_lower_bound(
    game: &Game,
    target: &ProductProfile,
    exploiter: &SbrConfig,
    episodes: usize,
    seat: SeatChoice,
    seed: u64,
) -> Result<ExploitEstimate> {
    target.check(game)?;
    exploiter.validate()?;
    if episodes == 0 {
        return Err(Error::param("episodes", "must be at least 1"));
    }
    let n = game.num_players();
    if let SeatChoice::Fixed(s) = seat {
        if s >= n {
            return Err(Error::param("seat", format!("{s} out of range")));
        }
    }
    let dev: Vec<Vec<f64>> = (0..n).map(|i| target.deviation_values(game, i)).collect();
    let own: Vec<f64> = (0..n).map(|i| target.strategy(i).dot(&dev[i])).collect();
    let pools: Vec<CandidatePool> = (0..n)
        .map(|i| match exploiter.candidates {
            CandidateSource::Initial => CandidatePool::uniform(game.num_actions(i)),
            _ => CandidatePool::from(target.strategy(i)),
        })
        .collect();
    let (lo, hi) = game.reward_range();
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    let mut score01 = 0.0;
    for e in 0..episodes {
        let mut rng = stream(seed, Domain::Exploit, &[e as u64]);
        let s = match seat {
            SeatChoice::Fixed(s) => s,
            SeatChoice::Random => rng.random_range(0..n),
        };
        let t = sampled_best_response_traced(game, s, target, &pools[s], exploiter, &mut rng);
        let gain = dev[s][t.action] - own[s];
        total += gain;
        score01 += ((gain + span) / (2.0 * span)).clamp(0.0, 1.0);
    }
    let confidence = 0.95;
    let (l, u) = wilson_interval_fractional(score01, episodes as u64, confidence)?;
    Ok(ExploitEstimate {
        margin: total / episodes as f64,
        interval: (l * 2.0 * span - span, u * 2.0 * span - span),
        episodes,
        confidence,
    })
}

/// `k` distinct iterations in `0..=last`, spaced exponentially and including both ends.
pub fn exponential_checkpoints(last: usize, k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k == 1 || last == 0 {
        return vec![last];
    }
    let mut out = vec![0];
    let ln = ((last + 1) as f64).ln();
    for j in 1..k {
        let d = ((ln * j as f64 / (k - 1) as f64).exp() - 1.0).round() as usize;
        let d = d.max(out.last().copied().unwrap_or(0) + 1).min(last);
        if !out.contains(&d) {
            out.push(d);
        }
    }
    if *out.last().expect("nonempty") != last {
        out.push(last);
    }
    out
}
