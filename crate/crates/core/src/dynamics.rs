//! Learning dynamics: FP, SFP, IBR, MaxEnt-IBR, FP+SBR and sample-based BRPI.
//!
//! All runners share one loop. `π⁰` is the uniform product profile and is
//! history entry 0; iteration `t = 1..=T` computes every player's response to
//! the policy built from entries `0..t` and appends `πᵗ`.

use std::io::{Read, Write};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::metrics::{ccedist, nashconv, DeviationReport};
use crate::responses::{
    best_response_from_values, dedup_in_order, draw_base_profiles, logit_from_values,
    maxent_from_values, sampled_best_response_traced, sampled_best_response_with_profiles,
    select_candidate, BaseSource, CandidatePool, CandidateSource, SbrConfig, WithValues,
    DEFAULT_TIE_TOLERANCE,
};
use crate::rng::{stream, Domain};
use crate::strategy::{
    deviation_and_value, ActionSampler, Component, CorrelationDevice, JointPolicy, MixedStrategy,
    PolicyHistory, ProductProfile,
};

/// Joint-action count above which metrics default to every 10th iteration.
pub const SPARSE_METRICS_ABOVE: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fp,
    Ibr,
    MaxentIbr,
    Sfp,
    FpSbr,
    Brpi,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fp => "fp",
            Algorithm::Ibr => "ibr",
            Algorithm::MaxentIbr => "maxent_ibr",
            Algorithm::Sfp => "sfp",
            Algorithm::FpSbr => "fp_sbr",
            Algorithm::Brpi => "brpi",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgmaxRule {
    #[default]
    Exact,
    Maxent,
}

/// Which policy a trace row measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Current,
    Average,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Current => "current",
            PolicyKind::Average => "average",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "current" => Some(PolicyKind::Current),
            "average" => Some(PolicyKind::Average),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Argmax rule for fp: `exact` (lowest index) or `maxent` (uniform over ties).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ArgmaxRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbr: Option<SbrConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_cadence: Option<usize>,
    /// Overrides the evaluated policy; BRPI defaults to the average for a
    /// uniform-past base and the current policy for a latest base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<PolicyKind>,
    /// Off by default so traces are byte-reproducible; `wall_ms` is then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub record_wall_time: bool,
}

fn invalid(prefix: &str, field: &str, reason: impl Into<String>) -> Error {
    let field = if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    };
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl DynamicsConfig {
    pub fn new(algorithm: Algorithm, iterations: usize) -> Self {
        DynamicsConfig {
            algorithm,
            iterations,
            beta: None,
            response: None,
            sbr: None,
            samples_per_iteration: None,
            seed: None,
            metric_cadence: None,
            evaluate: None,
            record_wall_time: false,
        }
    }

    pub fn fp(iterations: usize) -> Self {
        Self::new(Algorithm::Fp, iterations)
    }

    pub fn sfp(iterations: usize, beta: f64) -> Self {
        DynamicsConfig {
            beta: Some(beta),
            ..Self::new(Algorithm::Sfp, iterations)
        }
    }

    pub fn fp_sbr(iterations: usize, b: usize, c: usize) -> Self {
        DynamicsConfig {
            sbr: Some(SbrConfig::new(
                b,
                c,
                CandidateSource::Initial,
                BaseSource::UniformPast,
            )),
            ..Self::new(Algorithm::FpSbr, iterations)
        }
    }

    pub fn brpi(iterations: usize, sbr: SbrConfig, samples: usize) -> Self {
        DynamicsConfig {
            sbr: Some(sbr),
            samples_per_iteration: Some(samples),
            ..Self::new(Algorithm::Brpi, iterations)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_cadence(mut self, cadence: usize) -> Self {
        self.metric_cadence = Some(cadence);
        self
    }

    /// Checks cross-field constraints; errors name `prefix.field`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid(prefix, "iterations", "must be at least 1"));
        }
        if self.metric_cadence == Some(0) {
            return Err(invalid(prefix, "metric_cadence", "must be at least 1"));
        }
        match (self.algorithm, self.beta) {
            (Algorithm::Sfp, None) => return Err(invalid(prefix, "beta", "required for sfp")),
            (Algorithm::Sfp, Some(b)) if !b.is_finite() || b < 0.0 => {
                return Err(invalid(prefix, "beta", "must be finite and nonnegative"))
            }
            (Algorithm::Sfp, _) | (_, None) => {}
            (_, Some(_)) => return Err(invalid(prefix, "beta", "only applies to sfp")),
        }
        if self.response.is_some() && self.algorithm != Algorithm::Fp {
            return Err(invalid(prefix, "response", "only applies to fp"));
        }
        let uses_sbr = matches!(self.algorithm, Algorithm::FpSbr | Algorithm::Brpi);
        match (&self.sbr, uses_sbr) {
            (None, true) => {
                return Err(invalid(
                    prefix,
                    "sbr",
                    format!("required for {}", self.algorithm.name()),
                ))
            }
            (Some(_), false) => {
                return Err(invalid(
                    prefix,
                    "sbr",
                    format!("does not apply to {}", self.algorithm.name()),
                ))
            }
            (Some(s), true) => {
                s.validate()
                    .map_err(|e| invalid(prefix, "sbr", e.to_string()))?;
                if self.algorithm == Algorithm::FpSbr {
                    if s.candidates != CandidateSource::Initial {
                        return Err(invalid(
                            prefix,
                            "sbr.candidates",
                            "fp_sbr draws candidates uniformly (initial)",
                        ));
                    }
                    if s.base != BaseSource::UniformPast {
                        return Err(invalid(
                            prefix,
                            "sbr.base",
                            "fp_sbr samples its base from the running average (uniform_past)",
                        ));
                    }
                }
            }
            (None, false) => {}
        }
        match (self.algorithm, self.samples_per_iteration) {
            (Algorithm::Brpi, Some(0)) => {
                return Err(invalid(
                    prefix,
                    "samples_per_iteration",
                    "must be at least 1",
                ))
            }
            (Algorithm::Brpi, _) | (_, None) => {}
            (_, Some(_)) => {
                return Err(invalid(
                    prefix,
                    "samples_per_iteration",
                    "only applies to brpi",
                ))
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.samples_per_iteration.unwrap_or(1)
    }

    pub fn cadence_for(&self, game: &Game) -> usize {
        self.metric_cadence
            .unwrap_or(if game.joint_actions() <= SPARSE_METRICS_ABOVE {
                1
            } else {
                10
            })
    }

    pub fn policy_kind(&self) -> PolicyKind {
        if let Some(k) = self.evaluate {
            return k;
        }
        match self.algorithm {
            Algorithm::Fp | Algorithm::Sfp | Algorithm::FpSbr => PolicyKind::Average,
            Algorithm::Ibr | Algorithm::MaxentIbr => PolicyKind::Current,
            Algorithm::Brpi => match self.sbr.as_ref().map(|s| s.base) {
                Some(BaseSource::Latest) => PolicyKind::Current,
                _ => PolicyKind::Average,
            },
        }
    }
}

/// One metric evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub wall_ms: u64,
    pub nashconv: f64,
    pub ccedist: f64,
    pub eps: Vec<f64>,
    pub policy_kind: PolicyKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn header(players: usize) -> Vec<String> {
        let mut h = vec![
            "iteration".to_string(),
            "wall_ms".into(),
            "nashconv".into(),
            "ccedist".into(),
        ];
        h.extend((0..players).map(|i| format!("eps_{i}")));
        h.push("policy_kind".into());
        h
    }

    /// Writes the CSV body (header plus rows). Reals use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, players: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(players))?;
        for r in &self.rows {
            let mut rec = vec![
                r.iteration.to_string(),
                r.wall_ms.to_string(),
                r.nashconv.to_string(),
                r.ccedist.to_string(),
            ];
            rec.extend(r.eps.iter().map(|e| e.to_string()));
            rec.push(r.policy_kind.name().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, players: usize) -> String {
        let mut buf = Vec::new();
        self.write_csv(players, &mut buf)
            .expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Parses a trace CSV; lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let n = cols.len();
        let malformed = |reason: String| Error::Malformed {
            path: "trace.csv".into(),
            reason,
        };
        if n < 5
            || cols[..4] != ["iteration", "wall_ms", "nashconv", "ccedist"]
            || cols[n - 1] != "policy_kind"
        {
            return Err(malformed(format!("unexpected header {cols:?}")));
        }
        for (i, c) in cols[4..n - 1].iter().enumerate() {
            if *c != format!("eps_{i}") {
                return Err(malformed(format!("unexpected column {c}")));
            }
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != n {
                return Err(malformed(format!(
                    "row {line} has {} fields, expected {n}",
                    rec.len()
                )));
            }
            let real = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("row {line} column {}: {e}", cols[k])))
            };
            rows.push(TraceRow {
                iteration: rec[0]
                    .parse()
                    .map_err(|e| malformed(format!("row {line} iteration: {e}")))?,
                wall_ms: rec[1]
                    .parse()
                    .map_err(|e| malformed(format!("row {line} wall_ms: {e}")))?,
                nashconv: real(2)?,
                ccedist: real(3)?,
                eps: (4..n - 1).map(real).collect::<Result<_>>()?,
                policy_kind: PolicyKind::parse(&rec[n - 1]).ok_or_else(|| {
                    malformed(format!("row {line} policy_kind `{}`", &rec[n - 1]))
                })?,
            });
        }
        Ok(RunTrace { rows })
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// Running sums over absorbed checkpoints, enough to respond to and evaluate
/// the uniform average of the history without materializing it.
#[derive(Clone, Debug)]
pub struct HistoryAccumulator {
    count: usize,
    dev_sum: Vec<Vec<f64>>,
    val_sum: Vec<f64>,
    marg_sum: Vec<Vec<f64>>,
}

impl HistoryAccumulator {
    pub fn new(game: &Game) -> Self {
        HistoryAccumulator {
            count: 0,
            dev_sum: game.action_counts().iter().map(|&k| vec![0.0; k]).collect(),
            val_sum: vec![0.0; game.num_players()],
            marg_sum: game.action_counts().iter().map(|&k| vec![0.0; k]).collect(),
        }
    }

    pub fn absorb(&mut self, game: &Game, device: &CorrelationDevice) {
        self.count += 1;
        for i in 0..game.num_players() {
            let (dev, val) = deviation_and_value(game, i, device);
            for (s, d) in self.dev_sum[i].iter_mut().zip(&dev) {
                *s += d;
            }
            self.val_sum[i] += val;
            for (s, m) in self.marg_sum[i]
                .iter_mut()
                .zip(device.marginal(i, game.num_actions(i)))
            {
                *s += m;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Deviation values against the average device.
    pub fn mean_deviation(&self, player: usize) -> Vec<f64> {
        let t = self.count as f64;
        self.dev_sum[player].iter().map(|s| s / t).collect()
    }

    pub fn mean_marginal(&self, player: usize) -> MixedStrategy {
        let t = self.count as f64;
        let probs: Vec<f64> = self.marg_sum[player].iter().map(|s| s / t).collect();
        MixedStrategy::new(probs).expect("average of distributions")
    }

    pub fn average_marginals(&self) -> ProductProfile {
        ProductProfile::new(
            (0..self.dev_sum.len())
                .map(|i| self.mean_marginal(i))
                .collect(),
        )
        .expect("nonempty")
    }

    /// CCE report of the average device.
    pub fn cce_report(&self) -> DeviationReport {
        let t = self.count as f64;
        let mut per_player = Vec::new();
        let mut best_deviation = Vec::new();
        for (dev, val) in self.dev_sum.iter().zip(&self.val_sum) {
            let a = crate::responses::argmax_lowest(dev, DEFAULT_TIE_TOLERANCE * t);
            per_player.push((dev[a] - val) / t);
            best_deviation.push(a);
        }
        DeviationReport {
            aggregate: per_player.iter().map(|g| g.max(0.0)).sum(),
            per_player,
            best_deviation,
        }
    }
}

/// Base policy that draws a checkpoint index uniformly, then a joint action
/// from that checkpoint, so all opponents come from the same iteration.
pub struct UniformPast<'a> {
    pub checkpoints: &'a [CorrelationDevice],
}

impl JointPolicy for UniformPast<'_> {
    fn num_players(&self) -> usize {
        self.checkpoints[0].num_players()
    }

    fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        let d = rng.random_range(0..self.checkpoints.len());
        self.checkpoints[d].sample_joint(rng, out)
    }

    fn deviation_values(&self, game: &Game, player: usize) -> Vec<f64> {
        let mut out = vec![0.0; game.num_actions(player)];
        for c in self.checkpoints {
            for (o, v) in out.iter_mut().zip(deviation_and_value(game, player, c).0) {
                *o += v;
            }
        }
        let t = self.checkpoints.len() as f64;
        out.iter().map(|v| v / t).collect()
    }
}

/// The result of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub history: PolicyHistory,
    pub trace: RunTrace,
}

/// Steppable runner; a run can be resumed from any saved history prefix.
pub struct Runner<'g> {
    game: &'g Game,
    cfg: DynamicsConfig,
    seed: u64,
    cadence: usize,
    kind: PolicyKind,
    history: PolicyHistory,
    acc: HistoryAccumulator,
    started: Instant,
    wall_offset_ms: u64,
}

fn uniform_device(game: &Game) -> CorrelationDevice {
    CorrelationDevice::from_product(ProductProfile::uniform(game))
}

/// Stores a profile compactly: a pure joint action when every strategy is pure.
fn checkpoint_of(strategies: Vec<MixedStrategy>) -> CorrelationDevice {
    let pure: Option<Vec<usize>> = strategies.iter().map(|s| s.pure_action()).collect();
    match pure {
        Some(a) => CorrelationDevice::from_pure(a),
        None => CorrelationDevice::from_product(ProductProfile::new(strategies).expect("nonempty")),
    }
}

impl<'g> Runner<'g> {
    pub fn new(game: &'g Game, cfg: DynamicsConfig) -> Result<Self> {
        Self::resume(game, cfg, PolicyHistory::new(), 0)
    }

    /// Continues from `history` (entries `0..=t`); an empty history starts fresh.
    pub fn resume(
        game: &'g Game,
        cfg: DynamicsConfig,
        history: PolicyHistory,
        wall_offset_ms: u64,
    ) -> Result<Self> {
        cfg.validate("")?;
        if history.len() > cfg.iterations + 1 {
            return Err(Error::param("history", "longer than the configured run"));
        }
        let mut acc = HistoryAccumulator::new(game);
        let history = if history.is_empty() {
            std::iter::once(uniform_device(game)).collect()
        } else {
            for d in history.checkpoints() {
                d.check(game)?;
            }
            history
        };
        for d in history.checkpoints() {
            acc.absorb(game, d);
        }
        Ok(Runner {
            game,
            seed: cfg.seed.unwrap_or(0),
            cadence: cfg.cadence_for(game),
            kind: cfg.policy_kind(),
            cfg,
            history,
            acc,
            started: Instant::now(),
            wall_offset_ms,
        })
    }

    /// Index of the newest policy.
    pub fn iteration(&self) -> usize {
        self.history.len() - 1
    }

    pub fn is_done(&self) -> bool {
        self.iteration() >= self.cfg.iterations
    }

    pub fn history(&self) -> &PolicyHistory {
        &self.history
    }

    pub fn accumulator(&self) -> &HistoryAccumulator {
        &self.acc
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    pub fn current(&self) -> &CorrelationDevice {
        self.history.checkpoints().last().expect("history holds π⁰")
    }

    pub fn wall_ms(&self) -> u64 {
        if self.cfg.record_wall_time {
            self.wall_offset_ms + self.started.elapsed().as_millis() as u64
        } else {
            0
        }
    }

    fn records(&self, t: usize) -> bool {
        t == 1 || t % self.cadence == 0 || t == self.cfg.iterations
    }

    /// Advances one iteration; returns a trace row when metrics are due.
    pub fn step(&mut self) -> Option<TraceRow> {
        if self.is_done() {
            return None;
        }
        let t = self.history.len();
        let next = self.respond(t);
        self.acc.absorb(self.game, &next);
        self.history.push(next);
        self.records(t).then(|| self.evaluate())
    }

    pub fn run_to_end(&mut self, trace: &mut RunTrace) {
        while let Some(row) = self.step_until_row() {
            trace.rows.push(row);
        }
    }

    fn step_until_row(&mut self) -> Option<TraceRow> {
        while !self.is_done() {
            if let Some(row) = self.step() {
                return Some(row);
            }
        }
        None
    }

    /// Metrics of the policy this run is judged by.
    pub fn evaluate(&self) -> TraceRow {
        let (nc, cce) = match self.kind {
            PolicyKind::Average => {
                let nc =
                    nashconv(self.game, &self.acc.average_marginals()).expect("shapes checked");
                (nc.aggregate, self.acc.cce_report())
            }
            PolicyKind::Current => {
                let cur = self.current();
                let nc = nashconv(self.game, &cur.marginals(self.game)).expect("shapes checked");
                (
                    nc.aggregate,
                    ccedist(self.game, cur).expect("shapes checked"),
                )
            }
        };
        TraceRow {
            iteration: self.iteration(),
            wall_ms: self.wall_ms(),
            nashconv: nc,
            ccedist: cce.aggregate,
            eps: cce.per_player,
            policy_kind: self.kind,
        }
    }

    fn respond(&self, t: usize) -> CorrelationDevice {
        let game = self.game;
        let n = game.num_players();
        match self.cfg.algorithm {
            Algorithm::Fp | Algorithm::Sfp => {
                let strategies = (0..n)
                    .map(|i| {
                        let v = self.acc.mean_deviation(i);
                        match self.cfg.beta {
                            Some(beta) => logit_from_values(&v, beta).strategy,
                            None => match self.cfg.response.unwrap_or_default() {
                                ArgmaxRule::Exact => {
                                    best_response_from_values(&v, DEFAULT_TIE_TOLERANCE).strategy
                                }
                                ArgmaxRule::Maxent => {
                                    maxent_from_values(&v, DEFAULT_TIE_TOLERANCE).strategy
                                }
                            },
                        }
                    })
                    .collect();
                checkpoint_of(strategies)
            }
            Algorithm::Ibr | Algorithm::MaxentIbr => {
                let cur = self.current();
                let strategies = (0..n)
                    .map(|i| {
                        let v = cur.deviation_values(game, i);
                        if self.cfg.algorithm == Algorithm::Ibr {
                            best_response_from_values(&v, DEFAULT_TIE_TOLERANCE).strategy
                        } else {
                            maxent_from_values(&v, DEFAULT_TIE_TOLERANCE).strategy
                        }
                    })
                    .collect();
                checkpoint_of(strategies)
            }
            Algorithm::FpSbr => {
                let sbr = self.cfg.sbr.as_ref().expect("validated");
                let base = UniformPast {
                    checkpoints: &self.history.checkpoints()[..t],
                };
                let exact: Vec<Vec<f64>> = if sbr.exact_mode {
                    (0..n).map(|i| self.acc.mean_deviation(i)).collect()
                } else {
                    Vec::new()
                };
                let mut actions = vec![0; n];
                let mut shared = None;
                for (i, a) in actions.iter_mut().enumerate() {
                    let mut rng = stream(self.seed, Domain::Dynamics, &[t as u64, i as u64]);
                    let pool = CandidatePool::uniform(game.num_actions(i));
                    *a = if sbr.exact_mode {
                        let wrapped = WithValues {
                            policy: &base,
                            player: i,
                            values: &exact[i],
                        };
                        sampled_best_response_traced(game, i, &wrapped, &pool, sbr, &mut rng).action
                    } else if sbr.share_base_profiles {
                        let profiles = shared
                            .get_or_insert_with(|| {
                                let mut r =
                                    stream(self.seed, Domain::Dynamics, &[t as u64, u64::MAX]);
                                draw_base_profiles(&base, sbr.num_base_profiles, &mut r)
                            })
                            .clone();
                        sampled_best_response_with_profiles(game, i, profiles, &pool, sbr, &mut rng)
                            .action
                    } else {
                        sampled_best_response_traced(game, i, &base, &pool, sbr, &mut rng).action
                    };
                }
                CorrelationDevice::from_pure(actions)
            }
            Algorithm::Brpi => self.brpi_iteration(t),
        }
    }

    fn candidate_pools(&self, sbr: &SbrConfig) -> Vec<CandidatePool> {
        let game = self.game;
        let latest = self.current();
        (0..game.num_players())
            .map(|i| {
                let k = game.num_actions(i);
                let initial = || ActionSampler::Uniform(k);
                let last = || ActionSampler::from_probs(&latest.marginal(i, k));
                let past = || ActionSampler::from_probs(self.acc.mean_marginal(i).probs());
                match sbr.candidates {
                    CandidateSource::Initial => CandidatePool::single(initial()),
                    CandidateSource::Latest => CandidatePool::single(last()),
                    CandidateSource::UniformPast => CandidatePool::single(past()),
                    CandidateSource::InitialLatest => CandidatePool::split(initial(), last()),
                    CandidateSource::InitialUniformPast => CandidatePool::split(initial(), past()),
                }
            })
            .collect()
    }

    fn brpi_iteration(&self, t: usize) -> CorrelationDevice {
        let game = self.game;
        let n = game.num_players();
        let sbr = self.cfg.sbr.as_ref().expect("validated");
        let pools = self.candidate_pools(sbr);
        let past = UniformPast {
            checkpoints: &self.history.checkpoints()[..t],
        };
        let latest = self.current();
        let base: &dyn BaseDraw = match sbr.base {
            BaseSource::Latest => latest,
            BaseSource::UniformPast => &past,
        };
        let exact: Vec<Vec<f64>> = if sbr.exact_mode {
            (0..n)
                .map(|i| match sbr.base {
                    BaseSource::Latest => latest.deviation_values(game, i),
                    BaseSource::UniformPast => self.acc.mean_deviation(i),
                })
                .collect()
        } else {
            Vec::new()
        };
        let samples = self.cfg.samples();
        let mut joint = Vec::with_capacity(samples);
        let mut profiles = Vec::with_capacity(sbr.num_base_profiles);
        for s in 0..samples {
            let mut rng = stream(self.seed, Domain::Dynamics, &[t as u64, s as u64]);
            if sbr.share_base_profiles && !sbr.exact_mode {
                profiles.clear();
                base.draw_into(&mut rng, sbr.num_base_profiles, &mut profiles);
            }
            let mut actions = vec![0; n];
            for (i, a) in actions.iter_mut().enumerate() {
                *a = if sbr.exact_mode {
                    let values = &exact[i];
                    let mut cands = Vec::with_capacity(sbr.num_candidates);
                    pools[i].draw(sbr.num_candidates, &mut rng, &mut cands);
                    pick_exact(&mut cands, values, sbr, &mut rng)
                } else {
                    if !sbr.share_base_profiles {
                        profiles.clear();
                        base.draw_into(&mut rng, sbr.num_base_profiles, &mut profiles);
                    }
                    sampled_best_response_with_profiles(
                        game,
                        i,
                        profiles.clone(),
                        &pools[i],
                        sbr,
                        &mut rng,
                    )
                    .action
                };
            }
            joint.push(actions);
        }
        CorrelationDevice::empirical(joint).expect("at least one sample")
    }
}

fn pick_exact<R: Rng + ?Sized>(
    cands: &mut Vec<usize>,
    values: &[f64],
    sbr: &SbrConfig,
    rng: &mut R,
) -> usize {
    if sbr.dedup_candidates {
        dedup_in_order(cands);
    }
    let scores: Vec<f64> = cands.iter().map(|&a| values[a]).collect();
    cands[select_candidate(cands, &scores, sbr, rng)]
}

/// Object-safe base sampling over the crate's stream type.
trait BaseDraw {
    fn draw_into(&self, rng: &mut crate::rng::StreamRng, count: usize, out: &mut Vec<Vec<usize>>);
}

impl<P: JointPolicy> BaseDraw for P {
    fn draw_into(&self, rng: &mut crate::rng::StreamRng, count: usize, out: &mut Vec<Vec<usize>>) {
        for _ in 0..count {
            let mut a = vec![0; self.num_players()];
            self.sample_joint(rng, &mut a);
            out.push(a);
        }
    }
}

/// Runs a configured dynamics to completion.
pub fn run_dynamics(game: &Game, cfg: &DynamicsConfig) -> Result<RunOutput> {
    let mut runner = Runner::new(game, cfg.clone())?;
    let mut trace = RunTrace::default();
    runner.run_to_end(&mut trace);
    Ok(RunOutput {
        history: runner.history,
        trace,
    })
}

/// Response operator for fictitious play.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FpResponse {
    Exact,
    Maxent,
    Logit { beta: f64 },
}

pub fn run_fp(game: &Game, iterations: usize, response: FpResponse) -> Result<RunOutput> {
    let cfg = match response {
        FpResponse::Exact => DynamicsConfig::fp(iterations),
        FpResponse::Maxent => DynamicsConfig {
            response: Some(ArgmaxRule::Maxent),
            ..DynamicsConfig::fp(iterations)
        },
        FpResponse::Logit { beta } => DynamicsConfig::sfp(iterations, beta),
    };
    run_dynamics(game, &cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IbrResponse {
    Exact,
    Maxent,
}

pub fn run_ibr(game: &Game, iterations: usize, response: IbrResponse) -> Result<RunOutput> {
    let alg = match response {
        IbrResponse::Exact => Algorithm::Ibr,
        IbrResponse::Maxent => Algorithm::MaxentIbr,
    };
    run_dynamics(game, &DynamicsConfig::new(alg, iterations))
}

pub fn run_fp_sbr(game: &Game, iterations: usize, sbr: SbrConfig, seed: u64) -> Result<RunOutput> {
    let cfg = DynamicsConfig {
        sbr: Some(sbr),
        ..DynamicsConfig::new(Algorithm::FpSbr, iterations)
    }
    .with_seed(seed);
    run_dynamics(game, &cfg)
}

pub fn run_brpi(
    game: &Game,
    iterations: usize,
    sbr: SbrConfig,
    samples: usize,
    seed: u64,
) -> Result<RunOutput> {
    run_dynamics(
        game,
        &DynamicsConfig::brpi(iterations, sbr, samples).with_seed(seed),
    )
}

/// Whether a stored checkpoint is a single pure joint action.
pub fn is_pure_checkpoint(device: &CorrelationDevice) -> bool {
    matches!(device.components(), [(_, Component::Pure(_))])
}
