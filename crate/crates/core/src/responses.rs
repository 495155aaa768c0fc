//! Response operators: exact, max-entropy, logit and sampled best response.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::strategy::{ActionSampler, CorrelationDevice, JointPolicy, MixedStrategy};

pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

/// A response and its expected reward against the target it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseResult {
    pub strategy: MixedStrategy,
    pub value: f64,
}

impl ResponseResult {
    pub fn action(&self) -> Option<usize> {
        self.strategy.pure_action()
    }
}

fn check_player(game: &Game, player: usize, opponents: &CorrelationDevice) -> Result<()> {
    opponents.check(game)?;
    if player >= game.num_players() {
        return Err(Error::param("player", format!("{player} out of range")));
    }
    Ok(())
}

/// Lowest index whose value is within `tol` of the maximum.
pub fn argmax_lowest(values: &[f64], tol: f64) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= max - tol)
        .expect("nonempty values")
}

/// All indices within `tol` of the maximum.
pub fn argmax_set(values: &[f64], tol: f64) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= max - tol)
        .map(|(a, _)| a)
        .collect()
}

pub fn best_response_from_values(values: &[f64], tol: f64) -> ResponseResult {
    let a = argmax_lowest(values, tol);
    ResponseResult {
        strategy: MixedStrategy::pure(values.len(), a),
        value: values[a],
    }
}

pub fn maxent_from_values(values: &[f64], tol: f64) -> ResponseResult {
    let support = argmax_set(values, tol);
    let strategy = MixedStrategy::uniform_over(values.len(), &support);
    let value = strategy.dot(values);
    ResponseResult { strategy, value }
}

/// Softmax of `beta * values` with max subtraction.
pub fn softmax(values: &[f64], beta: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|&v| (beta * (v - max)).exp()).collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

pub fn logit_from_values(values: &[f64], beta: f64) -> ResponseResult {
    let strategy = MixedStrategy::new(softmax(values, beta)).expect("softmax is a distribution");
    let value = strategy.dot(values);
    ResponseResult { strategy, value }
}

pub fn exact_best_response(
    game: &Game,
    player: usize,
    opponents: &CorrelationDevice,
) -> Result<ResponseResult> {
    check_player(game, player, opponents)?;
    Ok(best_response_from_values(
        &opponents.deviation_values(game, player),
        DEFAULT_TIE_TOLERANCE,
    ))
}

pub fn maxent_best_response(
    game: &Game,
    player: usize,
    opponents: &CorrelationDevice,
) -> Result<ResponseResult> {
    check_player(game, player, opponents)?;
    Ok(maxent_from_values(
        &opponents.deviation_values(game, player),
        DEFAULT_TIE_TOLERANCE,
    ))
}

pub fn logit_response(
    game: &Game,
    player: usize,
    opponents: &CorrelationDevice,
    beta: f64,
) -> Result<ResponseResult> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::param(
            "beta",
            format!("{beta} is not a finite nonnegative number"),
        ));
    }
    check_player(game, player, opponents)?;
    Ok(logit_from_values(
        &opponents.deviation_values(game, player),
        beta,
    ))
}

/// Which policy candidates are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CandidateSource {
    #[serde(rename = "initial")]
    Initial,
    #[serde(rename = "latest")]
    Latest,
    #[serde(rename = "uniform_past")]
    UniformPast,
    #[serde(rename = "initial+latest")]
    InitialLatest,
    #[serde(rename = "initial+uniform_past")]
    InitialUniformPast,
}

impl CandidateSource {
    pub const ALL: [CandidateSource; 5] = [
        CandidateSource::Initial,
        CandidateSource::UniformPast,
        CandidateSource::Latest,
        CandidateSource::InitialUniformPast,
        CandidateSource::InitialLatest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CandidateSource::Initial => "initial",
            CandidateSource::Latest => "latest",
            CandidateSource::UniformPast => "uniform_past",
            CandidateSource::InitialLatest => "initial+latest",
            CandidateSource::InitialUniformPast => "initial+uniform_past",
        }
    }
}

/// Which policy base profiles are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSource {
    Latest,
    UniformPast,
}

impl BaseSource {
    pub fn name(self) -> &'static str {
        match self {
            BaseSource::Latest => "latest",
            BaseSource::UniformPast => "uniform_past",
        }
    }
}

/// How SBR chooses among candidates whose Q̂ ties within `tie_tolerance`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Lowest candidate index, i.e. the earliest draw.
    #[default]
    FirstCandidate,
    /// Lowest action index.
    LowestAction,
    /// Uniform among the tied candidates, from the call's stream.
    Random,
}

fn default_tie_tolerance() -> f64 {
    DEFAULT_TIE_TOLERANCE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbrConfig {
    #[serde(rename = "B")]
    pub num_base_profiles: usize,
    #[serde(rename = "C")]
    pub num_candidates: usize,
    pub candidates: CandidateSource,
    pub base: BaseSource,
    #[serde(default)]
    pub exact_mode: bool,
    #[serde(default = "default_tie_tolerance")]
    pub tie_tolerance: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub dedup_candidates: bool,
    #[serde(default)]
    pub share_base_profiles: bool,
}

impl SbrConfig {
    pub fn new(b: usize, c: usize, candidates: CandidateSource, base: BaseSource) -> Self {
        SbrConfig {
            num_base_profiles: b,
            num_candidates: c,
            candidates,
            base,
            exact_mode: false,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            tie_break: TieBreak::FirstCandidate,
            dedup_candidates: false,
            share_base_profiles: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_base_profiles == 0 {
            return Err(Error::param("B", "must be at least 1"));
        }
        if self.num_candidates == 0 {
            return Err(Error::param("C", "must be at least 1"));
        }
        if !self.tie_tolerance.is_finite() || self.tie_tolerance < 0.0 {
            return Err(Error::param(
                "tie_tolerance",
                "must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

/// Candidate distribution, possibly split between two sources.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    pub first: ActionSampler,
    pub second: Option<ActionSampler>,
}

impl CandidatePool {
    pub fn single(sampler: ActionSampler) -> Self {
        CandidatePool {
            first: sampler,
            second: None,
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self::single(ActionSampler::Uniform(n))
    }

    pub fn split(first: ActionSampler, second: ActionSampler) -> Self {
        CandidatePool {
            first,
            second: Some(second),
        }
    }

    /// `count` draws with replacement; a split pool takes ceil(count/2) from
    /// the first source and the rest from the second.
    pub fn draw<R: Rng + ?Sized>(&self, count: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        match &self.second {
            None => out.extend((0..count).map(|_| self.first.sample(rng))),
            Some(second) => {
                let head = count.div_ceil(2);
                out.extend((0..head).map(|_| self.first.sample(rng)));
                out.extend((head..count).map(|_| second.sample(rng)));
            }
        }
    }
}

impl From<&MixedStrategy> for CandidatePool {
    fn from(s: &MixedStrategy) -> Self {
        CandidatePool::single(s.sampler())
    }
}

/// Wraps a policy with precomputed exact deviation values for one player.
pub struct WithValues<'a, P: ?Sized> {
    pub policy: &'a P,
    pub player: usize,
    pub values: &'a [f64],
}

impl<P: JointPolicy + ?Sized> JointPolicy for WithValues<'_, P> {
    fn num_players(&self) -> usize {
        self.policy.num_players()
    }

    fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        self.policy.sample_joint(rng, out)
    }

    fn deviation_values(&self, game: &Game, player: usize) -> Vec<f64> {
        if player == self.player {
            self.values.to_vec()
        } else {
            self.policy.deviation_values(game, player)
        }
    }
}

/// Everything an SBR call drew and computed.
#[derive(Clone, Debug, PartialEq)]
pub struct SbrTrace {
    pub action: usize,
    /// Q̂ of `action`.
    pub value: f64,
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
    /// Base joint profiles; empty in exact mode.
    pub base_profiles: Vec<Vec<usize>>,
}

/// Draws `count` joint profiles from `base`.
pub fn draw_base_profiles<P, R>(base: &P, count: usize, rng: &mut R) -> Vec<Vec<usize>>
where
    P: JointPolicy + ?Sized,
    R: Rng + ?Sized,
{
    (0..count)
        .map(|_| {
            let mut a = vec![0; base.num_players()];
            base.sample_joint(rng, &mut a);
            a
        })
        .collect()
}

/// Index offsets of the opponents' part of each base profile.
pub fn opponent_offsets(game: &Game, player: usize, profiles: &[Vec<usize>]) -> Vec<usize> {
    let stride = game.strides()[player];
    profiles
        .iter()
        .map(|a| game.joint_index(a) - a[player] * stride)
        .collect()
}

/// Mean reward of `action` over the base profiles, summed in draw order.
#[inline]
pub fn score_against(game: &Game, player: usize, action: usize, offsets: &[usize]) -> f64 {
    let base = action * game.strides()[player];
    let mut s = 0.0;
    for &off in offsets {
        s += game.payoff(player, base + off);
    }
    s / offsets.len() as f64
}

/// Position of the chosen candidate.
pub fn select_candidate<R: Rng + ?Sized>(
    candidates: &[usize],
    scores: &[f64],
    cfg: &SbrConfig,
    rng: &mut R,
) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied = |k: &usize| scores[*k] >= max - cfg.tie_tolerance;
    match cfg.tie_break {
        TieBreak::FirstCandidate => (0..candidates.len()).find(tied).expect("nonempty"),
        TieBreak::LowestAction => (0..candidates.len())
            .filter(tied)
            .min_by_key(|&k| candidates[k])
            .expect("nonempty"),
        TieBreak::Random => {
            let ties: Vec<usize> = (0..candidates.len()).filter(tied).collect();
            ties[rng.random_range(0..ties.len())]
        }
    }
}

/// Drops repeated candidates, keeping first occurrences in draw order.
pub fn dedup_in_order(candidates: &mut Vec<usize>) {
    let mut seen = std::collections::HashSet::with_capacity(candidates.len());
    candidates.retain(|a| seen.insert(*a));
}

/// Sampled best response with explicit base profiles, which lets several
/// players share one draw.
pub fn sampled_best_response_with_profiles<R: Rng + ?Sized>(
    game: &Game,
    player: usize,
    base_profiles: Vec<Vec<usize>>,
    candidates: &CandidatePool,
    cfg: &SbrConfig,
    rng: &mut R,
) -> SbrTrace {
    let offsets = opponent_offsets(game, player, &base_profiles);
    let mut cands = Vec::with_capacity(cfg.num_candidates);
    candidates.draw(cfg.num_candidates, rng, &mut cands);
    if cfg.dedup_candidates {
        dedup_in_order(&mut cands);
    }
    let scores: Vec<f64> = cands
        .iter()
        .map(|&a| score_against(game, player, a, &offsets))
        .collect();
    let k = select_candidate(&cands, &scores, cfg, rng);
    SbrTrace {
        action: cands[k],
        value: scores[k],
        candidates: cands,
        scores,
        base_profiles,
    }
}

/// Sampled best response (Monte-Carlo or exact over the base).
///
/// Base profiles are drawn before candidates, so the base stream is the same
/// for every candidate source.
pub fn sampled_best_response_traced<P, R>(
    game: &Game,
    player: usize,
    base: &P,
    candidates: &CandidatePool,
    cfg: &SbrConfig,
    rng: &mut R,
) -> SbrTrace
where
    P: JointPolicy + ?Sized,
    R: Rng + ?Sized,
{
    if cfg.exact_mode {
        let values = base.deviation_values(game, player);
        let mut cands = Vec::with_capacity(cfg.num_candidates);
        candidates.draw(cfg.num_candidates, rng, &mut cands);
        if cfg.dedup_candidates {
            dedup_in_order(&mut cands);
        }
        let scores: Vec<f64> = cands.iter().map(|&a| values[a]).collect();
        let k = select_candidate(&cands, &scores, cfg, rng);
        return SbrTrace {
            action: cands[k],
            value: scores[k],
            candidates: cands,
            scores,
            base_profiles: Vec::new(),
        };
    }
    let profiles = draw_base_profiles(base, cfg.num_base_profiles, rng);
    sampled_best_response_with_profiles(game, player, profiles, candidates, cfg, rng)
}

pub fn sampled_best_response<P, R>(
    game: &Game,
    player: usize,
    base: &P,
    candidates: &CandidatePool,
    cfg: &SbrConfig,
    rng: &mut R,
) -> Result<ResponseResult>
where
    P: JointPolicy + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if base.num_players() != game.num_players() {
        return Err(Error::ArityMismatch {
            expected: game.num_players(),
            got: base.num_players(),
        });
    }
    if player >= game.num_players() {
        return Err(Error::param("player", format!("{player} out of range")));
    }
    let t = sampled_best_response_traced(game, player, base, candidates, cfg, rng);
    Ok(ResponseResult {
        strategy: MixedStrategy::pure(game.num_actions(player), t.action),
        value: t.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, Allocation, BuiltinGame, GameSpec};
    use crate::rng::{stream, Domain};
    use crate::strategy::ProductProfile;

    fn rps() -> Game {
        build_game(&GameSpec::Builtin {
            name: BuiltinGame::Rps,
        })
        .unwrap()
    }

    fn blotto2() -> Game {
        build_game(&GameSpec::blotto(2, 10, 3)).unwrap()
    }

    fn index_of(game: &Game, coins: &[u32]) -> usize {
        let target = Allocation::new(coins.to_vec());
        game.allocations()
            .unwrap()
            .iter()
            .position(|a| *a == target)
            .unwrap()
    }

    #[test]
    fn rps_best_response_to_rock() {
        let g = rps();
        let rock = CorrelationDevice::from_pure(vec![0, 0]);
        let r = exact_best_response(&g, 0, &rock).unwrap();
        assert_eq!(r.action(), Some(1));
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn blotto_best_response_to_all_in() {
        let g = blotto2();
        let all_in = index_of(&g, &[10, 0, 0]);
        let target = CorrelationDevice::from_pure(vec![all_in, all_in]);
        let r = exact_best_response(&g, 0, &target).unwrap();
        assert_eq!(r.value, 1.0);
        let coins = g.allocations().unwrap()[r.action().unwrap()]
            .coins()
            .to_vec();
        assert!(coins[1] > 0 && coins[2] > 0);
    }

    #[test]
    fn maxent_and_logit() {
        let g = rps();
        let uniform = CorrelationDevice::from_product(ProductProfile::uniform(&g));
        let m = maxent_best_response(&g, 0, &uniform).unwrap();
        for p in m.strategy.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let two = maxent_from_values(&[1.0, 0.0, 1.0], 1e-12);
        assert_eq!(two.strategy.probs(), &[0.5, 0.0, 0.5]);
        let single = maxent_from_values(&[0.0, 2.0, 1.0], 1e-12);
        assert_eq!(single.strategy.pure_action(), Some(1));

        let l = logit_from_values(&[1.0, 0.0], 3f64.ln());
        assert!((l.strategy.probs()[0] - 0.75).abs() < 1e-12);
        let flat = logit_from_values(&[3.0, -1.0, 0.5], 0.0);
        for p in flat.strategy.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let sharp = logit_from_values(&[0.0, 1.0, 0.5], 1e6);
        assert!(sharp.strategy.probs()[1] >= 1.0 - 1e-6);
        assert!(logit_response(&g, 0, &uniform, f64::NAN).is_err());
    }

    #[test]
    fn sbr_deterministic_base() {
        let g = blotto2();
        let all_in = index_of(&g, &[10, 0, 0]);
        let split = index_of(&g, &[0, 5, 5]);
        let base = CorrelationDevice::from_pure(vec![all_in, all_in]);
        let pool = CandidatePool::single(ActionSampler::from_probs(
            MixedStrategy::pure(g.num_actions(0), split).probs(),
        ));
        for b in [1, 3, 17] {
            let cfg = SbrConfig::new(b, 4, CandidateSource::Initial, BaseSource::Latest);
            let mut rng = stream(b as u64, Domain::Scratch, &[]);
            let r = sampled_best_response(&g, 0, &base, &pool, &cfg, &mut rng).unwrap();
            assert_eq!(r.action(), Some(split));
            assert_eq!(r.value, 1.0);
        }
    }

    #[test]
    fn sbr_single_candidate_is_returned() {
        let g = blotto2();
        let base = CorrelationDevice::from_product(ProductProfile::uniform(&g));
        let cfg = SbrConfig::new(5, 1, CandidateSource::Initial, BaseSource::Latest);
        let pool = CandidatePool::uniform(g.num_actions(0));
        let mut rng = stream(9, Domain::Scratch, &[]);
        let t = sampled_best_response_traced(&g, 1, &base, &pool, &cfg, &mut rng);
        assert_eq!(t.candidates.len(), 1);
        assert_eq!(t.action, t.candidates[0]);
        let offsets = opponent_offsets(&g, 1, &t.base_profiles);
        assert_eq!(score_against(&g, 1, t.action, &offsets), t.value);
    }

    #[test]
    fn split_pool_sizes() {
        let pool = CandidatePool::split(
            ActionSampler::from_probs(&[1.0, 0.0]),
            ActionSampler::from_probs(&[0.0, 1.0]),
        );
        let mut rng = stream(1, Domain::Scratch, &[]);
        let mut out = Vec::new();
        pool.draw(5, &mut rng, &mut out);
        assert_eq!(out, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn sbr_config_json() {
        let cfg: SbrConfig = serde_json::from_str(
            r#"{"B": 2, "C": 16, "candidates": "initial+latest", "base": "uniform_past", "exact_mode": false}"#,
        )
        .unwrap();
        assert_eq!(cfg.num_base_profiles, 2);
        assert_eq!(cfg.candidates, CandidateSource::InitialLatest);
        assert_eq!(cfg.tie_tolerance, DEFAULT_TIE_TOLERANCE);
        let back: SbrConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<SbrConfig>(
            r#"{"B":1,"C":1,"candidates":"best","base":"latest"}"#
        )
        .is_err());
        assert!(
            SbrConfig::new(0, 1, CandidateSource::Initial, BaseSource::Latest)
                .validate()
                .is_err()
        );
    }
}
