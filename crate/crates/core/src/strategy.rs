//! Mixed strategies, product profiles, correlation devices and policy
//! histories, with exact expectations against a [`Game`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;

/// Sums within this distance of 1 are renormalized; beyond it they are rejected.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Sums within summation rounding of 1 are kept as given, so rescaling is
/// idempotent and serialized policies reload bit-for-bit.
fn needs_rescale(total: f64, len: usize) -> bool {
    (total - 1.0).abs() > 2.0 * len as f64 * f64::EPSILON
}

/// A probability vector over one player's actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStrategy("empty probability vector".into()));
        }
        for (a, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -1e-12 {
                return Err(Error::InvalidStrategy(format!(
                    "probability {p} at action {a}"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidStrategy(format!(
                "probabilities sum to {total}"
            )));
        }
        if needs_rescale(total, probs.len()) {
            for p in &mut probs {
                *p /= total;
            }
        }
        Ok(MixedStrategy { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over zero actions");
        MixedStrategy {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn pure(n: usize, action: usize) -> Self {
        assert!(action < n, "action {action} out of range 0..{n}");
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        MixedStrategy { probs }
    }

    /// Uniform over `support`, which must be nonempty.
    pub fn uniform_over(n: usize, support: &[usize]) -> Self {
        assert!(!support.is_empty(), "empty support");
        let mut probs = vec![0.0; n];
        let w = 1.0 / support.len() as f64;
        for &a in support {
            probs[a] = w;
        }
        MixedStrategy { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(a, _)| a)
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// The action if this strategy is pure.
    pub fn pure_action(&self) -> Option<usize> {
        let mut found = None;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                if found.is_some() {
                    return None;
                }
                found = Some(a);
            }
        }
        found
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = a;
                if u < acc {
                    return a;
                }
            }
        }
        last
    }

    pub fn sampler(&self) -> ActionSampler {
        ActionSampler::from_probs(&self.probs)
    }

    /// Total-variation distance.
    pub fn tv_distance(&self, other: &MixedStrategy) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Self {
        s.probs
    }
}

/// Fast repeated sampling from a fixed distribution over actions.
#[derive(Clone, Debug)]
pub enum ActionSampler {
    Uniform(usize),
    Cumulative(Vec<f64>),
}

impl ActionSampler {
    pub fn from_probs(probs: &[f64]) -> Self {
        let first = probs[0];
        if probs.iter().all(|&p| p == first) {
            return ActionSampler::Uniform(probs.len());
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        ActionSampler::Cumulative(cumulative)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            ActionSampler::Uniform(n) => rng.random_range(0..*n),
            ActionSampler::Cumulative(cum) => {
                let total = *cum.last().expect("nonempty");
                let u = rng.random::<f64>() * total;
                let idx = cum.partition_point(|&c| c <= u);
                // zero-mass tails can leave idx past the last positive entry
                idx.min(cum.len() - 1)
            }
        }
    }
}

/// One independent strategy per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductProfile {
    strategies: Vec<MixedStrategy>,
}

impl ProductProfile {
    pub fn new(strategies: Vec<MixedStrategy>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::InvalidStrategy("profile has no players".into()));
        }
        Ok(ProductProfile { strategies })
    }

    pub fn uniform(game: &Game) -> Self {
        ProductProfile {
            strategies: game
                .action_counts()
                .iter()
                .map(|&n| MixedStrategy::uniform(n))
                .collect(),
        }
    }

    pub fn pure(game: &Game, actions: &[usize]) -> Self {
        ProductProfile {
            strategies: game
                .action_counts()
                .iter()
                .zip(actions)
                .map(|(&n, &a)| MixedStrategy::pure(n, a))
                .collect(),
        }
    }

    /// Every seat plays `strategy`.
    pub fn symmetric(strategy: &MixedStrategy, players: usize) -> Self {
        ProductProfile {
            strategies: vec![strategy.clone(); players],
        }
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.strategies
    }

    pub fn strategy(&self, player: usize) -> &MixedStrategy {
        &self.strategies[player]
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn with_strategy(&self, player: usize, s: MixedStrategy) -> Self {
        let mut out = self.clone();
        out.strategies[player] = s;
        out
    }

    pub fn check(&self, game: &Game) -> Result<()> {
        if self.strategies.len() != game.num_players() {
            return Err(Error::ArityMismatch {
                expected: game.num_players(),
                got: self.strategies.len(),
            });
        }
        for (p, (s, &n)) in self.strategies.iter().zip(game.action_counts()).enumerate() {
            if s.len() != n {
                return Err(Error::InvalidStrategy(format!(
                    "player {p} strategy has {} entries, game has {n} actions",
                    s.len()
                )));
            }
        }
        Ok(())
    }

    /// Mean of the per-seat strategies; meaningful when all seats share an action set.
    pub fn seat_average(&self) -> Result<MixedStrategy> {
        let n = self.strategies[0].len();
        if self.strategies.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidStrategy(
                "seats have different action counts".into(),
            ));
        }
        let k = self.strategies.len() as f64;
        let mut probs = vec![0.0; n];
        for s in &self.strategies {
            for (acc, p) in probs.iter_mut().zip(s.probs()) {
                *acc += p / k;
            }
        }
        MixedStrategy::new(probs)
    }
}

/// A component of a correlation device.
#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    Product(ProductProfile),
    Pure(Vec<usize>),
}

impl Component {
    fn num_players(&self) -> usize {
        match self {
            Component::Product(p) => p.num_players(),
            Component::Pure(a) => a.len(),
        }
    }
}

/// A probability distribution over joint actions, stored as a weighted
/// mixture of product profiles and pure joint actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ComponentDoc>", into = "Vec<ComponentDoc>")]
pub struct CorrelationDevice {
    components: Vec<(f64, Component)>,
    players: usize,
    cumulative: Vec<f64>,
    equal_weights: bool,
}

impl CorrelationDevice {
    pub fn new(components: Vec<(f64, Component)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidStrategy("device has no components".into()));
        };
        let players = first.1.num_players();
        if players == 0 {
            return Err(Error::InvalidStrategy(
                "device component has no players".into(),
            ));
        }
        let mut total = 0.0;
        for (w, c) in &components {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidStrategy(format!("component weight {w}")));
            }
            if c.num_players() != players {
                return Err(Error::ArityMismatch {
                    expected: players,
                    got: c.num_players(),
                });
            }
            total += w;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidStrategy(format!(
                "device weights sum to {total}"
            )));
        }
        let mut components = components;
        if needs_rescale(total, components.len()) {
            for (w, _) in &mut components {
                *w /= total;
            }
        }
        Ok(Self::assemble(components, players))
    }

    fn assemble(components: Vec<(f64, Component)>, players: usize) -> Self {
        let first = components[0].0;
        let equal_weights = components.iter().all(|(w, _)| *w == first);
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|(w, _)| {
                acc += w;
                acc
            })
            .collect();
        CorrelationDevice {
            components,
            players,
            cumulative,
            equal_weights,
        }
    }

    pub fn from_product(profile: ProductProfile) -> Self {
        let players = profile.num_players();
        Self::assemble(vec![(1.0, Component::Product(profile))], players)
    }

    pub fn from_pure(actions: Vec<usize>) -> Self {
        let players = actions.len();
        assert!(players > 0, "empty joint action");
        Self::assemble(vec![(1.0, Component::Pure(actions))], players)
    }

    /// Empirical distribution of equally weighted joint actions.
    pub fn empirical(samples: Vec<Vec<usize>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidStrategy("no samples".into()));
        }
        let w = 1.0 / samples.len() as f64;
        Self::new(
            samples
                .into_iter()
                .map(|a| (w, Component::Pure(a)))
                .collect(),
        )
    }

    pub fn components(&self) -> &[(f64, Component)] {
        &self.components
    }

    pub fn num_players(&self) -> usize {
        self.players
    }

    pub fn check(&self, game: &Game) -> Result<()> {
        if self.players != game.num_players() {
            return Err(Error::ArityMismatch {
                expected: game.num_players(),
                got: self.players,
            });
        }
        for (_, c) in &self.components {
            match c {
                Component::Product(p) => p.check(game)?,
                Component::Pure(a) => game.check_actions(a)?,
            }
        }
        Ok(())
    }

    /// The single product profile, if the device is one.
    pub fn as_product(&self) -> Option<&ProductProfile> {
        match self.components.as_slice() {
            [(_, Component::Product(p))] => Some(p),
            _ => None,
        }
    }

    /// Marginal distribution of one player's action.
    pub fn marginal(&self, player: usize, num_actions: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_actions];
        for (w, c) in &self.components {
            match c {
                Component::Product(p) => {
                    for (o, q) in out.iter_mut().zip(p.strategy(player).probs()) {
                        *o += w * q;
                    }
                }
                Component::Pure(a) => out[a[player]] += w,
            }
        }
        out
    }

    /// Product of this device's per-player marginals.
    pub fn marginals(&self, game: &Game) -> ProductProfile {
        ProductProfile {
            strategies: (0..self.players)
                .map(|p| normalized(self.marginal(p, game.num_actions(p))))
                .collect(),
        }
    }

    fn pick_component<R: Rng + ?Sized>(&self, rng: &mut R) -> &Component {
        let idx = if self.components.len() == 1 {
            0
        } else if self.equal_weights {
            rng.random_range(0..self.components.len())
        } else {
            let total = *self.cumulative.last().expect("nonempty");
            let u = rng.random::<f64>() * total;
            self.cumulative
                .partition_point(|&c| c <= u)
                .min(self.components.len() - 1)
        };
        &self.components[idx].1
    }

    /// Dense joint distribution; only sensible for small games.
    pub fn to_joint_distribution(&self, game: &Game) -> Vec<f64> {
        let mut out = vec![0.0; game.joint_actions()];
        let mut a = vec![0usize; game.num_players()];
        for (w, c) in &self.components {
            match c {
                Component::Pure(x) => out[game.joint_index(x)] += w,
                Component::Product(p) => {
                    for (j, o) in out.iter_mut().enumerate() {
                        game.decode(j, &mut a);
                        let prob: f64 = a
                            .iter()
                            .enumerate()
                            .map(|(pl, &ai)| p.strategy(pl).probs()[ai])
                            .product();
                        *o += w * prob;
                    }
                }
            }
        }
        out
    }
}

fn normalized(mut v: Vec<f64>) -> MixedStrategy {
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x = (*x / total).max(0.0);
    }
    MixedStrategy { probs: v }
}

/// Wire form of a device component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub players: Option<Vec<MixedStrategy>>,
}

impl TryFrom<Vec<ComponentDoc>> for CorrelationDevice {
    type Error = Error;

    fn try_from(docs: Vec<ComponentDoc>) -> Result<Self> {
        let comps = docs
            .into_iter()
            .map(|d| match (d.actions, d.players) {
                (Some(a), None) => Ok((d.weight, Component::Pure(a))),
                (None, Some(p)) => Ok((d.weight, Component::Product(ProductProfile::new(p)?))),
                _ => Err(Error::InvalidStrategy(
                    "component needs exactly one of `actions` or `players`".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        CorrelationDevice::new(comps)
    }
}

impl From<CorrelationDevice> for Vec<ComponentDoc> {
    fn from(d: CorrelationDevice) -> Self {
        d.components
            .into_iter()
            .map(|(weight, c)| match c {
                Component::Pure(a) => ComponentDoc {
                    weight,
                    actions: Some(a),
                    players: None,
                },
                Component::Product(p) => ComponentDoc {
                    weight,
                    actions: None,
                    players: Some(p.strategies),
                },
            })
            .collect()
    }
}

/// Something opponents' joint actions can be drawn from and evaluated against.
pub trait JointPolicy {
    fn num_players(&self) -> usize;

    /// Writes one joint action (all players) into `out`.
    fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]);

    /// Exact expected reward of each of `player`'s actions, with the other
    /// players drawn from this policy.
    fn deviation_values(&self, game: &Game, player: usize) -> Vec<f64>;
}

impl JointPolicy for CorrelationDevice {
    fn num_players(&self) -> usize {
        self.players
    }

    fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        match self.pick_component(rng) {
            Component::Pure(a) => out.copy_from_slice(a),
            Component::Product(p) => {
                for (o, s) in out.iter_mut().zip(p.strategies()) {
                    *o = s.sample(rng);
                }
            }
        }
    }

    fn deviation_values(&self, game: &Game, player: usize) -> Vec<f64> {
        deviation_and_value(game, player, self).0
    }
}

impl JointPolicy for ProductProfile {
    fn num_players(&self) -> usize {
        self.strategies.len()
    }

    fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strategies) {
            *o = s.sample(rng);
        }
    }

    fn deviation_values(&self, game: &Game, player: usize) -> Vec<f64> {
        let mut out = vec![0.0; game.num_actions(player)];
        accumulate_product(game, player, self, 1.0, &mut out);
        out
    }
}

/// Adds `weight * E[r_player(a, x_-player)]` for every action `a` into `out`
/// and returns `weight * E_x[r_player]`.
///
/// Opponents are looped in index order over their supports, building the
/// (probability, index offset) list of opponent joint actions, so the
/// summation order is fixed.
pub(crate) fn accumulate_product(
    game: &Game,
    player: usize,
    profile: &ProductProfile,
    weight: f64,
    out: &mut [f64],
) -> f64 {
    let strides = game.strides();
    let mut partial: Vec<(f64, usize)> = vec![(1.0, 0)];
    for (j, s) in profile.strategies().iter().enumerate() {
        if j == player {
            continue;
        }
        let mut next = Vec::with_capacity(partial.len() * s.support_size());
        for &(w, off) in &partial {
            for (a, &p) in s.probs().iter().enumerate() {
                if p > 0.0 {
                    next.push((w * p, off + a * strides[j]));
                }
            }
        }
        partial = next;
    }
    let own = profile.strategy(player).probs();
    let stride = strides[player];
    let mut value = 0.0;
    for (a, slot) in out.iter_mut().enumerate() {
        let base = a * stride;
        let mut s = 0.0;
        for &(w, off) in &partial {
            s += w * game.payoff(player, base + off);
        }
        *slot += weight * s;
        value += weight * own[a] * s;
    }
    value
}

/// Adds `weight * r_player(a', a_-player)` for every `a'` and returns `weight * r_player(a)`.
pub(crate) fn accumulate_pure(
    game: &Game,
    player: usize,
    actions: &[usize],
    weight: f64,
    out: &mut [f64],
) -> f64 {
    let stride = game.strides()[player];
    let joint = game.joint_index(actions);
    let base = joint - actions[player] * stride;
    for (a, slot) in out.iter_mut().enumerate() {
        *slot += weight * game.payoff(player, base + a * stride);
    }
    weight * game.payoff(player, joint)
}

/// Deviation values of `player` against `device` and the player's expected
/// reward under it. Components are accumulated one by one.
pub fn deviation_and_value(
    game: &Game,
    player: usize,
    device: &CorrelationDevice,
) -> (Vec<f64>, f64) {
    let mut out = vec![0.0; game.num_actions(player)];
    let mut value = 0.0;
    for (w, c) in device.components() {
        value += match c {
            Component::Product(p) => accumulate_product(game, player, p, *w, &mut out),
            Component::Pure(a) => accumulate_pure(game, player, a, *w, &mut out),
        };
    }
    (out, value)
}

/// Expected reward of each of `player`'s actions against the joint
/// distribution of the other players under `opponents`.
pub fn expected_reward_vector(
    game: &Game,
    player: usize,
    opponents: &CorrelationDevice,
) -> Result<Vec<f64>> {
    opponents.check(game)?;
    if player >= game.num_players() {
        return Err(Error::param("player", format!("{player} out of range")));
    }
    Ok(deviation_and_value(game, player, opponents).0)
}

/// Expected reward of every player under `device`.
pub fn expected_joint_reward(game: &Game, device: &CorrelationDevice) -> Result<Vec<f64>> {
    device.check(game)?;
    let mut out = vec![0.0; game.num_players()];
    let mut rewards = vec![0.0; game.num_players()];
    for (w, c) in device.components() {
        match c {
            Component::Pure(a) => {
                game.payoffs(game.joint_index(a), &mut rewards);
                for (o, r) in out.iter_mut().zip(&rewards) {
                    *o += w * r;
                }
            }
            Component::Product(p) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut scratch = vec![0.0; game.num_actions(i)];
                    *o += accumulate_product(game, i, p, *w, &mut scratch);
                }
            }
        }
    }
    Ok(out)
}

pub fn sample_joint<R: Rng + ?Sized>(device: &CorrelationDevice, rng: &mut R) -> Vec<usize> {
    let mut out = vec![0; device.num_players()];
    device.sample_joint(rng, &mut out);
    out
}

/// Ordered sequence of per-iteration policies, index `d = 0..`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyHistory {
    checkpoints: Vec<CorrelationDevice>,
}

impl PolicyHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, policy: CorrelationDevice) {
        self.checkpoints.push(policy);
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn get(&self, d: usize) -> Option<&CorrelationDevice> {
        self.checkpoints.get(d)
    }

    pub fn checkpoints(&self) -> &[CorrelationDevice] {
        &self.checkpoints
    }

    pub fn truncate(&mut self, len: usize) {
        self.checkpoints.truncate(len);
    }
}

impl FromIterator<CorrelationDevice> for PolicyHistory {
    fn from_iter<I: IntoIterator<Item = CorrelationDevice>>(iter: I) -> Self {
        PolicyHistory {
            checkpoints: iter.into_iter().collect(),
        }
    }
}

/// Uniform mixture of the first `t` checkpoints.
///
/// Components are kept whole, so sampling draws every player from the same
/// checkpoint and correlations between opponents survive.
pub fn average_history(history: &PolicyHistory, t: usize) -> Result<CorrelationDevice> {
    if t == 0 || t > history.len() {
        return Err(Error::EmptyPrefix {
            t,
            len: history.len(),
        });
    }
    let scale = 1.0 / t as f64;
    let mut components = Vec::new();
    for device in &history.checkpoints[..t] {
        for (w, c) in device.components() {
            components.push((w * scale, c.clone()));
        }
    }
    let players = components[0].1.num_players();
    Ok(CorrelationDevice::assemble(components, players))
}

/// Running mean of vectors, updated one observation at a time.
#[derive(Clone, Debug)]
pub struct IncrementalMean {
    mean: Vec<f64>,
    count: usize,
}

impl IncrementalMean {
    pub fn new(len: usize) -> Self {
        IncrementalMean {
            mean: vec![0.0; len],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for (m, v) in self.mean.iter_mut().zip(x) {
            *m += (v - *m) / k;
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// On-disk checkpoint: `{"iteration": d, "players": [[p...]...]}` plus an
/// optional full device for policies that are not products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointDoc {
    pub iteration: usize,
    pub players: Vec<MixedStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<CorrelationDevice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl CheckpointDoc {
    pub fn from_device(game: &Game, iteration: usize, device: &CorrelationDevice) -> Self {
        let marginals = device.marginals(game);
        CheckpointDoc {
            iteration,
            players: marginals.strategies,
            device: if device.as_product().is_some() {
                None
            } else {
                Some(device.clone())
            },
            config_hash: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(text)?;
        if doc.players.is_empty() {
            return Err(Error::InvalidStrategy("checkpoint has no players".into()));
        }
        if let Some(d) = &doc.device {
            if d.num_players() != doc.players.len() {
                return Err(Error::ArityMismatch {
                    expected: doc.players.len(),
                    got: d.num_players(),
                });
            }
        }
        Ok(doc)
    }

    pub fn profile(&self) -> ProductProfile {
        ProductProfile {
            strategies: self.players.clone(),
        }
    }

    pub fn to_device(&self) -> CorrelationDevice {
        match &self.device {
            Some(d) => d.clone(),
            None => CorrelationDevice::from_product(self.profile()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, BuiltinGame, GameSpec};
    use crate::rng::{stream, Domain};

    fn rps() -> Game {
        build_game(&GameSpec::Builtin {
            name: BuiltinGame::Rps,
        })
        .unwrap()
    }

    fn mp() -> Game {
        build_game(&GameSpec::Builtin {
            name: BuiltinGame::MatchingPennies,
        })
        .unwrap()
    }

    #[test]
    fn strategy_normalization() {
        let s = MixedStrategy::new(vec![0.5, 0.5 + 1e-10]).unwrap();
        assert!((s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(MixedStrategy::new(vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(vec![1.5, -0.5]).is_err());
        assert!(MixedStrategy::new(vec![]).is_err());
        assert!(MixedStrategy::new(vec![f64::NAN, 1.0]).is_err());
        assert_eq!(MixedStrategy::pure(3, 1).pure_action(), Some(1));
        assert_eq!(MixedStrategy::uniform(3).pure_action(), None);
    }

    #[test]
    fn rps_reward_vectors() {
        let g = rps();
        let rock = CorrelationDevice::from_pure(vec![0, 0]);
        assert_eq!(
            expected_reward_vector(&g, 0, &rock).unwrap(),
            vec![0.0, 1.0, -1.0]
        );
        let uniform = CorrelationDevice::from_product(ProductProfile::uniform(&g));
        for v in expected_reward_vector(&g, 0, &uniform).unwrap() {
            assert!(v.abs() < 1e-15);
        }
        let joint = expected_joint_reward(&g, &uniform).unwrap();
        assert!(joint.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn matching_pennies_pure_joint() {
        let g = mp();
        let hh = CorrelationDevice::from_pure(vec![0, 0]);
        assert_eq!(expected_joint_reward(&g, &hh).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let g = rps();
        let three = CorrelationDevice::from_pure(vec![0, 0, 0]);
        assert!(matches!(
            expected_reward_vector(&g, 0, &three),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(expected_joint_reward(&g, &three).is_err());
        let out_of_range = CorrelationDevice::from_pure(vec![0, 5]);
        assert!(expected_reward_vector(&g, 0, &out_of_range).is_err());
    }

    #[test]
    fn average_history_prefixes() {
        let g = mp();
        let history: PolicyHistory = vec![
            CorrelationDevice::from_pure(vec![0, 0]),
            CorrelationDevice::from_pure(vec![1, 1]),
        ]
        .into_iter()
        .collect();
        let one = average_history(&history, 1).unwrap();
        assert_eq!(one, history.checkpoints()[0]);
        assert!(matches!(
            average_history(&history, 0),
            Err(Error::EmptyPrefix { .. })
        ));
        assert!(average_history(&history, 3).is_err());

        // correlated mixture vs product of marginals
        let mix = average_history(&history, 2).unwrap();
        let (dev, val) = deviation_and_value(&g, 1, &mix);
        assert_eq!(dev, vec![0.0, 0.0]);
        assert_eq!(val, -1.0);
        let product = CorrelationDevice::from_product(mix.marginals(&g));
        let (dev_p, val_p) = deviation_and_value(&g, 1, &product);
        assert_eq!(dev_p, vec![0.0, 0.0]);
        assert_eq!(val_p, 0.0);
    }

    #[test]
    fn identical_checkpoints_average_to_one() {
        let g = rps();
        let p = ProductProfile::new(vec![
            MixedStrategy::new(vec![0.2, 0.3, 0.5]).unwrap(),
            MixedStrategy::new(vec![0.6, 0.1, 0.3]).unwrap(),
        ])
        .unwrap();
        let single = CorrelationDevice::from_product(p);
        let history: PolicyHistory = std::iter::repeat_n(single.clone(), 4).collect();
        let avg = average_history(&history, 4).unwrap();
        for i in 0..2 {
            let a = expected_reward_vector(&g, i, &avg).unwrap();
            let b = expected_reward_vector(&g, i, &single).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_device_sampling() {
        let mut rng = stream(1, Domain::Scratch, &[]);
        let pure = CorrelationDevice::from_pure(vec![2, 1]);
        for _ in 0..10 {
            assert_eq!(sample_joint(&pure, &mut rng), vec![2, 1]);
        }
        let weighted = CorrelationDevice::new(vec![
            (1.0, Component::Pure(vec![0, 0])),
            (0.0, Component::Pure(vec![1, 1])),
        ])
        .unwrap();
        for _ in 0..100 {
            assert_eq!(sample_joint(&weighted, &mut rng), vec![0, 0]);
        }
    }

    #[test]
    fn device_json_round_trip() {
        let d = CorrelationDevice::new(vec![
            (0.25, Component::Pure(vec![0, 1])),
            (
                0.75,
                Component::Product(
                    ProductProfile::new(vec![MixedStrategy::uniform(2), MixedStrategy::pure(2, 1)])
                        .unwrap(),
                ),
            ),
        ])
        .unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: CorrelationDevice = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<CorrelationDevice>(r#"[{"weight":1.0}]"#).is_err());
        assert!(
            serde_json::from_str::<CorrelationDevice>(r#"[{"weight":0.5,"actions":[0]}]"#).is_err()
        );
    }

    #[test]
    fn checkpoint_doc_schema() {
        let text = r#"{"iteration": 3, "players": [[0.5, 0.5], [1.0, 0.0]]}"#;
        let doc = CheckpointDoc::from_json(text).unwrap();
        assert_eq!(doc.iteration, 3);
        assert_eq!(doc.profile().strategy(1).pure_action(), Some(0));
        assert!(CheckpointDoc::from_json(r#"{"iteration": 0, "players": []}"#).is_err());
        assert!(CheckpointDoc::from_json(r#"{"iteration": 0, "players": [[0.7, 0.7]]}"#).is_err());
    }

    #[test]
    fn sampler_matches_distribution_support() {
        let mut rng = stream(3, Domain::Scratch, &[]);
        let s = ActionSampler::from_probs(&[0.0, 0.25, 0.0, 0.75, 0.0]);
        let mut counts = [0usize; 5];
        for _ in 0..4000 {
            counts[s.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[0] + counts[2] + counts[4], 0);
        assert!(counts[3] > counts[1]);
    }
}
