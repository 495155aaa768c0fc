//! Normal-form games: action enumeration, Blotto payoff rules and the payoff
//! oracle shared by every other module.
//!
//! Joint actions are addressed by a row-major index with player 0 as the most
//! significant digit: `joint = sum_j a_j * stride_j`, where
//! `stride_j = prod_{k > j} |A_k|`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the number of Blotto allocations per player.
pub const DEFAULT_ACTION_CAP: usize = 1 << 24;

/// Games with at most this many joint actions are tabulated up front.
pub const DEFAULT_DENSE_CAP: usize = 1 << 26;

const ZERO_SUM_TOL: f64 = 1e-12;
const MAX_BLOTTO_PLAYERS: usize = 32;
const MAX_TABLE_PLAYERS: usize = 8;

/// Parameters of Blotto(n, c, f): `n` players each split `c` coins over `f` fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlottoParams {
    pub n: usize,
    pub c: u32,
    pub f: usize,
}

impl BlottoParams {
    pub fn new(n: usize, c: u32, f: usize) -> Result<Self> {
        let params = BlottoParams { n, c, f };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidGame(format!(
                "Blotto needs at least 2 players, got {}",
                self.n
            )));
        }
        if self.n > MAX_BLOTTO_PLAYERS {
            return Err(Error::InvalidGame(format!(
                "Blotto supports at most {MAX_BLOTTO_PLAYERS} players, got {}",
                self.n
            )));
        }
        if self.f == 0 {
            return Err(Error::InvalidGame("Blotto needs at least one field".into()));
        }
        Ok(())
    }

    /// Number of allocations per player, `binomial(c + f - 1, f - 1)`.
    pub fn action_count(&self) -> u128 {
        composition_count(self.c, self.f)
    }
}

impl fmt::Display for BlottoParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "blotto({},{},{})", self.n, self.c, self.f)
    }
}

/// Number of compositions of `c` into `f` nonnegative parts; saturates at `u128::MAX`.
pub fn composition_count(c: u32, f: usize) -> u128 {
    if f == 0 {
        return u128::from(c == 0);
    }
    // binomial(c + f - 1, k) with k = min(c, f - 1), multiplicative form.
    let n = u128::from(c) + f as u128 - 1;
    let k = u128::from(c).min(f as u128 - 1);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc * (n - k + i) is divisible by i at every step.
        match acc.checked_mul(n - k + i) {
            Some(v) => acc = v / i,
            None => return u128::MAX,
        }
    }
    acc
}

/// One player's allocation of coins over fields.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(Vec<u32>);

impl Allocation {
    pub fn new(coins: Vec<u32>) -> Self {
        Allocation(coins)
    }

    pub fn coins(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&x| u64::from(x)).sum()
    }

    fn check(&self, params: &BlottoParams) -> Result<()> {
        if self.0.len() != params.f {
            return Err(Error::InvalidAllocation(format!(
                "expected {} fields, got {}",
                params.f,
                self.0.len()
            )));
        }
        if self.total() != u64::from(params.c) {
            return Err(Error::InvalidAllocation(format!(
                "coins sum to {}, expected {}",
                self.total(),
                params.c
            )));
        }
        Ok(())
    }
}

impl From<Vec<u32>> for Allocation {
    fn from(v: Vec<u32>) -> Self {
        Allocation(v)
    }
}

/// All allocations of `c` coins over `f` fields in lexicographic ascending order.
pub fn enumerate_allocations(c: u32, f: usize) -> Result<Vec<Allocation>> {
    enumerate_allocations_capped(c, f, DEFAULT_ACTION_CAP)
}

pub fn enumerate_allocations_capped(c: u32, f: usize, cap: usize) -> Result<Vec<Allocation>> {
    if f == 0 {
        return Err(Error::InvalidGame("field count must be at least 1".into()));
    }
    let count = composition_count(c, f);
    if count > cap as u128 {
        return Err(Error::ActionSpaceTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; f];
    fill_compositions(&mut current, 0, c, &mut out);
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

fn fill_compositions(current: &mut [u32], field: usize, remaining: u32, out: &mut Vec<Allocation>) {
    if field + 1 == current.len() {
        current[field] = remaining;
        out.push(Allocation(current.to_vec()));
        return;
    }
    for x in 0..=remaining {
        current[field] = x;
        fill_compositions(current, field + 1, remaining - x, out);
    }
}

/// Bitmask of the players tied for the most fields won.
fn blotto_winners<'a, I>(allocations: I, n: usize, f: usize) -> u32
where
    I: Fn(usize) -> &'a [u32],
{
    let mut won = [0u32; MAX_BLOTTO_PLAYERS];
    for field in 0..f {
        let mut best = 0u32;
        let mut best_player = usize::MAX;
        let mut tied = false;
        for p in 0..n {
            let coins = allocations(p)[field];
            if best_player == usize::MAX || coins > best {
                best = coins;
                best_player = p;
                tied = false;
            } else if coins == best {
                tied = true;
            }
        }
        if !tied {
            won[best_player] += 1;
        }
    }
    let most = won[..n].iter().copied().max().unwrap_or(0);
    let mut mask = 0u32;
    for (p, &w) in won[..n].iter().enumerate() {
        if w == most {
            mask |= 1 << p;
        }
    }
    mask
}

/// Reward of `player` given the winners mask.
fn blotto_reward(mask: u32, n: usize, player: usize) -> f64 {
    let winners = mask.count_ones() as usize;
    if winners == n {
        0.0
    } else if mask & (1 << player) != 0 {
        1.0 / winners as f64
    } else {
        -1.0 / (n - winners) as f64
    }
}

/// Blotto rewards for one allocation per player.
///
/// Fields go to the unique largest contributor and are drawn on ties. The +1
/// is split among everyone tied for most fields won, everyone else splits the
/// -1, and an n-way tie pays zero.
pub fn blotto_payoff(params: &BlottoParams, profile: &[Allocation]) -> Result<Vec<f64>> {
    params.validate()?;
    if profile.len() != params.n {
        return Err(Error::ArityMismatch {
            expected: params.n,
            got: profile.len(),
        });
    }
    for a in profile {
        a.check(params)?;
    }
    let mask = blotto_winners(|p| profile[p].coins(), params.n, params.f);
    Ok((0..params.n)
        .map(|p| blotto_reward(mask, params.n, p))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinGame {
    Rps,
    MatchingPennies,
}

impl BuiltinGame {
    fn tensor(self) -> DenseTensor {
        match self {
            // rock, paper, scissors
            BuiltinGame::Rps => {
                let row = [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]];
                let mut payoffs = Vec::with_capacity(9);
                for r in row {
                    for v in r {
                        payoffs.push(vec![v, -v]);
                    }
                }
                DenseTensor {
                    action_counts: vec![3, 3],
                    payoffs,
                }
            }
            // heads, tails; player 0 wins on a match
            BuiltinGame::MatchingPennies => DenseTensor {
                action_counts: vec![2, 2],
                payoffs: vec![
                    vec![1.0, -1.0],
                    vec![-1.0, 1.0],
                    vec![-1.0, 1.0],
                    vec![1.0, -1.0],
                ],
            },
        }
    }
}

/// Explicit payoff tensor: one reward vector per joint action, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseTensor {
    pub action_counts: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
}

/// Serializable description of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Blotto { n: usize, c: u32, f: usize },
    Dense { tensor: DenseTensor },
    Builtin { name: BuiltinGame },
}

impl GameSpec {
    pub fn blotto(n: usize, c: u32, f: usize) -> Self {
        GameSpec::Blotto { n, c, f }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn label(&self) -> String {
        match self {
            GameSpec::Blotto { n, c, f } => format!("blotto({n},{c},{f})"),
            GameSpec::Dense { tensor } => format!(
                "dense({})",
                tensor
                    .action_counts
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("x")
            ),
            GameSpec::Builtin { name } => match name {
                BuiltinGame::Rps => "rps".into(),
                BuiltinGame::MatchingPennies => "matching_pennies".into(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Dense,
    LazyBlotto,
    Builtin,
}

#[derive(Clone, Copy, Debug)]
pub struct GameOptions {
    pub action_cap: usize,
    pub dense_cap: usize,
}

impl Default for GameOptions {
    fn default() -> Self {
        GameOptions {
            action_cap: DEFAULT_ACTION_CAP,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Debug)]
enum Backend {
    Dense(Vec<f64>),
    Blotto(BlottoBackend),
}

#[derive(Debug)]
struct BlottoBackend {
    params: BlottoParams,
    allocations: Vec<Allocation>,
    /// Winners mask per joint action; `None` means evaluate lazily.
    table: Option<Vec<u8>>,
    /// `lut[mask * n + player]`, only for tabulated games.
    lut: Vec<f64>,
}

impl BlottoBackend {
    fn mask_for(&self, actions: &[usize]) -> u32 {
        blotto_winners(
            |p| self.allocations[actions[p]].coins(),
            self.params.n,
            self.params.f,
        )
    }
}

/// Payoff oracle for an n-player normal-form game.
///
/// Payoff evaluation is pure, so a `Game` can be shared across threads.
#[derive(Debug)]
pub struct Game {
    players: usize,
    action_counts: Vec<usize>,
    strides: Vec<usize>,
    joint: usize,
    backend: Backend,
    kind: BackendKind,
    zero_sum: bool,
    symmetric: bool,
    label: String,
}

/// Per-player action counts and the joint action count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorStats {
    pub action_counts: Vec<usize>,
    pub joint_actions: u128,
}

pub fn build_game(spec: &GameSpec) -> Result<Game> {
    build_game_with(spec, GameOptions::default())
}

pub fn build_game_with(spec: &GameSpec, opts: GameOptions) -> Result<Game> {
    match spec {
        GameSpec::Blotto { n, c, f } => Game::blotto_with(BlottoParams::new(*n, *c, *f)?, opts),
        GameSpec::Dense { tensor } => Game::from_tensor_with(tensor.clone(), opts),
        GameSpec::Builtin { name } => {
            let mut g = Game::from_tensor_with(name.tensor(), opts)?;
            g.kind = BackendKind::Builtin;
            g.label = spec.label();
            Ok(g)
        }
    }
}

pub fn payoff_tensor_stats(game: &Game) -> TensorStats {
    TensorStats {
        action_counts: game.action_counts.clone(),
        joint_actions: game.action_counts.iter().map(|&c| c as u128).product(),
    }
}

fn strides_for(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; counts.len()];
    for j in (0..counts.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * counts[j + 1];
    }
    strides
}

fn checked_joint(counts: &[usize]) -> u128 {
    counts
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
        .unwrap_or(u128::MAX)
}

impl Game {
    pub fn blotto(params: BlottoParams) -> Result<Self> {
        Self::blotto_with(params, GameOptions::default())
    }

    pub fn blotto_with(params: BlottoParams, opts: GameOptions) -> Result<Self> {
        params.validate()?;
        let allocations = enumerate_allocations_capped(params.c, params.f, opts.action_cap)?;
        let counts = vec![allocations.len(); params.n];
        let joint128 = checked_joint(&counts);
        if joint128 > usize::MAX as u128 / 2 {
            return Err(Error::TensorTooLarge {
                entries: joint128,
                cap: usize::MAX / 2,
            });
        }
        let joint = joint128 as usize;
        let strides = strides_for(&counts);
        let mut backend = BlottoBackend {
            params,
            allocations,
            table: None,
            lut: Vec::new(),
        };
        let tabulate = joint <= opts.dense_cap && params.n <= MAX_TABLE_PLAYERS;
        if tabulate {
            let n = params.n;
            backend.lut = (0..1usize << n)
                .flat_map(|mask| (0..n).map(move |p| blotto_reward(mask as u32, n, p)))
                .collect();
            let mut table = Vec::with_capacity(joint);
            let mut actions = vec![0usize; n];
            for _ in 0..joint {
                table.push(backend.mask_for(&actions) as u8);
                // odometer increment, last player fastest
                for p in (0..n).rev() {
                    actions[p] += 1;
                    if actions[p] < counts[p] {
                        break;
                    }
                    actions[p] = 0;
                }
            }
            backend.table = Some(table);
        }
        Ok(Game {
            players: params.n,
            action_counts: counts,
            strides,
            joint,
            kind: if tabulate {
                BackendKind::Dense
            } else {
                BackendKind::LazyBlotto
            },
            backend: Backend::Blotto(backend),
            zero_sum: true,
            symmetric: true,
            label: params.to_string(),
        })
    }

    pub fn from_tensor(tensor: DenseTensor) -> Result<Self> {
        Self::from_tensor_with(tensor, GameOptions::default())
    }

    pub fn from_tensor_with(tensor: DenseTensor, opts: GameOptions) -> Result<Self> {
        let n = tensor.action_counts.len();
        if n == 0 {
            return Err(Error::InvalidGame("tensor has no players".into()));
        }
        if tensor.action_counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidGame(
                "every player needs at least one action".into(),
            ));
        }
        let joint128 = checked_joint(&tensor.action_counts);
        let entries = joint128.saturating_mul(n as u128);
        if entries > opts.dense_cap as u128 {
            return Err(Error::TensorTooLarge {
                entries,
                cap: opts.dense_cap,
            });
        }
        let joint = joint128 as usize;
        if tensor.payoffs.len() != joint {
            return Err(Error::InvalidGame(format!(
                "tensor has {} joint entries, expected {joint}",
                tensor.payoffs.len()
            )));
        }
        let mut flat = Vec::with_capacity(joint * n);
        for (idx, row) in tensor.payoffs.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGame(format!(
                    "joint entry {idx} has {} rewards, expected {n}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "joint entry {idx} has non-finite reward {bad}"
                )));
            }
            flat.extend_from_slice(row);
        }
        let zero_sum = flat
            .chunks(n)
            .all(|r| r.iter().sum::<f64>().abs() <= ZERO_SUM_TOL);
        let strides = strides_for(&tensor.action_counts);
        let mut game = Game {
            players: n,
            action_counts: tensor.action_counts,
            strides,
            joint,
            backend: Backend::Dense(flat),
            kind: BackendKind::Dense,
            zero_sum,
            symmetric: false,
            label: String::new(),
        };
        game.symmetric = game.check_symmetric();
        game.label = format!(
            "dense({})",
            game.action_counts
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("x")
        );
        Ok(game)
    }

    /// Two-player game from row and column payoff matrices.
    pub fn bimatrix(row: &[Vec<f64>], col: &[Vec<f64>]) -> Result<Self> {
        let m = row.len();
        let k = row.first().map_or(0, |r| r.len());
        if col.len() != m || row.iter().chain(col).any(|r| r.len() != k) {
            return Err(Error::InvalidGame(
                "payoff matrices have mismatched shapes".into(),
            ));
        }
        let mut payoffs = Vec::with_capacity(m * k);
        for i in 0..m {
            for j in 0..k {
                payoffs.push(vec![row[i][j], col[i][j]]);
            }
        }
        Self::from_tensor(DenseTensor {
            action_counts: vec![m, k],
            payoffs,
        })
    }

    /// Invariance under every adjacent seat swap (which generate all permutations).
    fn check_symmetric(&self) -> bool {
        let n = self.players;
        if n < 2 {
            return true;
        }
        if self
            .action_counts
            .iter()
            .any(|&c| c != self.action_counts[0])
        {
            return false;
        }
        let mut a = vec![0usize; n];
        let mut swapped = vec![0usize; n];
        for joint in 0..self.joint {
            self.decode(joint, &mut a);
            for k in 0..n - 1 {
                swapped.copy_from_slice(&a);
                swapped.swap(k, k + 1);
                let other = self.joint_index(&swapped);
                for p in 0..n {
                    let q = if p == k {
                        k + 1
                    } else if p == k + 1 {
                        k
                    } else {
                        p
                    };
                    if (self.payoff(p, joint) - self.payoff(q, other)).abs() > ZERO_SUM_TOL {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn num_players(&self) -> usize {
        self.players
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.action_counts[player]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn joint_actions(&self) -> usize {
        self.joint
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.kind
    }

    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }

    /// Payoffs are equivariant under any permutation of seats.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn blotto_params(&self) -> Option<&BlottoParams> {
        match &self.backend {
            Backend::Blotto(b) => Some(&b.params),
            Backend::Dense(_) => None,
        }
    }

    pub fn allocations(&self) -> Option<&[Allocation]> {
        match &self.backend {
            Backend::Blotto(b) => Some(&b.allocations),
            Backend::Dense(_) => None,
        }
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.strides)
            .map(|(&a, &s)| a * s)
            .sum()
    }

    pub fn decode(&self, mut joint: usize, out: &mut [usize]) {
        for (p, slot) in out.iter_mut().enumerate() {
            let s = self.strides[p];
            *slot = joint / s;
            joint %= s;
        }
    }

    /// Reward of `player` at a joint action index.
    #[inline]
    pub fn payoff(&self, player: usize, joint: usize) -> f64 {
        match &self.backend {
            Backend::Dense(flat) => flat[joint * self.players + player],
            Backend::Blotto(b) => match &b.table {
                Some(table) => b.lut[table[joint] as usize * self.players + player],
                None => {
                    let mut actions = [0usize; MAX_BLOTTO_PLAYERS];
                    self.decode(joint, &mut actions[..self.players]);
                    let mask = b.mask_for(&actions[..self.players]);
                    blotto_reward(mask, self.players, player)
                }
            },
        }
    }

    /// Rewards of all players at a joint action index.
    pub fn payoffs(&self, joint: usize, out: &mut [f64]) {
        match &self.backend {
            Backend::Dense(flat) => {
                out.copy_from_slice(&flat[joint * self.players..(joint + 1) * self.players])
            }
            Backend::Blotto(b) => {
                let mask = match &b.table {
                    Some(table) => u32::from(table[joint]),
                    None => {
                        let mut actions = [0usize; MAX_BLOTTO_PLAYERS];
                        self.decode(joint, &mut actions[..self.players]);
                        b.mask_for(&actions[..self.players])
                    }
                };
                for (p, o) in out.iter_mut().enumerate() {
                    *o = blotto_reward(mask, self.players, p);
                }
            }
        }
    }

    pub fn payoff_of(&self, actions: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.players];
        self.payoffs(self.joint_index(actions), &mut out);
        out
    }

    /// Smallest and largest reward any player can receive.
    pub fn reward_range(&self) -> (f64, f64) {
        match &self.backend {
            Backend::Blotto(_) => (-1.0, 1.0),
            Backend::Dense(flat) => flat
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }

    pub fn check_actions(&self, actions: &[usize]) -> Result<()> {
        if actions.len() != self.players {
            return Err(Error::ArityMismatch {
                expected: self.players,
                got: actions.len(),
            });
        }
        for (p, (&a, &c)) in actions.iter().zip(&self.action_counts).enumerate() {
            if a >= c {
                return Err(Error::InvalidStrategy(format!(
                    "player {p} action {a} out of range 0..{c}"
                )));
            }
        }
        Ok(())
    }

    /// Dense restriction to the first `k[p]` actions of each player.
    pub fn restrict(&self, keep: &[usize]) -> Result<Game> {
        if keep.len() != self.players {
            return Err(Error::ArityMismatch {
                expected: self.players,
                got: keep.len(),
            });
        }
        if keep
            .iter()
            .zip(&self.action_counts)
            .any(|(&k, &c)| k == 0 || k > c)
        {
            return Err(Error::InvalidGame(
                "restriction outside the action ranges".into(),
            ));
        }
        let sub_joint: usize = keep.iter().product();
        let sub_strides = strides_for(keep);
        let mut payoffs = Vec::with_capacity(sub_joint);
        let mut a = vec![0usize; self.players];
        for idx in 0..sub_joint {
            let mut rest = idx;
            for (p, slot) in a.iter_mut().enumerate() {
                *slot = rest / sub_strides[p];
                rest %= sub_strides[p];
            }
            payoffs.push(self.payoff_of(&a));
        }
        Game::from_tensor(DenseTensor {
            action_counts: keep.to_vec(),
            payoffs,
        })
    }
}
