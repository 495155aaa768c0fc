//! Exact equilibrium metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::responses::{argmax_lowest, DEFAULT_TIE_TOLERANCE};
use crate::strategy::{
    deviation_and_value, CorrelationDevice, JointPolicy, MixedStrategy, ProductProfile,
};

/// Per-player deviation gains and their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub aggregate: f64,
    pub per_player: Vec<f64>,
    pub best_deviation: Vec<usize>,
}

impl DeviationReport {
    /// Builds a report from each player's deviation values and current value.
    /// With `clip`, the aggregate sums `max(0, gain)`; gains are stored unclipped.
    pub fn from_values<'a>(
        players: impl IntoIterator<Item = (&'a [f64], f64)>,
        clip: bool,
    ) -> Self {
        let mut per_player = Vec::new();
        let mut best_deviation = Vec::new();
        for (dev, value) in players {
            let a = argmax_lowest(dev, DEFAULT_TIE_TOLERANCE);
            per_player.push(dev[a] - value);
            best_deviation.push(a);
        }
        let aggregate = if clip {
            per_player.iter().map(|g| g.max(0.0)).sum()
        } else {
            per_player.iter().sum()
        };
        DeviationReport {
            aggregate,
            per_player,
            best_deviation,
        }
    }

    pub fn max_gain(&self) -> f64 {
        self.per_player
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sum over players of the best unilateral pure-deviation gain (unclipped).
pub fn nashconv(game: &Game, profile: &ProductProfile) -> Result<DeviationReport> {
    profile.check(game)?;
    let parts: Vec<(Vec<f64>, f64)> = (0..game.num_players())
        .map(|i| {
            let dev = profile.deviation_values(game, i);
            let v = profile.strategy(i).dot(&dev);
            (dev, v)
        })
        .collect();
    Ok(DeviationReport::from_values(
        parts.iter().map(|(d, v)| (d.as_slice(), *v)),
        false,
    ))
}

/// Sum over players of the clipped best fixed-action deviation gain against `device`.
pub fn ccedist(game: &Game, device: &CorrelationDevice) -> Result<DeviationReport> {
    device.check(game)?;
    let parts: Vec<(Vec<f64>, f64)> = (0..game.num_players())
        .map(|i| deviation_and_value(game, i, device))
        .collect();
    Ok(DeviationReport::from_values(
        parts.iter().map(|(d, v)| (d.as_slice(), *v)),
        true,
    ))
}

/// Best fixed action in hindsight minus realized reward, both summed over the sequence.
pub fn external_regret(game: &Game, play: &[ProductProfile], player: usize) -> Result<f64> {
    if play.is_empty() {
        return Err(Error::param("play_sequence", "must be nonempty"));
    }
    if player >= game.num_players() {
        return Err(Error::param("player", format!("{player} out of range")));
    }
    let mut dev_sum = vec![0.0; game.num_actions(player)];
    let mut realized = 0.0;
    for p in play {
        p.check(game)?;
        let dev = p.deviation_values(game, player);
        realized += p.strategy(player).dot(&dev);
        for (s, d) in dev_sum.iter_mut().zip(&dev) {
            *s += d;
        }
    }
    let best = dev_sum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(best - realized)
}

/// Shannon entropy in nats.
pub fn entropy(strategy: &MixedStrategy) -> f64 {
    -strategy
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}
