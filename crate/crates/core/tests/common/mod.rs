#![allow(dead_code)]

use brpi_core::game::{DenseTensor, Game};
use brpi_core::strategy::{Component, CorrelationDevice, MixedStrategy, ProductProfile};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<R: Rng>(rng: &mut R, counts: &[usize]) -> DenseTensor {
    let joint: usize = counts.iter().product();
    DenseTensor {
        action_counts: counts.to_vec(),
        payoffs: (0..joint)
            .map(|_| {
                (0..counts.len())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect(),
    }
}

/// A random game with 2 or 3 players and 1..=max_actions actions each.
pub fn random_game<R: Rng>(rng: &mut R, max_actions: usize) -> (Game, DenseTensor) {
    let n = rng.random_range(2..=3);
    let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_actions)).collect();
    let t = random_tensor(rng, &counts);
    (Game::from_tensor(t.clone()).unwrap(), t)
}

pub fn random_probs<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let s: f64 = raw.iter().sum();
    if s == 0.0 {
        let mut v = vec![0.0; k];
        v[rng.random_range(0..k)] = 1.0;
        return v;
    }
    raw.iter().map(|x| x / s).collect()
}

pub fn random_profile<R: Rng>(rng: &mut R, counts: &[usize]) -> ProductProfile {
    ProductProfile::new(
        counts
            .iter()
            .map(|&k| MixedStrategy::new(random_probs(rng, k)).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn random_device<R: Rng>(rng: &mut R, counts: &[usize]) -> CorrelationDevice {
    let k = rng.random_range(1..=4);
    let comps = (0..k)
        .map(|_| {
            let w = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                (w, Component::Product(random_profile(rng, counts)))
            } else {
                (
                    w,
                    Component::Pure(counts.iter().map(|&c| rng.random_range(0..c)).collect()),
                )
            }
        })
        .collect::<Vec<_>>();
    let total: f64 = comps.iter().map(|c| c.0).sum();
    CorrelationDevice::new(comps.into_iter().map(|(w, c)| (w / total, c)).collect()).unwrap()
}

/// Joint actions of a tensor, row-major with player 0 most significant.
pub fn joint_actions(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &k in counts {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// Probability of each joint action under a device, by direct enumeration.
pub fn device_probabilities(device: &CorrelationDevice, counts: &[usize]) -> Vec<f64> {
    joint_actions(counts)
        .iter()
        .map(|a| {
            device
                .components()
                .iter()
                .map(|(w, c)| match c {
                    Component::Pure(b) => {
                        if a == b {
                            *w
                        } else {
                            0.0
                        }
                    }
                    Component::Product(p) => {
                        w * a
                            .iter()
                            .enumerate()
                            .map(|(i, &ai)| p.strategy(i).probs()[ai])
                            .product::<f64>()
                    }
                })
                .sum()
        })
        .collect()
}

fn flat_index(counts: &[usize], a: &[usize]) -> usize {
    a.iter().zip(counts).fold(0, |acc, (&x, &k)| acc * k + x)
}

/// `(deviation values, current value)` for `player` by summing over every joint action.
pub fn oracle_deviation(
    t: &DenseTensor,
    player: usize,
    device: &CorrelationDevice,
) -> (Vec<f64>, f64) {
    let counts = &t.action_counts;
    let probs = device_probabilities(device, counts);
    let mut dev = vec![0.0; counts[player]];
    let mut value = 0.0;
    for (a, p) in joint_actions(counts).iter().zip(&probs) {
        value += p * t.payoffs[flat_index(counts, a)][player];
        for (b, d) in dev.iter_mut().enumerate() {
            let mut alt = a.clone();
            alt[player] = b;
            *d += p * t.payoffs[flat_index(counts, &alt)][player];
        }
    }
    (dev, value)
}

pub fn oracle_best_response(
    t: &DenseTensor,
    player: usize,
    device: &CorrelationDevice,
) -> (usize, f64) {
    let (dev, _) = oracle_deviation(t, player, device);
    let mut best = 0;
    for (a, &v) in dev.iter().enumerate() {
        if v > dev[best] + 1e-12 {
            best = a;
        }
    }
    (best, dev[best])
}

pub fn oracle_nashconv(t: &DenseTensor, profile: &ProductProfile) -> f64 {
    let device = CorrelationDevice::from_product(profile.clone());
    (0..t.action_counts.len())
        .map(|i| {
            let (dev, v) = oracle_deviation(t, i, &device);
            dev.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v
        })
        .sum()
}

pub fn oracle_ccedist(t: &DenseTensor, device: &CorrelationDevice) -> f64 {
    (0..t.action_counts.len())
        .map(|i| {
            let (dev, v) = oracle_deviation(t, i, device);
            (dev.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v).max(0.0)
        })
        .sum()
}

/// Blotto rewards straight from the rules, one allocation per player.
pub fn oracle_blotto(allocs: &[Vec<u32>]) -> Vec<f64> {
    let n = allocs.len();
    let f = allocs[0].len();
    let mut won = vec![0usize; n];
    for field in 0..f {
        let top = allocs.iter().map(|a| a[field]).max().unwrap();
        let holders: Vec<usize> = (0..n).filter(|&i| allocs[i][field] == top).collect();
        if holders.len() == 1 {
            won[holders[0]] += 1;
        }
    }
    let best = *won.iter().max().unwrap();
    let winners = won.iter().filter(|&&w| w == best).count();
    if winners == n {
        return vec![0.0; n];
    }
    let losers = n - winners;
    won.iter()
        .map(|&w| {
            if w == best {
                1.0 / winners as f64
            } else {
                -1.0 / losers as f64
            }
        })
        .collect()
}

/// All compositions of `c` into `f` parts by recursion, in lexicographic order.
pub fn oracle_compositions(c: u32, f: usize) -> Vec<Vec<u32>> {
    if f == 1 {
        return vec![vec![c]];
    }
    let mut out = Vec::new();
    for first in 0..=c {
        for mut rest in oracle_compositions(c - first, f - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
