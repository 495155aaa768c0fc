//! Quantal response equilibria (and ε-Nash at `tau = 0`) by projected
//! gradient descent on entropy-regularized exploitability.
//!
//! For a product profile `x` with deviation values `v_i`, the objective is
//!
//! ```text
//! L(x) = Σ_i [ smax_τ(v_i) − <x_i, v_i> + τ Σ_a x_i(a) ln x_i(a) ]
//! ```
//!
//! where `smax_τ(v) = τ ln Σ exp(v/τ)` (and `max v` at `τ = 0`). It is zero
//! exactly at a logit equilibrium with inverse temperature `beta = 1/τ`.
//!
//! At `τ > 0` steps are exponentiated-gradient (entropic mirror) steps, whose
//! geometry matches the entropy term near small probabilities; at `τ = 0` they
//! are Euclidean projected steps. Both use backtracking on `L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::responses::{argmax_set, softmax, DEFAULT_TIE_TOLERANCE};
use crate::strategy::{MixedStrategy, ProductProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QreConfig {
    pub tau: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Tolerance on the sup-norm of the gradient mapping
    /// (entropic with step `1/tau` at `tau > 0`, Euclidean unit step at `tau = 0`).
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_lr() -> f64 {
    0.1
}

fn default_max_iters() -> usize {
    100_000
}

fn default_tolerance() -> f64 {
    1e-8
}

impl QreConfig {
    pub fn new(tau: f64) -> Self {
        QreConfig {
            tau,
            learning_rate: default_lr(),
            max_iters: default_max_iters(),
            tolerance: default_tolerance(),
        }
    }

    /// Inverse temperature of the logit response this equilibrium is a fixed point of.
    pub fn beta(&self) -> f64 {
        1.0 / self.tau
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::param("tau", "must be finite and nonnegative"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::param("tolerance", "must be nonnegative"));
        }
        Ok(())
    }

    fn floor(&self) -> f64 {
        if self.tau > 0.0 {
            1e-300
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QreSolution {
    pub profile: ProductProfile,
    /// Regularized exploitability at the returned profile.
    pub exploitability: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Deviation values of every player against a (possibly unnormalized) product `x`.
pub fn deviation_values_all(game: &Game, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = game.num_players();
    let mut v: Vec<Vec<f64>> = x.iter().map(|xi| vec![0.0; xi.len()]).collect();
    let mut a = vec![0; n];
    let mut r = vec![0.0; n];
    for j in 0..game.joint_actions() {
        game.decode(j, &mut a);
        game.payoffs(j, &mut r);
        for i in 0..n {
            let mut p = 1.0;
            for k in 0..n {
                if k != i {
                    p *= x[k][a[k]];
                }
            }
            v[i][a[i]] += p * r[i];
        }
    }
    v
}

fn smooth_max(v: &[f64], tau: f64) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tau == 0.0 {
        return max;
    }
    max + tau * v.iter().map(|&u| ((u - max) / tau).exp()).sum::<f64>().ln()
}

/// Regularized response: softmax of `v/τ`, or uniform over the maximizers at `τ = 0`.
fn soft_response(v: &[f64], tau: f64) -> Vec<f64> {
    if tau == 0.0 {
        MixedStrategy::uniform_over(v.len(), &argmax_set(v, DEFAULT_TIE_TOLERANCE))
            .probs()
            .to_vec()
    } else {
        softmax(v, 1.0 / tau)
    }
}

/// `s·(r ln r − r + 1)` for `r = e^d`, accurate when `d` is tiny.
fn kl_term(s: f64, d: f64) -> f64 {
    let e = d.exp_m1();
    s * (d * e + d - e)
}

/// Objective and a bound on its rounding noise.
///
/// At `τ > 0` each player's share is evaluated as `τ·KL(x_i ‖ softmax(v_i/τ))`,
/// which keeps full relative precision as the objective approaches zero.
/// Off the simplex (`ambient`) the two forms differ by a multiple of `Σx − 1`,
/// which is added back; on it that term is pure rounding and is skipped.
fn objective_from_values(x: &[Vec<f64>], v: &[Vec<f64>], tau: f64, ambient: bool) -> (f64, f64) {
    let mut obj = 0.0;
    let mut scale = 0.0;
    let mut exact_part = 0.0;
    for (xi, vi) in x.iter().zip(v) {
        if tau > 0.0 {
            let smax = smooth_max(vi, tau);
            let mut kl = 0.0;
            for (&p, &u) in xi.iter().zip(vi) {
                let log_s = (u - smax) / tau;
                if p > 0.0 {
                    let d = p.ln() - log_s;
                    let term = kl_term(log_s.exp(), d);
                    kl += term;
                    // rounding in d is relative to the magnitudes it is computed from
                    let d_err = 1.0 + p.ln().abs() + (u.abs() + smax.abs()) / tau;
                    scale += tau * (term + log_s.exp() * d.abs() * d_err);
                } else {
                    kl += log_s.exp();
                }
            }
            obj += tau * kl;
            if ambient {
                obj += (tau - smax) * (xi.iter().sum::<f64>() - 1.0);
                exact_part += (tau - smax).abs() * xi.len() as f64;
            }
        } else {
            let inner: f64 = xi.iter().zip(vi).map(|(p, u)| p * u).sum();
            let smax = smooth_max(vi, tau);
            obj += smax - inner;
            scale += 1.0 + smax.abs() + inner.abs();
        }
    }
    (obj, f64::EPSILON * (64.0 * scale + exact_part))
}

pub fn qre_objective(game: &Game, x: &[Vec<f64>], tau: f64) -> f64 {
    objective_from_values(x, &deviation_values_all(game, x), tau, true).0
}

/// Objective and its gradient with respect to every coordinate of `x`
/// (in the ambient space, before projection).
pub fn qre_gradient(game: &Game, x: &[Vec<f64>], tau: f64) -> (f64, Vec<Vec<f64>>) {
    let (obj, grad, _) = evaluate(game, x, tau, true);
    (obj, grad)
}

fn evaluate(game: &Game, x: &[Vec<f64>], tau: f64, ambient: bool) -> (f64, Vec<Vec<f64>>, f64) {
    let n = game.num_players();
    let v = deviation_values_all(game, x);
    let (obj, noise) = objective_from_values(x, &v, tau, ambient);
    let w: Vec<Vec<f64>> = v
        .iter()
        .zip(x)
        .map(|(vi, xi)| {
            soft_response(vi, tau)
                .iter()
                .zip(xi)
                .map(|(s, p)| s - p)
                .collect()
        })
        .collect();

    let mut grad: Vec<Vec<f64>> = x
        .iter()
        .zip(&v)
        .map(|(xi, vi)| {
            xi.iter()
                .zip(vi)
                .map(|(&p, &u)| {
                    let reg = if tau > 0.0 { tau * (p.ln() + 1.0) } else { 0.0 };
                    reg - u
                })
                .collect()
        })
        .collect();

    if n > 1 {
        let mut a = vec![0; n];
        let mut r = vec![0.0; n];
        for j in 0..game.joint_actions() {
            game.decode(j, &mut a);
            game.payoffs(j, &mut r);
            for i in 0..n {
                let wi = w[i][a[i]];
                if wi == 0.0 || r[i] == 0.0 {
                    continue;
                }
                for jj in 0..n {
                    if jj == i {
                        continue;
                    }
                    let mut p = 1.0;
                    for k in 0..n {
                        if k != i && k != jj {
                            p *= x[k][a[k]];
                        }
                    }
                    grad[jj][a[jj]] += wi * p * r[i];
                }
            }
        }
    }
    (obj, grad, noise)
}

/// Euclidean projection onto `{y : y ≥ floor, Σ y = 1}`.
pub fn project_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let n = v.len();
    let mass = 1.0 - floor * n as f64;
    let mut sorted: Vec<f64> = v.iter().map(|&u| u - floor).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - mass) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter()
        .map(|&u| (u - floor - theta).max(0.0) + floor)
        .collect()
}

fn step(x: &[Vec<f64>], g: &[Vec<f64>], lr: f64, floor: f64) -> Vec<Vec<f64>> {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| {
            let moved: Vec<f64> = xi.iter().zip(gi).map(|(p, d)| p - lr * d).collect();
            project_simplex(&moved, floor)
        })
        .collect()
}

/// Exponentiated-gradient step, used when `tau > 0` keeps the solution interior.
fn mirror_step(x: &[Vec<f64>], g: &[Vec<f64>], lr: f64, floor: f64) -> Vec<Vec<f64>> {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| {
            let lo = gi.iter().copied().fold(f64::INFINITY, f64::min);
            let moved: Vec<f64> = xi
                .iter()
                .zip(gi)
                .map(|(p, d)| p * (-lr * (d - lo)).exp())
                .collect();
            let z: f64 = moved.iter().sum();
            moved.iter().map(|m| (m / z).max(floor)).collect()
        })
        .collect()
}

/// Sup-norm of the gradient mapping in the geometry the descent steps in,
/// with step `1/τ` in the entropic case.
///
/// The entropic mapping weights each coordinate's gradient by its mass, so
/// near-zero coordinates of an interior solution do not dominate the residual.
fn mapping_norm(x: &[Vec<f64>], g: &[Vec<f64>], floor: f64, tau: f64) -> f64 {
    let y = if tau > 0.0 {
        mirror_step(x, g, 1.0 / tau, floor)
    } else {
        step(x, g, 1.0, floor)
    };
    y.iter()
        .zip(x)
        .flat_map(|(yi, xi)| yi.iter().zip(xi).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn to_profile(x: Vec<Vec<f64>>) -> ProductProfile {
    ProductProfile::new(
        x.into_iter()
            .map(|xi| MixedStrategy::new(xi).expect("projection yields a distribution"))
            .collect(),
    )
    .expect("nonempty")
}

/// Per-entry tolerance on `x = softmax(v(x)/τ)` required of a converged solution.
pub const FIXED_POINT_TOL: f64 = 1e-4;
const MAX_RESTARTS: usize = 20;

fn logit_responses(game: &Game, x: &[Vec<f64>], tau: f64) -> Vec<Vec<f64>> {
    deviation_values_all(game, x)
        .iter()
        .map(|v| soft_response(v, tau))
        .collect()
}

fn fixed_point_gap(x: &[Vec<f64>], response: &[Vec<f64>]) -> f64 {
    x.iter()
        .zip(response)
        .flat_map(|(xi, ri)| xi.iter().zip(ri).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Runs the descent from `init` (uniform when `None`) and reports where it stopped.
pub fn qre_descend(
    game: &Game,
    cfg: &QreConfig,
    init: Option<&ProductProfile>,
) -> Result<QreSolution> {
    cfg.validate()?;
    let floor = cfg.floor();
    let mut x: Vec<Vec<f64>> = match init {
        Some(p) => {
            p.check(game)?;
            p.strategies()
                .iter()
                .map(|s| project_simplex(s.probs(), floor))
                .collect()
        }
        None => game
            .action_counts()
            .iter()
            .map(|&k| vec![1.0 / k as f64; k])
            .collect(),
    };
    let (mut obj, mut grad, _) = evaluate(game, &x, cfg.tau, false);
    let mirror = cfg.tau > 0.0;
    let lr_max = if mirror {
        cfg.learning_rate / cfg.tau
    } else {
        cfg.learning_rate
    };
    let mut lr = lr_max;
    let mut norm = mapping_norm(&x, &grad, floor, cfg.tau);
    let mut iterations = 0;
    let mut restarts = 0;
    let mut fixed_point_ok;
    loop {
        while iterations < cfg.max_iters && norm > cfg.tolerance {
            iterations += 1;
            let mut accepted = false;
            while lr > 1e-18 {
                let y = if mirror {
                    mirror_step(&x, &grad, lr, floor)
                } else {
                    step(&x, &grad, lr, floor)
                };
                let (o, g, noise) = evaluate(game, &y, cfg.tau, false);
                // below the rounding-noise level of the objective, require the residual to shrink instead
                let progress = if o < obj - noise {
                    true
                } else if o <= obj + noise {
                    mapping_norm(&y, &g, floor, cfg.tau) < norm
                } else {
                    false
                };
                if progress {
                    x = y;
                    obj = o;
                    grad = g;
                    accepted = true;
                    break;
                }
                lr *= 0.5;
            }
            if !accepted {
                break;
            }
            lr = (lr * 1.25).min(lr_max);
            norm = mapping_norm(&x, &grad, floor, cfg.tau);
        }
        // the objective is nonconvex; a stationary point that is not a fixed point
        // is left by jumping to the logit response
        let response = logit_responses(game, &x, cfg.tau);
        fixed_point_ok = !mirror || fixed_point_gap(&x, &response) <= FIXED_POINT_TOL;
        if fixed_point_ok || restarts == MAX_RESTARTS || iterations >= cfg.max_iters {
            break;
        }
        restarts += 1;
        x = response
            .into_iter()
            .map(|r| r.into_iter().map(|p| p.max(floor)).collect())
            .collect();
        (obj, grad, _) = evaluate(game, &x, cfg.tau, false);
        lr = lr_max;
        norm = mapping_norm(&x, &grad, floor, cfg.tau);
    }
    Ok(QreSolution {
        converged: norm <= cfg.tolerance && fixed_point_ok,
        profile: to_profile(x),
        exploitability: obj,
        gradient_norm: norm,
        iterations,
    })
}

/// Converged solution, or `NotConverged` with the final residual.
pub fn qre_solve_detailed(game: &Game, cfg: &QreConfig) -> Result<QreSolution> {
    let sol = qre_descend(game, cfg, None)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NotConverged {
            iterations: sol.iterations,
            residual: sol.gradient_norm,
            exploitability: sol.exploitability,
        })
    }
}

pub fn qre_solve(game: &Game, cfg: &QreConfig) -> Result<ProductProfile> {
    qre_solve_detailed(game, cfg).map(|s| s.profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_game, BuiltinGame, GameSpec};

    #[test]
    fn projection_properties() {
        let p = project_simplex(&[0.5, 0.9, -0.3], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&u| u >= 0.0));
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5], 0.0), vec![0.2, 0.3, 0.5]);
        let f = project_simplex(&[1.0, 0.0], 0.01);
        assert!((f[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rps_is_uniform() {
        let g = build_game(&GameSpec::Builtin {
            name: BuiltinGame::Rps,
        })
        .unwrap();
        for tau in [0.01, 1.0] {
            let p = qre_solve(&g, &QreConfig::new(tau)).unwrap();
            for s in p.strategies() {
                for &q in s.probs() {
                    assert!((q - 1.0 / 3.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn large_tau_is_near_uniform() {
        let g = Game::bimatrix(
            &[vec![3.0, 0.0], vec![0.0, 1.0]],
            &[vec![-3.0, 0.0], vec![0.0, -1.0]],
        )
        .unwrap();
        let p = qre_solve(&g, &QreConfig::new(1e4)).unwrap();
        for s in p.strategies() {
            assert!((s.probs()[0] - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn matching_pennies_from_skewed_start() {
        let g = build_game(&GameSpec::Builtin {
            name: BuiltinGame::MatchingPennies,
        })
        .unwrap();
        let start = ProductProfile::new(vec![
            MixedStrategy::new(vec![0.8, 0.2]).unwrap(),
            MixedStrategy::new(vec![0.3, 0.7]).unwrap(),
        ])
        .unwrap();
        let sol = qre_descend(&g, &QreConfig::new(0.05), Some(&start)).unwrap();
        assert!(sol.converged);
        for s in sol.profile.strategies() {
            assert!((s.probs()[0] - 0.5).abs() < 1e-6);
        }
    }

    fn symmetric(a: &[Vec<f64>]) -> Game {
        let k = a.len();
        let b: Vec<Vec<f64>> = (0..k).map(|r| (0..k).map(|c| a[c][r]).collect()).collect();
        Game::bimatrix(a, &b).unwrap()
    }

    #[test]
    fn leaves_stationary_points_that_are_not_equilibria() {
        // uniform is stationary for the objective here but far from the QRE
        let g = symmetric(&[vec![1.0, -1.0], vec![1.0, 1.0]]);
        let sol = qre_solve_detailed(&g, &QreConfig::new(0.05)).unwrap();
        let x = sol.profile.strategy(0).probs();
        assert!(x[1] > 1.0 - 1e-6, "{x:?}");
        assert!(sol.exploitability < 1e-6);
    }

    #[test]
    fn resolves_tiny_interior_mass() {
        let vals = [
            0.0,
            0.0,
            0.0,
            -0.9585480080140123,
            -0.7330638769170326,
            -0.6607742820514954,
            0.8732594952445515,
            -0.6011104576588887,
            -0.2600059966374161,
            -0.9785358867386629,
        ];
        let k = 5;
        let mut a = vec![vec![0.0; k]; k];
        let mut it = vals.iter();
        for r in 0..k {
            for c in r + 1..k {
                let v = *it.next().unwrap();
                a[r][c] = v;
                a[c][r] = -v;
            }
        }
        let g = symmetric(&a);
        let tau = 0.01;
        let sol = qre_solve_detailed(&g, &QreConfig::new(tau)).unwrap();
        let x: Vec<Vec<f64>> = sol
            .profile
            .strategies()
            .iter()
            .map(|s| s.probs().to_vec())
            .collect();
        let response = logit_responses(&g, &x, tau);
        assert!(fixed_point_gap(&x, &response) < 1e-6);
        assert!(x[0][0] < 1e-14);
    }
}
