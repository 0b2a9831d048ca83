//! Policy-space distance between behavioral policies and payoff-space
//! diversity diagnostics of meta-games.
//!
//! The distance from `π` to `π′` for the owner `i` is
//!
//! ```text
//! dist(π, π′) = Σ_h  x_π(h) · b(h) · c(h) · KL(π(s(h)) ‖ π′(s(h)))
//! ```
//!
//! summed over the owner's decision nodes, where `x_π` is the owner's own
//! reach, `b` the weighting opponent's reach and `c` the chance reach. This
//! is the expected sum of per-state KL divergences along a trajectory of `π`
//! played against `b`, and the Bregman divergence of the weighted dilated
//! entropy between the two sequence forms. KL is in nats.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::DistanceError;
use crate::game::{reach, sample_path, GameTree, Player};
use crate::meta::MetaGame;
use crate::policy::{mixture_to_behavioral, sample_hull, BehavioralPolicy, MixedPolicy, Population};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMode {
    Exact,
    Sampled { trajectories: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceConfig {
    /// Opponent policy weighting the information states; needs full support.
    pub weighting: BehavioralPolicy,
    pub mode: DistanceMode,
    /// Number of hull points searched by [`min_hull_distance`].
    pub hull_samples: usize,
    /// Weight of the uniform distribution blended into every reference
    /// distribution before taking KL. Zero leaves references untouched.
    pub reference_floor: f64,
}

impl DistanceConfig {
    pub fn exact(weighting: BehavioralPolicy) -> Self {
        DistanceConfig {
            weighting,
            mode: DistanceMode::Exact,
            hull_samples: 1,
            reference_floor: 0.0,
        }
    }

    pub fn validate(&self, game: &GameTree, owner: Player) -> Result<(), DistanceError> {
        self.weighting.check(game, owner.opponent())?;
        for s in 0..self.weighting.num_states() {
            if self.weighting.probs(s).iter().any(|&p| p <= 0.0) {
                return Err(DistanceError::WeightingSupport { infostate: s });
            }
        }
        if self.hull_samples == 0 {
            return Err(DistanceError::Config("hull sample count must be positive".into()));
        }
        if let DistanceMode::Sampled { trajectories: 0 } = self.mode {
            return Err(DistanceError::Config("trajectory count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.reference_floor) {
            return Err(DistanceError::Config(format!(
                "reference floor {} outside [0, 1)",
                self.reference_floor
            )));
        }
        Ok(())
    }
}

/// The opponent policy blended with uniform: `(1 − ε)·σ + ε·uniform` at every state.
pub fn blend_with_uniform(policy: &BehavioralPolicy, epsilon: f64) -> BehavioralPolicy {
    let probs = policy
        .all_probs()
        .iter()
        .map(|dist| {
            let n = dist.len() as f64;
            dist.iter().map(|p| (1.0 - epsilon) * p + epsilon / n).collect()
        })
        .collect();
    BehavioralPolicy::from_raw(policy.owner(), probs)
}

pub(crate) fn floored(reference: &[f64], floor: f64) -> Vec<f64> {
    let n = reference.len() as f64;
    reference
        .iter()
        .map(|q| (1.0 - floor) * q + floor / n)
        .collect()
}

/// `KL(p ‖ q)` in nats. `None` when `q` misses part of `p`'s support, with
/// the offending action.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, usize> {
    let mut total = 0.0;
    for (a, (&pa, &qa)) in p.iter().zip(q).enumerate() {
        if pa > 0.0 {
            if qa <= 0.0 {
                return Err(a);
            }
            total += pa * (pa / qa).ln();
        }
    }
    Ok(total.max(0.0))
}

pub(crate) fn state_kl(
    game: &GameTree,
    owner: Player,
    s: usize,
    p: &[f64],
    q: &[f64],
    floor: f64,
) -> Result<f64, DistanceError> {
    let q = if floor > 0.0 { floored(q, floor) } else { q.to_vec() };
    kl_divergence(p, &q).map_err(|action| DistanceError::InfiniteKl {
        key: game.infostate(owner, s).key.clone(),
        action,
    })
}

/// Per information state of `policy`'s owner: own reach of `policy` times
/// weighting and chance reach, summed over the state's nodes.
pub fn state_weights(game: &GameTree, policy: &BehavioralPolicy, weighting: &BehavioralPolicy) -> Vec<f64> {
    let owner = policy.owner();
    let mut policies = [None, None];
    policies[owner.index()] = Some(policy);
    policies[owner.opponent().index()] = Some(weighting);
    let r = reach(game, policies);
    game.infostates(owner)
        .iter()
        .map(|info| info.nodes.iter().map(|&h| r.joint(h)).sum())
        .collect()
}

/// Exact distance by a full tree traversal. States with zero weight are
/// skipped, so `π′` may differ arbitrarily there.
pub fn psd_distance_exact(
    game: &GameTree,
    policy: &BehavioralPolicy,
    reference: &BehavioralPolicy,
    cfg: &DistanceConfig,
) -> Result<f64, DistanceError> {
    let owner = policy.owner();
    cfg.validate(game, owner)?;
    reference.check(game, owner)?;
    let weights = state_weights(game, policy, &cfg.weighting);
    let mut total = 0.0;
    for (s, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            total += w * state_kl(game, owner, s, policy.probs(s), reference.probs(s), cfg.reference_floor)?;
        }
    }
    Ok(total)
}

/// Monte Carlo distance estimate with the per-trajectory spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledDistance {
    pub mean: f64,
    /// Sample standard deviation of the per-trajectory KL sums.
    pub std_dev: f64,
    pub trajectories: usize,
}

impl SampledDistance {
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.trajectories as f64).sqrt()
    }
}

/// Averages, over trajectories of `policy` against the weighting opponent,
/// the sum of per-state KL divergences at the owner's visited states. This
/// is an unbiased estimate of [`psd_distance_exact`].
pub fn psd_distance_sampled<R: Rng + ?Sized>(
    game: &GameTree,
    policy: &BehavioralPolicy,
    reference: &BehavioralPolicy,
    cfg: &DistanceConfig,
    rng: &mut R,
) -> Result<SampledDistance, DistanceError> {
    let owner = policy.owner();
    cfg.validate(game, owner)?;
    reference.check(game, owner)?;
    let trajectories = match cfg.mode {
        DistanceMode::Sampled { trajectories } => trajectories,
        DistanceMode::Exact => {
            return Err(DistanceError::Config("sampled distance needs a trajectory count".into()))
        }
    };
    // per-state KL is deterministic, so cache it
    let mut kl: Vec<Option<f64>> = vec![None; game.infostates(owner).len()];
    let mut seats = [policy, &cfg.weighting];
    if owner == Player::Two {
        seats.swap(0, 1);
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for t in 0..trajectories {
        let mut visited = Vec::new();
        sample_path(game, seats, rng, |p, s, _| {
            if p == owner {
                visited.push(s);
            }
        });
        let mut value = 0.0;
        for s in visited {
            let v = match kl[s] {
                Some(v) => v,
                None => {
                    let v = state_kl(game, owner, s, policy.probs(s), reference.probs(s), cfg.reference_floor)?;
                    kl[s] = Some(v);
                    v
                }
            };
            value += v;
        }
        let delta = value - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (value - mean);
    }
    let var = if trajectories > 1 {
        m2 / (trajectories - 1) as f64
    } else {
        0.0
    };
    Ok(SampledDistance {
        mean,
        std_dev: var.sqrt(),
        trajectories,
    })
}

fn distance<R: Rng + ?Sized>(
    game: &GameTree,
    policy: &BehavioralPolicy,
    reference: &BehavioralPolicy,
    cfg: &DistanceConfig,
    rng: &mut R,
) -> Result<f64, DistanceError> {
    match cfg.mode {
        DistanceMode::Exact => psd_distance_exact(game, policy, reference, cfg),
        DistanceMode::Sampled { .. } => Ok(psd_distance_sampled(game, policy, reference, cfg, rng)?.mean),
    }
}

/// Smallest distance from `policy` to `cfg.hull_samples` points of the
/// population's hull (the members themselves always included) and the
/// minimizing point. Points at infinite distance are skipped; the error is
/// returned only when every point is at infinite distance.
pub fn min_hull_distance<'a, R: Rng + ?Sized>(
    game: &GameTree,
    policy: &BehavioralPolicy,
    population: &'a Population,
    cfg: &DistanceConfig,
    rng: &mut R,
) -> Result<(f64, MixedPolicy<'a>), DistanceError> {
    let samples = sample_hull(population, cfg.hull_samples, rng);
    let mut best: Option<(f64, MixedPolicy<'a>)> = None;
    let mut last_error = None;
    for sample in samples {
        let reference = mixture_to_behavioral(game, &sample);
        match distance(game, policy, &reference, cfg, rng) {
            Ok(d) => {
                if best.as_ref().is_none_or(|(b, _)| d < *b) {
                    best = Some((d, sample));
                }
            }
            Err(e @ DistanceError::InfiniteKl { .. }) => last_error = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_error.expect("at least one hull sample"))
}

/// `min_β KL(p ‖ Σₖ βₖ qₖ)` over the simplex, for distributions on one
/// state. The objective is convex in `β` and is minimized by the
/// fixed-point iteration of mixture-weight estimation, which increases
/// `Σₐ pₐ ln(Σₖ βₖ qₖₐ)` monotonically. Returns the value and the weights.
pub fn single_state_hull_distance(p: &[f64], members: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let k = members.len();
    let mut beta = vec![1.0 / k as f64; k];
    let mix = |beta: &[f64]| -> Vec<f64> {
        (0..p.len())
            .map(|a| beta.iter().zip(members).map(|(b, q)| b * q[a]).sum())
            .collect()
    };
    let objective = |m: &[f64]| -> f64 {
        kl_divergence(p, m).unwrap_or(f64::INFINITY)
    };
    let mut current = objective(&mix(&beta));
    for _ in 0..20_000 {
        let m = mix(&beta);
        let next: Vec<f64> = (0..k)
            .map(|j| {
                beta[j]
                    * (0..p.len())
                        .filter(|&a| p[a] > 0.0 && m[a] > 0.0)
                        .map(|a| p[a] * members[j][a] / m[a])
                        .sum::<f64>()
            })
            .collect();
        let total: f64 = next.iter().sum();
        if total <= 0.0 {
            break;
        }
        let next: Vec<f64> = next.into_iter().map(|b| b / total).collect();
        let value = objective(&mix(&next));
        let done = (current - value).abs() < 1e-15;
        beta = next;
        current = value;
        if done {
            break;
        }
    }
    (current, beta)
}

/// `σ_rowᵀ ⌊M⌋₊ σ_col` at the meta-game's equilibrium.
pub fn effective_diversity(meta: &mut MetaGame) -> f64 {
    let ne = meta.solve().clone();
    meta.payoffs()
        .iter()
        .zip(&ne.row)
        .map(|(row, x)| {
            x * row
                .iter()
                .zip(&ne.col)
                .map(|(v, y)| v.max(0.0) * y)
                .sum::<f64>()
        })
        .sum()
}

/// `Tr(I − (MMᵀ + I)⁻¹)` for the payoff rows of the meta-game.
pub fn expected_cardinality(meta: &MetaGame) -> f64 {
    let rows = meta.num_rows();
    let cols = meta.num_cols();
    let m = DMatrix::from_fn(rows, cols, |i, j| meta.payoffs()[i][j]);
    let kernel = &m * m.transpose() + DMatrix::identity(rows, rows);
    let inverse = kernel
        .cholesky()
        .expect("MMᵀ + I is positive definite")
        .inverse();
    (rows as f64 - inverse.trace()).clamp(0.0, rows as f64)
}
