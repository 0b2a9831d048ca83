//! Best-response oracles.
//!
//! The regularized oracle maximizes, over the player's policy `π`,
//!
//! ```text
//! F(π) = u(π, σ) + λ · min_k dist(π, h_k)
//! ```
//!
//! where `σ` is the opponent meta-strategy, `h_k` are fixed points of the
//! player's own policy hull and `dist` is the policy-space distance of
//! [`crate::diversity`]. Policies are softmax over per-state logits.
//!
//! The exact gradient comes from one backward sweep over the player's
//! information states. With `W(σ)` the value of own sequence `σ` with own
//! reach factored out,
//!
//! ```text
//! W(σ) = U(σ) + Σ_{s: parent(s) = σ} [ λ C(s) KL_s + Σ_a π(a|s) W(s, a) ]
//! ∂F/∂θ(s, b) = x(parent(s)) · [ π_b (W(s, b) − W̄_s) + λ C(s) π_b (ln(π_b / q_b) − KL_s) ]
//! ```
//!
//! where `U(σ)` collects terminal payoffs weighted by chance and opponent
//! reach, `C(s)` is the chance times weighting-opponent reach of `s`, `q`
//! the reference hull point and `W̄_s = Σ_a π_a W(s, a)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diversity::{floored, kl_divergence, state_kl, state_weights};
use crate::error::{DistanceError, OracleError};
use crate::eval::best_response;
use crate::game::{
    expected_utility, reach, sample_path, FunctionalGame2D, GameTree, OpponentSummary, Player, Point,
    HUMPS,
};
use crate::policy::{mixture_to_behavioral, sample_hull, to_sequence_form, BehavioralPolicy, Population};

/// Logits are kept in `[-LOGIT_BOUND, LOGIT_BOUND]`.
pub const LOGIT_BOUND: f64 = 50.0;

const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    owner: Player,
    logits: Vec<Vec<f64>>,
}

impl PolicyParams {
    pub fn uniform(game: &GameTree, owner: Player) -> Self {
        let logits = game
            .infostates(owner)
            .iter()
            .map(|s| vec![0.0; s.num_actions()])
            .collect();
        PolicyParams { owner, logits }
    }

    /// Log-probabilities of `policy`, clamped to the logit range.
    pub fn from_policy(policy: &BehavioralPolicy) -> Self {
        let logits = policy
            .all_probs()
            .iter()
            .map(|dist| {
                let logs: Vec<f64> = dist
                    .iter()
                    .map(|p| p.ln().clamp(-LOGIT_BOUND, LOGIT_BOUND))
                    .collect();
                let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                logs.iter()
                    .map(|l| (l - max).clamp(-LOGIT_BOUND, LOGIT_BOUND))
                    .collect()
            })
            .collect();
        PolicyParams {
            owner: policy.owner(),
            logits,
        }
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    pub fn set_logit(&mut self, infostate: usize, action: usize, value: f64) {
        self.logits[infostate][action] = value;
    }

    pub fn policy(&self) -> BehavioralPolicy {
        let probs = self.logits.iter().map(|l| softmax(l)).collect();
        BehavioralPolicy::from_raw(self.owner, probs)
    }

    fn ascend(&self, direction: &[Vec<f64>], step: f64) -> PolicyParams {
        let logits = self
            .logits
            .iter()
            .zip(direction)
            .map(|(l, g)| {
                l.iter()
                    .zip(g)
                    .map(|(a, b)| (a + step * b).clamp(-LOGIT_BOUND, LOGIT_BOUND))
                    .collect()
            })
            .collect();
        PolicyParams {
            owner: self.owner,
            logits,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Exact best response; the diversity weight is ignored.
    BestResponse,
    /// Gradient ascent with gradients from full tree enumeration.
    ExactGradient,
    /// Stochastic gradient ascent with the sampled three-term estimator.
    Reinforce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub mode: OracleMode,
    /// Diversity weight λ.
    pub lambda: f64,
    pub learning_rate: f64,
    pub steps: usize,
    /// Episodes per update in reinforce mode, for each of the two rollouts.
    pub episodes: usize,
    /// Subtract running-mean baselines from sampled returns.
    pub baseline: bool,
    /// Hull points searched for the distance term; 0 means `max(|Π|, 10)`.
    pub hull_samples: usize,
    /// Uniform mixing weight turning the opponent meta-strategy into the
    /// full-support weighting opponent.
    pub weighting_epsilon: f64,
    /// Uniform mixing weight applied to reference policies inside KL.
    pub reference_floor: f64,
    /// Per-step discount applied to the terminal payoff in reinforce mode.
    pub discount: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            mode: OracleMode::BestResponse,
            lambda: 0.0,
            learning_rate: 1.0,
            steps: 100,
            episodes: 64,
            baseline: true,
            hull_samples: 0,
            weighting_epsilon: 0.01,
            reference_floor: 0.0,
            discount: 1.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::Config(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.steps == 0 || (self.mode == OracleMode::Reinforce && self.episodes == 0) {
            return bad("step and episode counts must be positive");
        }
        if !(0.0 < self.weighting_epsilon && self.weighting_epsilon <= 1.0) {
            return bad("weighting epsilon must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.reference_floor) {
            return bad("reference floor must lie in [0, 1)");
        }
        if !(0.0 < self.discount && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        Ok(())
    }

    /// Hull sample count for a population of `members`.
    pub fn hull_count(&self, members: usize) -> usize {
        if self.hull_samples == 0 {
            members.max(10)
        } else {
            self.hull_samples.max(members)
        }
    }
}

/// Everything the regularized objective depends on besides the policy.
#[derive(Debug, Clone, Copy)]
pub struct OracleProblem<'a> {
    pub game: &'a GameTree,
    pub player: Player,
    /// Opponent meta-strategy as one behavioral policy.
    pub opponent: &'a BehavioralPolicy,
    /// Full-support opponent weighting the distance.
    pub weighting: &'a BehavioralPolicy,
    /// Fixed hull points of the player's own population.
    pub hull: &'a [BehavioralPolicy],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub value: f64,
    pub utility: f64,
    pub distance: f64,
    /// Hull point attaining the minimum distance.
    pub reference: usize,
}

fn player_utility(problem: &OracleProblem<'_>, policy: &BehavioralPolicy) -> Result<f64, OracleError> {
    let u = match problem.player {
        Player::One => expected_utility(problem.game, policy, problem.opponent)?,
        Player::Two => expected_utility(problem.game, problem.opponent, policy)?,
    };
    Ok(problem.player.sign() * u)
}

fn distance_to(
    problem: &OracleProblem<'_>,
    weights: &[f64],
    policy: &BehavioralPolicy,
    reference: &BehavioralPolicy,
    floor: f64,
) -> Result<f64, DistanceError> {
    let mut total = 0.0;
    for (s, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            total += w * state_kl(problem.game, problem.player, s, policy.probs(s), reference.probs(s), floor)?;
        }
    }
    Ok(total)
}

/// Minimum distance over the hull points, skipping points at infinite
/// distance unless all of them are.
fn hull_minimum(
    problem: &OracleProblem<'_>,
    policy: &BehavioralPolicy,
    cfg: &OracleConfig,
) -> Result<(f64, usize), OracleError> {
    let weights = state_weights(problem.game, policy, problem.weighting);
    let mut best: Option<(f64, usize)> = None;
    let mut error = None;
    for (k, h) in problem.hull.iter().enumerate() {
        match distance_to(problem, &weights, policy, h, cfg.reference_floor) {
            Ok(d) => {
                if best.is_none_or(|(b, _)| d < b) {
                    best = Some((d, k));
                }
            }
            Err(e) => error = Some(e),
        }
    }
    match (best, error) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e.into()),
        (None, None) => Err(OracleError::Config("empty hull sample set".into())),
    }
}

/// Objective terms of `policy`. With `reference` set, the distance is taken
/// to that hull point instead of the minimizing one.
pub fn objective_terms(
    problem: &OracleProblem<'_>,
    policy: &BehavioralPolicy,
    cfg: &OracleConfig,
    reference: Option<usize>,
) -> Result<ObjectiveTerms, OracleError> {
    let utility = player_utility(problem, policy)?;
    if cfg.lambda == 0.0 {
        return Ok(ObjectiveTerms {
            value: utility,
            utility,
            distance: 0.0,
            reference: reference.unwrap_or(0),
        });
    }
    let (distance, reference) = match reference {
        Some(k) => {
            let weights = state_weights(problem.game, policy, problem.weighting);
            (distance_to(problem, &weights, policy, &problem.hull[k], cfg.reference_floor)?, k)
        }
        None => hull_minimum(problem, policy, cfg)?,
    };
    Ok(ObjectiveTerms {
        value: utility + cfg.lambda * distance,
        utility,
        distance,
        reference,
    })
}

/// The regularized objective of the softmax policy of `params`, with a
/// fresh hull sample of the own population.
pub fn objective_value<R: Rng + ?Sized>(
    game: &GameTree,
    params: &PolicyParams,
    opponent: &BehavioralPolicy,
    population: &Population,
    cfg: &OracleConfig,
    rng: &mut R,
) -> Result<f64, OracleError> {
    let hull: Vec<BehavioralPolicy> = sample_hull(population, cfg.hull_count(population.len()), rng)
        .iter()
        .map(|m| mixture_to_behavioral(game, m))
        .collect();
    let weighting = crate::diversity::blend_with_uniform(opponent, cfg.weighting_epsilon);
    let problem = OracleProblem {
        game,
        player: params.owner(),
        opponent,
        weighting: &weighting,
        hull: &hull,
    };
    Ok(objective_terms(&problem, &params.policy(), cfg, None)?.value)
}

/// Exact objective and its gradient with respect to the logits. With
/// `reference` unset the hull minimizer at `params` is used.
pub fn objective_gradient(
    problem: &OracleProblem<'_>,
    params: &PolicyParams,
    cfg: &OracleConfig,
    reference: Option<usize>,
) -> Result<(ObjectiveTerms, Vec<Vec<f64>>), OracleError> {
    let game = problem.game;
    let player = problem.player;
    let me = player.index();
    let policy = params.policy();
    let terms = objective_terms(problem, &policy, cfg, reference)?;
    let states = game.infostates(player);

    let mut seats = [None, None];
    seats[1 - me] = Some(problem.opponent);
    let versus = reach(game, seats);
    let mut w = vec![0.0; game.num_sequences(player)];
    let mut root = 0.0;
    for (z, payoff) in game.terminals() {
        let weight = versus.chance[z] * versus.players[1 - me][z];
        if weight == 0.0 {
            continue;
        }
        let v = weight * player.sign() * payoff;
        match game.last_sequence(player, z) {
            Some(seq) => w[states[seq.infostate].sequence_index(seq.action)] += v,
            None => root += v,
        }
    }

    let regularized = cfg.lambda > 0.0;
    let (coverage, reference_policy) = if regularized {
        let mut seats = [None, None];
        seats[1 - me] = Some(problem.weighting);
        let r = reach(game, seats);
        let coverage: Vec<f64> = states
            .iter()
            .map(|info| info.nodes.iter().map(|&h| r.chance[h] * r.players[1 - me][h]).sum())
            .collect();
        (coverage, Some(&problem.hull[terms.reference]))
    } else {
        (Vec::new(), None)
    };

    let x = to_sequence_form(game, &policy);
    let mut grad: Vec<Vec<f64>> = states.iter().map(|s| vec![0.0; s.num_actions()]).collect();
    for s in (0..states.len()).rev() {
        let info = &states[s];
        let pi = policy.probs(s);
        let mean: f64 = (0..info.num_actions())
            .map(|a| pi[a] * w[info.sequence_index(a)])
            .sum();
        let mut state_value = mean;
        let parent_reach = x.state_reach(game, s);
        for b in 0..info.num_actions() {
            grad[s][b] = parent_reach * pi[b] * (w[info.sequence_index(b)] - mean);
        }
        if let Some(reference) = reference_policy {
            let q = if cfg.reference_floor > 0.0 {
                floored(reference.probs(s), cfg.reference_floor)
            } else {
                reference.probs(s).to_vec()
            };
            let c = coverage[s];
            if c > 0.0 {
                let kl = kl_divergence(pi, &q).map_err(|action| DistanceError::InfiniteKl {
                    key: info.key.clone(),
                    action,
                })?;
                state_value += cfg.lambda * c * kl;
                for b in 0..info.num_actions() {
                    if pi[b] > 0.0 {
                        grad[s][b] += parent_reach * cfg.lambda * c * pi[b] * ((pi[b] / q[b]).ln() - kl);
                    }
                }
            }
        }
        match info.parent {
            Some(seq) => w[states[seq.infostate].sequence_index(seq.action)] += state_value,
            None => root += state_value,
        }
    }
    debug_assert!((root - terms.value).abs() <= 1e-9 * (1.0 + terms.value.abs()));
    Ok((terms, grad))
}

fn norm(grad: &[Vec<f64>]) -> f64 {
    grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// One accepted ascent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub objective: f64,
    pub distance: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub policy: BehavioralPolicy,
    pub objective: ObjectiveTerms,
    pub trace: Vec<StepLog>,
}

/// Exact best response against the opponent meta-strategy.
pub fn exact_br_oracle(
    game: &GameTree,
    opponent: &BehavioralPolicy,
    player: Player,
) -> Result<(BehavioralPolicy, f64), OracleError> {
    Ok(best_response(game, opponent, player)?)
}

/// Gradient ascent with exact gradients and backtracking line search. A
/// step is accepted only when the objective does not decrease; the hull
/// minimizer is re-selected at every evaluated point.
pub fn psd_oracle_exact(
    problem: &OracleProblem<'_>,
    init: &BehavioralPolicy,
    cfg: &OracleConfig,
) -> Result<OracleOutcome, OracleError> {
    cfg.validate()?;
    let mut params = PolicyParams::from_policy(init);
    let (mut terms, mut grad) = objective_gradient(problem, &params, cfg, None)?;
    let mut trace = Vec::new();
    for step in 0..cfg.steps {
        let grad_norm = norm(&grad);
        if !terms.value.is_finite() || !grad_norm.is_finite() {
            return Err(OracleError::Divergence {
                step,
                value: terms.value,
                grad_norm,
            });
        }
        trace.push(StepLog {
            step,
            objective: terms.value,
            distance: terms.distance,
            grad_norm,
        });
        if grad_norm < GRADIENT_TOLERANCE {
            break;
        }
        let mut eta = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = params.ascend(&grad, eta);
            let value = objective_terms(problem, &candidate.policy(), cfg, None)?;
            if !value.value.is_finite() {
                return Err(OracleError::Divergence {
                    step,
                    value: value.value,
                    grad_norm,
                });
            }
            if value.value >= terms.value {
                accepted = Some(candidate);
                break;
            }
            eta *= 0.5;
        }
        let Some(next) = accepted else { break };
        params = next;
        (terms, grad) = objective_gradient(problem, &params, cfg, None)?;
    }
    Ok(OracleOutcome {
        policy: params.policy(),
        objective: terms,
        trace,
    })
}

struct Trajectory {
    visits: Vec<(usize, usize)>,
    payoff: f64,
}

fn rollout<R: Rng + ?Sized>(
    game: &GameTree,
    player: Player,
    policy: &BehavioralPolicy,
    opponent: &BehavioralPolicy,
    rng: &mut R,
) -> Trajectory {
    let seats = match player {
        Player::One => [policy, opponent],
        Player::Two => [opponent, policy],
    };
    let mut visits = Vec::new();
    let payoff = sample_path(game, seats, rng, |p, s, a| {
        if p == player {
            visits.push((s, a));
        }
    });
    Trajectory {
        visits,
        payoff: player.sign() * payoff,
    }
}

/// Componentwise mean and standard error of per-episode gradient samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    /// Hull point used for the distance term.
    pub reference: usize,
    pub mean_return: f64,
    pub mean_kl_return: f64,
}

/// Sampled gradient of the regularized objective. Each episode pairs one
/// rollout against the opponent meta-strategy (score-function term of the
/// payoff) with one rollout against the weighting opponent (score-function
/// term of the KL return plus the direct KL gradient at the visited states).
/// With `reference` unset the hull point with the smallest sampled distance
/// in this batch is used.
pub fn reinforce_gradient<R: Rng + ?Sized>(
    problem: &OracleProblem<'_>,
    params: &PolicyParams,
    cfg: &OracleConfig,
    reference: Option<usize>,
    episodes: usize,
    baselines: [f64; 2],
    rng: &mut R,
) -> Result<GradientSample, OracleError> {
    let game = problem.game;
    let player = problem.player;
    let policy = params.policy();
    let states = game.infostates(player);
    let shape: Vec<Vec<f64>> = states.iter().map(|s| vec![0.0; s.num_actions()]).collect();
    let regularized = cfg.lambda > 0.0;

    let payoff_runs: Vec<Trajectory> = (0..episodes)
        .map(|_| rollout(game, player, &policy, problem.opponent, rng))
        .collect();
    let weighting_runs: Vec<Trajectory> = if !regularized {
        Vec::new()
    } else if problem.weighting == problem.opponent {
        payoff_runs
            .iter()
            .map(|t| Trajectory {
                visits: t.visits.clone(),
                payoff: t.payoff,
            })
            .collect()
    } else {
        (0..episodes)
            .map(|_| rollout(game, player, &policy, problem.weighting, rng))
            .collect()
    };

    // per-state KL to every hull point, computed on demand
    let mut kl_cache: Vec<Vec<Option<f64>>> = vec![vec![None; states.len()]; problem.hull.len()];
    let mut state_kl_to = |k: usize, s: usize| -> Result<f64, OracleError> {
        if let Some(v) = kl_cache[k][s] {
            return Ok(v);
        }
        let v = state_kl(game, player, s, policy.probs(s), problem.hull[k].probs(s), cfg.reference_floor)?;
        kl_cache[k][s] = Some(v);
        Ok(v)
    };
    let reference = match (reference, regularized) {
        (Some(k), _) => k,
        (None, false) => 0,
        (None, true) => {
            let mut best: Option<(f64, usize)> = None;
            for k in 0..problem.hull.len() {
                let mut total = 0.0;
                let mut finite = true;
                for t in &weighting_runs {
                    for &(s, _) in &t.visits {
                        match state_kl_to(k, s) {
                            Ok(v) => total += v,
                            Err(_) => finite = false,
                        }
                    }
                }
                if finite && best.is_none_or(|(b, _)| total < b) {
                    best = Some((total, k));
                }
            }
            match best {
                Some((_, k)) => k,
                None => {
                    let t = weighting_runs.iter().find(|t| !t.visits.is_empty()).expect("visited state");
                    state_kl_to(0, t.visits[0].0)?;
                    0
                }
            }
        }
    };

    let mut sum = shape.clone();
    let mut sum_sq = shape.clone();
    let (mut total_return, mut total_kl) = (0.0, 0.0);
    // an episode touches only the states on its two paths
    let mut sample: Vec<(usize, Vec<f64>)> = Vec::new();
    fn entry(sample: &mut Vec<(usize, Vec<f64>)>, s: usize, n: usize) -> &mut Vec<f64> {
        let i = match sample.iter().position(|(t, _)| *t == s) {
            Some(i) => i,
            None => {
                sample.push((s, vec![0.0; n]));
                sample.len() - 1
            }
        };
        &mut sample[i].1
    }
    for e in 0..episodes {
        sample.clear();
        let run = &payoff_runs[e];
        total_return += run.payoff;
        let steps = run.visits.len();
        for (t, &(s, a)) in run.visits.iter().enumerate() {
            let ret = cfg.discount.powi((steps - 1 - t) as i32) * run.payoff - baselines[0];
            let pi = policy.probs(s);
            let g = entry(&mut sample, s, pi.len());
            for b in 0..pi.len() {
                let score = if a == b { 1.0 - pi[b] } else { -pi[b] };
                g[b] += ret * score;
            }
        }
        if regularized {
            let run = &weighting_runs[e];
            let mut kl_return = 0.0;
            for &(s, _) in &run.visits {
                kl_return += state_kl_to(reference, s)?;
            }
            total_kl += kl_return;
            let centered = kl_return - baselines[1];
            for &(s, a) in &run.visits {
                let pi = policy.probs(s);
                let q = if cfg.reference_floor > 0.0 {
                    floored(problem.hull[reference].probs(s), cfg.reference_floor)
                } else {
                    problem.hull[reference].probs(s).to_vec()
                };
                let kl = state_kl_to(reference, s)?;
                let g = entry(&mut sample, s, pi.len());
                for b in 0..pi.len() {
                    let score = if a == b { 1.0 - pi[b] } else { -pi[b] };
                    let direct = if pi[b] > 0.0 {
                        pi[b] * ((pi[b] / q[b]).ln() - kl)
                    } else {
                        0.0
                    };
                    g[b] += cfg.lambda * (centered * score + direct);
                }
            }
        }
        for (s, g) in &sample {
            for (b, v) in g.iter().enumerate() {
                sum[*s][b] += v;
                sum_sq[*s][b] += v * v;
            }
        }
    }
    let n = episodes as f64;
    let mut mean = shape.clone();
    let mut std_error = shape;
    for s in 0..mean.len() {
        for b in 0..mean[s].len() {
            let m = sum[s][b] / n;
            mean[s][b] = m;
            let var = if episodes > 1 {
                ((sum_sq[s][b] - n * m * m) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            std_error[s][b] = (var / n).sqrt();
        }
    }
    Ok(GradientSample {
        mean,
        std_error,
        reference,
        mean_return: total_return / n,
        mean_kl_return: if regularized { total_kl / n } else { 0.0 },
    })
}

/// Stochastic gradient ascent with [`reinforce_gradient`] at a fixed
/// learning rate. Baselines track the previous batch's mean returns.
pub fn psd_oracle_reinforce<R: Rng + ?Sized>(
    problem: &OracleProblem<'_>,
    init: &BehavioralPolicy,
    cfg: &OracleConfig,
    rng: &mut R,
) -> Result<OracleOutcome, OracleError> {
    cfg.validate()?;
    let start = PolicyParams::from_policy(init);
    let mut params = start.clone();
    let mut baselines = [0.0, 0.0];
    let mut trace = Vec::new();
    for step in 0..cfg.steps {
        let g = reinforce_gradient(problem, &params, cfg, None, cfg.episodes, baselines, rng)?;
        let grad_norm = norm(&g.mean);
        if !grad_norm.is_finite() {
            return Err(OracleError::Divergence {
                step,
                value: g.mean_return,
                grad_norm,
            });
        }
        trace.push(StepLog {
            step,
            objective: g.mean_return + cfg.lambda * g.mean_kl_return,
            distance: g.mean_kl_return,
            grad_norm,
        });
        params = params.ascend(&g.mean, cfg.learning_rate);
        if cfg.baseline {
            baselines = [g.mean_return, g.mean_kl_return];
        }
    }
    let policy = if params == start {
        init.clone()
    } else {
        params.policy()
    };
    let objective = objective_terms(problem, &policy, cfg, None)?;
    Ok(OracleOutcome {
        policy,
        objective,
        trace,
    })
}

/// Reference points of a functional game's hull: mixed hump distributions
/// for the mixture game, mean points for the disc game.
#[derive(Debug, Clone, PartialEq)]
pub enum HullReference {
    Humps([f64; HUMPS]),
    Point(Point),
}

/// Hull reference for the convex weights over `members`.
pub fn functional_reference(game: &FunctionalGame2D, members: &[Point], weights: &[f64]) -> HullReference {
    match game {
        FunctionalGame2D::Mixture7(m) => {
            let mut mix = [0.0; HUMPS];
            for (p, &w) in members.iter().zip(weights) {
                for (v, d) in mix.iter_mut().zip(m.hump_distribution(*p)) {
                    *v += w * d;
                }
            }
            HullReference::Humps(mix)
        }
        FunctionalGame2D::Disc => {
            let mut mean = [0.0; 2];
            for (p, &w) in members.iter().zip(weights) {
                mean[0] += w * p[0];
                mean[1] += w * p[1];
            }
            HullReference::Point(mean)
        }
    }
}

/// Distance of a point to one hull reference: KL between hump distributions
/// for the mixture game, squared Euclidean distance for the disc game.
pub fn functional_distance(game: &FunctionalGame2D, p: Point, reference: &HullReference) -> f64 {
    match (game, reference) {
        (FunctionalGame2D::Mixture7(m), HullReference::Humps(q)) => {
            kl_divergence(&m.hump_distribution(p), q).unwrap_or(f64::INFINITY)
        }
        (FunctionalGame2D::Disc, HullReference::Point(c)) => (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2),
        _ => panic!("hull reference belongs to a different game"),
    }
}

fn functional_distance_gradient(game: &FunctionalGame2D, p: Point, reference: &HullReference) -> Point {
    match (game, reference) {
        (FunctionalGame2D::Mixture7(m), HullReference::Humps(q)) => {
            let pi = m.hump_distribution(p);
            let jac = m.hump_distribution_jacobian(p);
            let mut g = [0.0; 2];
            for k in 0..HUMPS {
                if pi[k] > 0.0 {
                    let l = (pi[k] / q[k]).ln();
                    g[0] += jac[k][0] * l;
                    g[1] += jac[k][1] * l;
                }
            }
            g
        }
        (FunctionalGame2D::Disc, HullReference::Point(c)) => [2.0 * (p[0] - c[0]), 2.0 * (p[1] - c[1])],
        _ => panic!("hull reference belongs to a different game"),
    }
}

/// Regularized objective of a point and the index of the closest hull reference.
pub fn point_objective(
    game: &FunctionalGame2D,
    p: Point,
    opponent: &OpponentSummary,
    hull: &[HullReference],
    lambda: f64,
) -> (f64, f64, usize) {
    let u = game.payoff_against(p, opponent);
    if lambda == 0.0 || hull.is_empty() {
        return (u, 0.0, 0);
    }
    let (k, d) = hull
        .iter()
        .map(|h| functional_distance(game, p, h))
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, d)| if d < best.1 { (k, d) } else { best });
    (u + lambda * d, d, k)
}

/// Projected gradient ascent with backtracking over the game's disc of
/// admissible points, starting from `start`.
pub fn point_oracle(
    game: &FunctionalGame2D,
    start: Point,
    opponent: &OpponentSummary,
    hull: &[HullReference],
    cfg: &OracleConfig,
) -> Result<(Point, f64), OracleError> {
    cfg.validate()?;
    let mut p = game.project(start);
    let (mut value, _, mut reference) = point_objective(game, p, opponent, hull, cfg.lambda);
    for step in 0..cfg.steps {
        let mut g = game.payoff_gradient(p, opponent);
        if cfg.lambda > 0.0 && !hull.is_empty() {
            let d = functional_distance_gradient(game, p, &hull[reference]);
            g[0] += cfg.lambda * d[0];
            g[1] += cfg.lambda * d[1];
        }
        let grad_norm = g[0].hypot(g[1]);
        if !value.is_finite() || !grad_norm.is_finite() {
            return Err(OracleError::Divergence { step, value, grad_norm });
        }
        if grad_norm < GRADIENT_TOLERANCE {
            break;
        }
        let mut eta = cfg.learning_rate;
        let mut moved = false;
        for _ in 0..=MAX_HALVINGS {
            let q = game.project([p[0] + eta * g[0], p[1] + eta * g[1]]);
            let (v, _, k) = point_objective(game, q, opponent, hull, cfg.lambda);
            if v >= value {
                moved = q != p;
                p = q;
                value = v;
                reference = k;
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((p, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::blend_with_uniform;
    use crate::game::{build_kuhn, rock_paper_scissors, MixtureConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_round_trip() {
        let game = build_kuhn();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pi = BehavioralPolicy::random(&game, Player::One, &mut rng);
        let back = PolicyParams::from_policy(&pi).policy();
        for s in 0..pi.num_states() {
            for (a, b) in pi.probs(s).iter().zip(back.probs(s)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_zero_objective_is_utility() {
        let game = build_kuhn();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let opponent = BehavioralPolicy::random(&game, Player::Two, &mut rng);
        let pop = Population::singleton(BehavioralPolicy::random(&game, Player::One, &mut rng));
        let params = PolicyParams::uniform(&game, Player::One);
        let cfg = OracleConfig::default();
        let v = objective_value(&game, &params, &opponent, &pop, &cfg, &mut rng).unwrap();
        let u = expected_utility(&game, &params.policy(), &opponent).unwrap();
        assert_eq!(v, u);
    }

    #[test]
    fn rps_paper_against_floored_rock() {
        let game = rock_paper_scissors().to_tree();
        let rock = BehavioralPolicy::pure(&game, Player::Two, &[0]);
        let pop = Population::singleton(BehavioralPolicy::pure(&game, Player::One, &[0]));
        let paper = BehavioralPolicy::pure(&game, Player::One, &[1]);
        let cfg = OracleConfig {
            lambda: 1.0,
            reference_floor: 0.03,
            ..OracleConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = objective_value(&game, &PolicyParams::from_policy(&paper), &rock, &pop, &cfg, &mut rng).unwrap();
        // floored Rock puts 0.01 on Paper
        let expected = 1.0 + (1.0f64 / 0.01).ln();
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }

    #[test]
    fn exact_gradient_matches_finite_differences_on_kuhn() {
        let game = build_kuhn();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opponent = BehavioralPolicy::random(&game, Player::One, &mut rng);
        let weighting = blend_with_uniform(&opponent, 0.01);
        let hull: Vec<_> = (0..3)
            .map(|_| BehavioralPolicy::random(&game, Player::Two, &mut rng))
            .collect();
        let problem = OracleProblem {
            game: &game,
            player: Player::Two,
            opponent: &opponent,
            weighting: &weighting,
            hull: &hull,
        };
        let cfg = OracleConfig {
            lambda: 0.5,
            ..OracleConfig::default()
        };
        let mut params = PolicyParams::from_policy(&BehavioralPolicy::random(&game, Player::Two, &mut rng));
        let (terms, grad) = objective_gradient(&problem, &params, &cfg, None).unwrap();
        let h = 1e-5;
        for s in 0..grad.len() {
            for a in 0..grad[s].len() {
                let base = params.logits()[s][a];
                params.set_logit(s, a, base + h);
                let up = objective_terms(&problem, &params.policy(), &cfg, Some(terms.reference)).unwrap().value;
                params.set_logit(s, a, base - h);
                let down = objective_terms(&problem, &params.policy(), &cfg, Some(terms.reference)).unwrap().value;
                params.set_logit(s, a, base);
                let fd = (up - down) / (2.0 * h);
                assert!((fd - grad[s][a]).abs() <= 1e-4 * grad[s][a].abs().max(1e-3), "{fd} vs {}", grad[s][a]);
            }
        }
    }

    #[test]
    fn exact_oracle_reaches_best_response_value_at_lambda_zero() {
        let game = rock_paper_scissors().to_tree();
        let opponent = BehavioralPolicy::new(&game, Player::Two, vec![vec![0.5, 0.3, 0.2]]).unwrap();
        let weighting = blend_with_uniform(&opponent, 0.01);
        let hull = vec![BehavioralPolicy::uniform(&game, Player::One)];
        let problem = OracleProblem {
            game: &game,
            player: Player::One,
            opponent: &opponent,
            weighting: &weighting,
            hull: &hull,
        };
        let cfg = OracleConfig {
            mode: OracleMode::ExactGradient,
            steps: 500,
            learning_rate: 10.0,
            ..OracleConfig::default()
        };
        let out = psd_oracle_exact(&problem, &hull[0], &cfg).unwrap();
        let (_, br) = exact_br_oracle(&game, &opponent, Player::One).unwrap();
        assert!((out.objective.value - br).abs() < 1e-3, "{} vs {br}", out.objective.value);
        for pair in out.trace.windows(2) {
            assert!(pair[1].objective >= pair[0].objective);
        }
    }

    #[test]
    fn zero_learning_rate_returns_initialization() {
        let game = build_kuhn();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = BehavioralPolicy::random(&game, Player::One, &mut rng);
        let opponent = BehavioralPolicy::uniform(&game, Player::Two);
        let hull = vec![init.clone()];
        let problem = OracleProblem {
            game: &game,
            player: Player::One,
            opponent: &opponent,
            weighting: &opponent,
            hull: &hull,
        };
        let cfg = OracleConfig {
            mode: OracleMode::Reinforce,
            learning_rate: 0.0,
            steps: 3,
            episodes: 8,
            ..OracleConfig::default()
        };
        let out = psd_oracle_reinforce(&problem, &init, &cfg, &mut rng).unwrap();
        assert_eq!(out.policy, init);
    }

    #[test]
    fn point_oracle_finds_disc_best_response() {
        let game = FunctionalGame2D::disc();
        let opponent = game.summarize(&[[0.0, 0.5]], &[1.0]);
        let cfg = OracleConfig {
            steps: 200,
            ..OracleConfig::default()
        };
        let (p, v) = point_oracle(&game, [0.0, 0.0], &opponent, &[], &cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
        assert!((p[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn point_distance_gradient_matches_finite_differences() {
        let game = FunctionalGame2D::mixture7(MixtureConfig::default());
        let reference = functional_reference(&game, &[[0.3, 0.2], [-0.5, 0.6]], &[0.4, 0.6]);
        let p = [0.1, -0.4];
        let g = functional_distance_gradient(&game, p, &reference);
        let h = 1e-6;
        for d in 0..2 {
            let (mut a, mut b) = (p, p);
            a[d] += h;
            b[d] -= h;
            let fd = (functional_distance(&game, a, &reference) - functional_distance(&game, b, &reference)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-6);
        }
    }
}
