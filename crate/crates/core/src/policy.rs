//! Tabular behavioral policies, their sequence form, populations and mixtures.
//!
//! A [`BehavioralPolicy`] stores one distribution per information state of its
//! owner, indexed like [`GameTree::infostates`]. The sequence form of a policy
//! is the vector of own-realization probabilities `x(s, a)`, the product of the
//! owner's action probabilities along the path to `(s, a)`. It is linear under
//! mixing, which is how a convex combination of policies becomes one
//! behavioral policy ([`mixture_to_behavioral`]).

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::PolicyError;
use crate::game::{GameTree, Player};

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralPolicy {
    owner: Player,
    probs: Vec<Vec<f64>>,
}

impl BehavioralPolicy {
    /// Validates that `probs` holds a distribution for every information
    /// state of `owner`, in the game's index order.
    pub fn new(game: &GameTree, owner: Player, probs: Vec<Vec<f64>>) -> Result<Self, PolicyError> {
        let states = game.infostates(owner);
        if probs.len() != states.len() {
            return Err(PolicyError::StateCount {
                expected: states.len(),
                got: probs.len(),
            });
        }
        for (s, (info, dist)) in states.iter().zip(&probs).enumerate() {
            if dist.len() != info.num_actions() {
                return Err(PolicyError::ActionCount {
                    infostate: s,
                    expected: info.num_actions(),
                    got: dist.len(),
                });
            }
            let sum: f64 = dist.iter().sum();
            if dist.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                || (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE
            {
                return Err(PolicyError::NotADistribution { infostate: s, sum });
            }
        }
        Ok(BehavioralPolicy { owner, probs })
    }

    pub fn uniform(game: &GameTree, owner: Player) -> Self {
        let probs = game
            .infostates(owner)
            .iter()
            .map(|s| vec![1.0 / s.num_actions() as f64; s.num_actions()])
            .collect();
        BehavioralPolicy { owner, probs }
    }

    /// Independent Dirichlet(1, …, 1) draws at every information state.
    pub fn random<R: Rng + ?Sized>(game: &GameTree, owner: Player, rng: &mut R) -> Self {
        let probs = game
            .infostates(owner)
            .iter()
            .map(|s| simplex_point(s.num_actions(), rng))
            .collect();
        BehavioralPolicy { owner, probs }
    }

    /// Deterministic policy playing `actions[s]` at information state `s`.
    pub fn pure(game: &GameTree, owner: Player, actions: &[usize]) -> Self {
        let probs = game
            .infostates(owner)
            .iter()
            .zip(actions)
            .map(|(s, &a)| {
                let mut dist = vec![0.0; s.num_actions()];
                dist[a] = 1.0;
                dist
            })
            .collect();
        BehavioralPolicy { owner, probs }
    }

    pub(crate) fn from_raw(owner: Player, probs: Vec<Vec<f64>>) -> Self {
        BehavioralPolicy { owner, probs }
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn probs(&self, infostate: usize) -> &[f64] {
        &self.probs[infostate]
    }

    pub fn all_probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    /// Checks that the policy fits `owner`'s information states in `game`.
    pub fn check(&self, game: &GameTree, owner: Player) -> Result<(), PolicyError> {
        if self.owner != owner {
            return Err(PolicyError::WrongOwner);
        }
        let states = game.infostates(owner);
        if self.probs.len() != states.len() {
            return Err(PolicyError::StateCount {
                expected: states.len(),
                got: self.probs.len(),
            });
        }
        for (s, (info, dist)) in states.iter().zip(&self.probs).enumerate() {
            if dist.len() != info.num_actions() {
                return Err(PolicyError::ActionCount {
                    infostate: s,
                    expected: info.num_actions(),
                    got: dist.len(),
                });
            }
        }
        Ok(())
    }

    /// One line per information state: `key p1 … pk`. Probabilities use the
    /// shortest round-trip representation.
    pub fn to_text(&self, game: &GameTree) -> String {
        let mut out = String::new();
        for (info, dist) in game.infostates(self.owner).iter().zip(&self.probs) {
            out.push_str(&info.key);
            for p in dist {
                let _ = write!(out, " {p:?}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`BehavioralPolicy::to_text`] output. The owner is inferred from
    /// the keys; every information state of the owner must appear exactly once.
    pub fn parse(game: &GameTree, text: &str) -> Result<Self, PolicyError> {
        let mut owner = None;
        let mut probs: Vec<Option<Vec<f64>>> = Vec::new();
        for (index, line) in text.lines().enumerate() {
            let lineno = index + 1;
            let err = |message: String| PolicyError::Parse {
                line: lineno,
                message,
            };
            let mut fields = line.split_whitespace();
            let Some(key) = fields.next() else {
                continue;
            };
            let (player, s) = Player::BOTH
                .iter()
                .find_map(|&p| game.infostate_index(p, key).map(|s| (p, s)))
                .ok_or_else(|| err(format!("unknown information state `{key}`")))?;
            match owner {
                None => {
                    owner = Some(player);
                    probs = vec![None; game.infostates(player).len()];
                }
                Some(o) if o != player => {
                    return Err(err(format!("`{key}` belongs to {player}, expected {o}")))
                }
                Some(_) => {}
            }
            let dist = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| err(format!("`{f}` is not a number")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let expected = game.infostate(player, s).num_actions();
            if dist.len() != expected {
                return Err(err(format!(
                    "`{key}` has {} probabilities, expected {expected}",
                    dist.len()
                )));
            }
            if probs[s].replace(dist).is_some() {
                return Err(err(format!("duplicate information state `{key}`")));
            }
        }
        let owner = owner.ok_or(PolicyError::Parse {
            line: 0,
            message: "no information states".into(),
        })?;
        let probs = probs
            .into_iter()
            .enumerate()
            .map(|(s, p)| {
                p.ok_or_else(|| PolicyError::Parse {
                    line: 0,
                    message: format!(
                        "missing information state `{}`",
                        game.infostate(owner, s).key
                    ),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        BehavioralPolicy::new(game, owner, probs)
    }
}

/// Uniform draw from the probability simplex of dimension `n`.
pub fn simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Realization plan over the owner's flat sequence indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceForm {
    owner: Player,
    x: Vec<f64>,
}

impl SequenceForm {
    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// Own-realization probability of reaching `infostate`: the value of its
    /// parent sequence, or 1 at a root state.
    pub fn state_reach(&self, game: &GameTree, infostate: usize) -> f64 {
        match game.infostate(self.owner, infostate).parent {
            None => 1.0,
            Some(seq) => {
                let parent = game.infostate(self.owner, seq.infostate);
                self.x[parent.sequence_index(seq.action)]
            }
        }
    }

    /// Largest violation of the realization-plan constraints.
    pub fn consistency_error(&self, game: &GameTree) -> f64 {
        game.infostates(self.owner)
            .iter()
            .enumerate()
            .map(|(s, info)| {
                let total: f64 = (0..info.num_actions())
                    .map(|a| self.x[info.sequence_index(a)])
                    .sum();
                (total - self.state_reach(game, s)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Convex combination `Σₖ wₖ xₖ`.
    pub fn combine(forms: &[SequenceForm], weights: &[f64]) -> SequenceForm {
        let owner = forms[0].owner;
        let mut x = vec![0.0; forms[0].x.len()];
        for (form, &w) in forms.iter().zip(weights) {
            for (xi, v) in x.iter_mut().zip(&form.x) {
                *xi += w * v;
            }
        }
        SequenceForm { owner, x }
    }
}

pub fn to_sequence_form(game: &GameTree, policy: &BehavioralPolicy) -> SequenceForm {
    let owner = policy.owner;
    let mut x = vec![0.0; game.num_sequences(owner)];
    // parents precede children in index order
    for (s, info) in game.infostates(owner).iter().enumerate() {
        let reach = match info.parent {
            None => 1.0,
            Some(seq) => x[game.infostate(owner, seq.infostate).sequence_index(seq.action)],
        };
        for (a, p) in policy.probs[s].iter().enumerate() {
            x[info.sequence_index(a)] = reach * p;
        }
    }
    SequenceForm { owner, x }
}

/// Normalizes each information state's sequence values. States the plan
/// never reaches get the uniform distribution.
pub fn sequence_to_behavioral(game: &GameTree, form: &SequenceForm) -> BehavioralPolicy {
    let probs = game
        .infostates(form.owner)
        .iter()
        .map(|info| {
            let n = info.num_actions();
            let values: Vec<f64> = (0..n).map(|a| form.x[info.sequence_index(a)]).collect();
            let total: f64 = values.iter().sum();
            if total > 0.0 {
                values.into_iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / n as f64; n]
            }
        })
        .collect();
    BehavioralPolicy {
        owner: form.owner,
        probs,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    owner: Player,
    members: Vec<BehavioralPolicy>,
}

impl Population {
    pub fn new(members: Vec<BehavioralPolicy>) -> Result<Self, PolicyError> {
        let owner = members.first().ok_or(PolicyError::EmptyPopulation)?.owner;
        if members.iter().any(|m| m.owner != owner) {
            return Err(PolicyError::WrongOwner);
        }
        Ok(Population { owner, members })
    }

    pub fn singleton(member: BehavioralPolicy) -> Self {
        Population {
            owner: member.owner,
            members: vec![member],
        }
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[BehavioralPolicy] {
        &self.members
    }

    pub fn get(&self, index: usize) -> &BehavioralPolicy {
        &self.members[index]
    }

    pub fn push(&mut self, member: BehavioralPolicy) -> Result<(), PolicyError> {
        if member.owner != self.owner {
            return Err(PolicyError::WrongOwner);
        }
        self.members.push(member);
        Ok(())
    }
}

/// A point in the policy hull of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPolicy<'a> {
    population: &'a Population,
    weights: Vec<f64>,
}

impl<'a> MixedPolicy<'a> {
    pub fn new(population: &'a Population, weights: Vec<f64>) -> Result<Self, PolicyError> {
        let sum: f64 = weights.iter().sum();
        if weights.len() != population.len()
            || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE
        {
            return Err(PolicyError::InvalidWeights {
                members: population.len(),
            });
        }
        Ok(MixedPolicy {
            population,
            weights,
        })
    }

    pub fn vertex(population: &'a Population, index: usize) -> Self {
        let mut weights = vec![0.0; population.len()];
        weights[index] = 1.0;
        MixedPolicy {
            population,
            weights,
        }
    }

    pub fn population(&self) -> &'a Population {
        self.population
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// The behavioral policy whose sequence form is the weighted sum of the
/// members' sequence forms.
pub fn mixture_to_behavioral(game: &GameTree, mixture: &MixedPolicy<'_>) -> BehavioralPolicy {
    mix_members(game, mixture.population.members(), &mixture.weights)
}

/// [`mixture_to_behavioral`] over a plain member slice. Weights are not
/// validated.
pub fn mix_members(game: &GameTree, members: &[BehavioralPolicy], weights: &[f64]) -> BehavioralPolicy {
    let support: Vec<usize> = (0..members.len()).filter(|&k| weights[k] > 0.0).collect();
    if let [only] = support[..] {
        return members[only].clone();
    }
    let forms: Vec<SequenceForm> = support
        .iter()
        .map(|&k| to_sequence_form(game, &members[k]))
        .collect();
    let weights: Vec<f64> = support.iter().map(|&k| weights[k]).collect();
    sequence_to_behavioral(game, &SequenceForm::combine(&forms, &weights))
}

/// Weight vectors for hull sampling over `n` members: the `n` vertices first,
/// then `k - n` uniform draws from the simplex. When `k ≤ n` only the
/// vertices are returned.
pub fn sample_hull_weights<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut samples: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut w = vec![0.0; n];
            w[i] = 1.0;
            w
        })
        .collect();
    for _ in n..k {
        samples.push(simplex_point(n, rng));
    }
    samples
}

pub fn sample_hull<'a, R: Rng + ?Sized>(
    population: &'a Population,
    k: usize,
    rng: &mut R,
) -> Vec<MixedPolicy<'a>> {
    sample_hull_weights(population.len(), k, rng)
        .into_iter()
        .map(|weights| MixedPolicy {
            population,
            weights,
        })
        .collect()
}
