//! Exact best responses, exploitability, population exploitability and
//! gamescape distance.

use nalgebra::{DMatrix, DVector};

use crate::error::{EvalError, PolicyError};
use crate::game::{expected_utility, reach, GameTree, Node, Player};
use crate::meta::{solve_zero_sum_ne, MetaGame};
use crate::policy::{mixture_to_behavioral, BehavioralPolicy, MixedPolicy, Population};

const TIE_TOLERANCE: f64 = 1e-13;
/// Response cap for [`restricted_double_oracle`]; only reachable with
/// approximate responders.
pub const MAX_ROUNDS: usize = 1000;

/// Exploitability of one evaluated profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub iteration: usize,
    pub exploitability: f64,
    /// Best-response value of each player, in that player's payoff.
    pub best_response_values: [f64; 2],
    pub wall_time_ms: f64,
}

struct BestResponse<'a> {
    game: &'a GameTree,
    player: Player,
    /// Chance times opponent reach of each node.
    weight: Vec<f64>,
    value: Vec<Option<f64>>,
    choice: Vec<Option<usize>>,
}

impl BestResponse<'_> {
    fn node_value(&mut self, id: usize) -> f64 {
        if let Some(v) = self.value[id] {
            return v;
        }
        let v = match self.game.node(id) {
            Node::Terminal { payoff } => self.weight[id] * self.player.sign() * payoff,
            Node::Chance { outcomes } => outcomes.iter().map(|&(_, c)| self.node_value(c)).sum(),
            Node::Decision {
                player,
                infostate,
                children,
            } => {
                if *player == self.player {
                    let a = self.decide(*infostate);
                    self.node_value(children[a])
                } else {
                    children.iter().map(|&c| self.node_value(c)).sum()
                }
            }
        };
        self.value[id] = Some(v);
        v
    }

    fn decide(&mut self, infostate: usize) -> usize {
        if let Some(a) = self.choice[infostate] {
            return a;
        }
        let game = self.game;
        let info = game.infostate(self.player, infostate);
        let mut totals = vec![0.0; info.num_actions()];
        for &h in &info.nodes {
            let Node::Decision { children, .. } = game.node(h) else {
                unreachable!("information states hold decision nodes")
            };
            for (a, &c) in children.iter().enumerate() {
                totals[a] += self.node_value(c);
            }
        }
        let mut best = 0;
        for a in 1..totals.len() {
            if totals[a] > totals[best] + TIE_TOLERANCE {
                best = a;
            }
        }
        self.choice[infostate] = Some(best);
        best
    }
}

/// Pure best response of `player` against `opponent` and its value in
/// `player`'s payoff. Ties go to the lowest action index.
pub fn best_response(
    game: &GameTree,
    opponent: &BehavioralPolicy,
    player: Player,
) -> Result<(BehavioralPolicy, f64), PolicyError> {
    opponent.check(game, player.opponent())?;
    let mut policies = [None, None];
    policies[player.opponent().index()] = Some(opponent);
    let r = reach(game, policies);
    let weight = (0..game.nodes().len())
        .map(|id| r.chance[id] * r.players[player.opponent().index()][id])
        .collect();
    let states = game.infostates(player).len();
    let mut solver = BestResponse {
        game,
        player,
        weight,
        value: vec![None; game.nodes().len()],
        choice: vec![None; states],
    };
    let value = solver.node_value(game.root());
    let actions: Vec<usize> = (0..states).map(|s| solver.decide(s)).collect();
    Ok((BehavioralPolicy::pure(game, player, &actions), value))
}

/// Best response against a point in the opponent's policy hull.
pub fn best_response_to_mixture(
    game: &GameTree,
    opponent: &MixedPolicy<'_>,
    player: Player,
) -> Result<(BehavioralPolicy, f64), PolicyError> {
    best_response(game, &mixture_to_behavioral(game, opponent), player)
}

/// Average over both players of the best-response gain against the profile.
pub fn exploitability(
    game: &GameTree,
    first: &BehavioralPolicy,
    second: &BehavioralPolicy,
) -> Result<f64, PolicyError> {
    Ok(exploitability_report(game, first, second)?.exploitability)
}

pub fn exploitability_report(
    game: &GameTree,
    first: &BehavioralPolicy,
    second: &BehavioralPolicy,
) -> Result<EvalReport, PolicyError> {
    let start = std::time::Instant::now();
    let u = expected_utility(game, first, second)?;
    let (_, v1) = best_response(game, second, Player::One)?;
    let (_, v2) = best_response(game, first, Player::Two)?;
    Ok(EvalReport {
        iteration: 0,
        exploitability: 0.5 * ((v1 - u) + (v2 + u)),
        best_response_values: [v1, v2],
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Value of the restricted meta-game at an equilibrium.
pub fn relative_population_performance(meta: &mut MetaGame) -> f64 {
    meta.solve().value
}

/// Outcome of one unrestricted-versus-restricted double-oracle solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSolve<P> {
    /// Best-response value of the unrestricted player against `weights`; an
    /// upper bound on the unrestricted value, tight within the tolerance.
    pub value: f64,
    /// Value of the last restricted matrix game; a lower bound.
    pub lower_bound: f64,
    /// Equilibrium mixture of the restricted player.
    pub weights: Vec<f64>,
    /// Pure strategies collected for the unrestricted player.
    pub strategies: Vec<P>,
}

/// Double oracle for a player with an unrestricted strategy set facing an
/// opponent confined to the hull of `restricted` members. `payoff(p, k)` is
/// the unrestricted player's payoff of strategy `p` against member `k` and
/// `respond(weights)` returns an exact best response to the member mixture
/// with its value. Stops when the best response improves on the restricted
/// equilibrium value by at most `eps`, or after `MAX_ROUNDS` responses.
pub fn restricted_double_oracle<P, E>(
    restricted: usize,
    mut payoff: impl FnMut(&P, usize) -> Result<f64, E>,
    mut respond: impl FnMut(&[f64]) -> Result<(P, f64), E>,
    eps: f64,
) -> Result<RestrictedSolve<P>, E> {
    let uniform = vec![1.0 / restricted as f64; restricted];
    let (first, _) = respond(&uniform)?;
    let mut rows = vec![(0..restricted)
        .map(|k| payoff(&first, k))
        .collect::<Result<Vec<f64>, E>>()?];
    let mut strategies = vec![first];
    loop {
        let ne = solve_zero_sum_ne(&rows);
        let (candidate, value) = respond(&ne.col)?;
        if value <= ne.value + eps || strategies.len() >= MAX_ROUNDS {
            return Ok(RestrictedSolve {
                value,
                lower_bound: ne.value,
                weights: ne.col,
                strategies,
            });
        }
        rows.push(
            (0..restricted)
                .map(|k| payoff(&candidate, k))
                .collect::<Result<Vec<f64>, E>>()?,
        );
        strategies.push(candidate);
    }
}

/// Population exploitability with both restricted hull equilibria.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationExploitability {
    pub value: f64,
    /// Best-response value of player one against the hull of player two, and
    /// of player two against the hull of player one, each in its own payoff.
    pub unrestricted_values: [f64; 2],
    /// Hull mixtures of player one and player two attaining `value`.
    pub weights: [Vec<f64>; 2],
}

/// Half the sum of the unrestricted players' values against the opponent
/// hulls, each solved by [`restricted_double_oracle`]. The result is the
/// exploitability of the returned hull profile, within `eps` above the exact
/// population exploitability.
pub fn population_exploitability(
    game: &GameTree,
    first: &Population,
    second: &Population,
    eps: f64,
) -> Result<PopulationExploitability, EvalError> {
    if eps <= 0.0 || eps.is_nan() {
        return Err(EvalError::NonPositiveTolerance(eps));
    }
    if first.owner() != Player::One || second.owner() != Player::Two {
        return Err(PolicyError::WrongOwner.into());
    }
    let one = restricted_double_oracle(
        second.len(),
        |b: &BehavioralPolicy, k| expected_utility(game, b, second.get(k)),
        |w| {
            let mix = MixedPolicy::new(second, w.to_vec())?;
            best_response_to_mixture(game, &mix, Player::One)
        },
        eps,
    )?;
    let two = restricted_double_oracle(
        first.len(),
        |b: &BehavioralPolicy, k| expected_utility(game, first.get(k), b).map(|u| -u),
        |w| {
            let mix = MixedPolicy::new(first, w.to_vec())?;
            best_response_to_mixture(game, &mix, Player::Two)
        },
        eps,
    )?;
    Ok(PopulationExploitability {
        value: 0.5 * (one.value + two.value),
        unrestricted_values: [one.value, two.value],
        weights: [two.weights, one.weights],
    })
}

/// Euclidean distance from `m` to the convex hull of the rows of `rows`, with
/// the minimizing convex weights and the optimality residual.
#[derive(Debug, Clone, PartialEq)]
pub struct HullProjection {
    pub distance: f64,
    pub weights: Vec<f64>,
    pub kkt_residual: f64,
}

/// Distance from the payoff vector `m` to the gamescape spanned by `rows`.
pub fn gamescape_distance(rows: &[Vec<f64>], m: &[f64]) -> Result<f64, EvalError> {
    Ok(hull_projection(rows, m)?.distance)
}

/// Minimum-norm point of the shifted hull `conv{rowᵢ − m}` by Wolfe's method.
pub fn hull_projection(rows: &[Vec<f64>], m: &[f64]) -> Result<HullProjection, EvalError> {
    let dim = m.len();
    for row in rows {
        if row.len() != dim {
            return Err(EvalError::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
    }
    let points: Vec<DVector<f64>> = rows
        .iter()
        .map(|r| DVector::from_iterator(dim, r.iter().zip(m).map(|(a, b)| a - b)))
        .collect();
    let n = points.len();
    let scale = points.iter().map(|p| p.norm_squared()).fold(1.0, f64::max);
    let tol = 1e-14 * scale;

    let start = (0..n)
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .expect("non-empty hull");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..(100 * (n + dim + 1)) {
        let (j, best) = (0..n)
            .map(|j| (j, x.dot(&points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty hull");
        if best >= x.norm_squared() - tol || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            let mu = affine_min_norm(&points, &active);
            if mu.iter().all(|&v| v > 1e-15) {
                lambda = mu;
                break;
            }
            let mut theta = 1.0_f64;
            for (l, v) in lambda.iter().zip(&mu) {
                if *v <= 1e-15 && l - v > 0.0 {
                    theta = theta.min(l / (l - v));
                }
            }
            for (l, v) in lambda.iter_mut().zip(&mu) {
                *l += theta * (v - *l);
            }
            let mut keep = Vec::new();
            let mut kept = Vec::new();
            for (i, &l) in lambda.iter().enumerate() {
                if l > 1e-15 {
                    keep.push(active[i]);
                    kept.push(l);
                }
            }
            let total: f64 = kept.iter().sum();
            active = keep;
            lambda = kept.into_iter().map(|l| l / total).collect();
            if active.len() <= 1 {
                break;
            }
        }
        x = combination(&points, &active, &lambda, dim);
    }

    let mut weights = vec![0.0; n];
    for (&i, &l) in active.iter().zip(&lambda) {
        weights[i] = l;
    }
    let norm2 = x.norm_squared();
    let worst = points
        .iter()
        .map(|p| x.dot(p))
        .fold(f64::INFINITY, f64::min);
    Ok(HullProjection {
        distance: norm2.sqrt(),
        weights,
        kkt_residual: (norm2 - worst).max(0.0),
    })
}

fn combination(points: &[DVector<f64>], active: &[usize], weights: &[f64], dim: usize) -> DVector<f64> {
    let mut x = DVector::zeros(dim);
    for (&i, &w) in active.iter().zip(weights) {
        x += &points[i] * w;
    }
    x
}

/// Weights of the minimum-norm point of the affine hull of the active points.
fn affine_min_norm(points: &[DVector<f64>], active: &[usize]) -> Vec<f64> {
    let k = active.len();
    let mut system = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            system[(a, b)] = points[active[a]].dot(&points[active[b]]);
        }
        system[(a, k)] = 1.0;
        system[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    match system.lu().solve(&rhs) {
        Some(sol) => sol.rows(0, k).iter().copied().collect(),
        // affinely dependent set: keep the newest point's weight at zero
        None => {
            let mut w = vec![0.0; k];
            w[0] = 1.0;
            w
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_kuhn, rock_paper_scissors};

    #[test]
    fn rps_responses() {
        let game = rock_paper_scissors().to_tree();
        let uniform = BehavioralPolicy::uniform(&game, Player::Two);
        assert_eq!(best_response(&game, &uniform, Player::One).unwrap().1, 0.0);
        let rock = BehavioralPolicy::pure(&game, Player::Two, &[0]);
        let (br, v) = best_response(&game, &rock, Player::One).unwrap();
        assert_eq!(br.probs(0), &[0.0, 1.0, 0.0]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn rps_exploitability() {
        let game = rock_paper_scissors().to_tree();
        let u1 = BehavioralPolicy::uniform(&game, Player::One);
        let u2 = BehavioralPolicy::uniform(&game, Player::Two);
        assert_eq!(exploitability(&game, &u1, &u2).unwrap(), 0.0);
        let r1 = BehavioralPolicy::pure(&game, Player::One, &[0]);
        let r2 = BehavioralPolicy::pure(&game, Player::Two, &[0]);
        assert_eq!(exploitability(&game, &r1, &r2).unwrap(), 1.0);
    }

    #[test]
    fn kuhn_value_by_full_double_oracle() {
        let game = build_kuhn();
        let mut p1 = Population::singleton(BehavioralPolicy::uniform(&game, Player::One));
        let mut p2 = Population::singleton(BehavioralPolicy::uniform(&game, Player::Two));
        let value = loop {
            let mut meta = crate::meta::fill_payoff_matrix(&game, &p1, &p2).unwrap();
            let ne = meta.solve().clone();
            let x = mixture_to_behavioral(&game, &MixedPolicy::new(&p1, ne.row.clone()).unwrap());
            let y = mixture_to_behavioral(&game, &MixedPolicy::new(&p2, ne.col.clone()).unwrap());
            let (b1, v1) = best_response(&game, &y, Player::One).unwrap();
            let (b2, v2) = best_response(&game, &x, Player::Two).unwrap();
            if v1 <= ne.value + 1e-12 && v2 <= -ne.value + 1e-12 {
                break ne.value;
            }
            p1.push(b1).unwrap();
            p2.push(b2).unwrap();
        };
        assert!((value + 1.0 / 18.0).abs() < 1e-6, "{value}");
    }

    #[test]
    fn gamescape_basics() {
        let rows = vec![vec![0.0, 0.0]];
        assert!((gamescape_distance(&rows, &[1.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let rows = vec![vec![-1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0]];
        assert!(gamescape_distance(&rows, &rows[1]).unwrap() < 1e-12);
        assert!(gamescape_distance(&rows, &[0.5, -1.0, -0.25]).unwrap() > 0.1);
        assert!(matches!(
            gamescape_distance(&rows, &[0.0]),
            Err(EvalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hull_projection_of_interior_and_edge_points() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]];
        let inside = hull_projection(&rows, &[0.5, 0.5]).unwrap();
        assert!(inside.distance < 1e-12);
        let outside = hull_projection(&rows, &[2.0, 2.0]).unwrap();
        assert!((outside.distance - 2f64.sqrt()).abs() < 1e-12);
        assert!((outside.weights[1] - 0.5).abs() < 1e-12);
        assert!(outside.kkt_residual <= 1e-12);
    }
}
