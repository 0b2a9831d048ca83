use rand::Rng;

use super::tree::{GameTree, Node, Player};
use crate::error::PolicyError;
use crate::policy::BehavioralPolicy;

/// Reach probabilities of every node, factored by contributor.
pub(crate) struct Reach {
    pub chance: Vec<f64>,
    pub players: [Vec<f64>; 2],
}

impl Reach {
    pub fn joint(&self, node: usize) -> f64 {
        self.chance[node] * self.players[0][node] * self.players[1][node]
    }
}

/// Forward sweep over the arena. A player without a policy contributes a factor of 1.
pub(crate) fn reach(game: &GameTree, policies: [Option<&BehavioralPolicy>; 2]) -> Reach {
    let n = game.nodes().len();
    let mut chance = vec![0.0; n];
    let mut players = [vec![0.0; n], vec![0.0; n]];
    chance[0] = 1.0;
    players[0][0] = 1.0;
    players[1][0] = 1.0;
    for (id, node) in game.nodes().iter().enumerate() {
        match node {
            Node::Terminal { .. } => {}
            Node::Chance { outcomes } => {
                for &(p, child) in outcomes {
                    chance[child] = chance[id] * p;
                    players[0][child] = players[0][id];
                    players[1][child] = players[1][id];
                }
            }
            Node::Decision {
                player,
                infostate,
                children,
            } => {
                let i = player.index();
                for (a, &child) in children.iter().enumerate() {
                    chance[child] = chance[id];
                    players[1 - i][child] = players[1 - i][id];
                    let p = policies[i].map_or(1.0, |pi| pi.probs(*infostate)[a]);
                    players[i][child] = players[i][id] * p;
                }
            }
        }
    }
    Reach { chance, players }
}

/// Index drawn from a discrete distribution.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Samples one root-to-terminal path, reporting each decision as
/// `(player, infostate, action)`. Returns the terminal payoff to player one.
pub(crate) fn sample_path<R: Rng + ?Sized>(
    game: &GameTree,
    policies: [&BehavioralPolicy; 2],
    rng: &mut R,
    mut visit: impl FnMut(Player, usize, usize),
) -> f64 {
    let mut id = game.root();
    loop {
        match game.node(id) {
            Node::Terminal { payoff } => return *payoff,
            Node::Chance { outcomes } => {
                let k = sample_index(outcomes.iter().map(|o| o.0), rng);
                id = outcomes[k].1;
            }
            Node::Decision {
                player,
                infostate,
                children,
            } => {
                let a = sample_index(policies[player.index()].probs(*infostate).iter().copied(), rng);
                visit(*player, *infostate, a);
                id = children[a];
            }
        }
    }
}

/// Exact expected payoff to player one.
pub fn expected_utility(
    game: &GameTree,
    first: &BehavioralPolicy,
    second: &BehavioralPolicy,
) -> Result<f64, PolicyError> {
    first.check(game, Player::One)?;
    second.check(game, Player::Two)?;
    let r = reach(game, [Some(first), Some(second)]);
    Ok(game
        .terminals()
        .map(|(id, payoff)| r.joint(id) * payoff)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_goofspiel, build_kuhn, rock_paper_scissors, GoofspielPayoff, PrizeOrder};

    /// Recursive path enumeration, independent of the arena sweep.
    fn brute_force(game: &GameTree, node: usize, p1: &BehavioralPolicy, p2: &BehavioralPolicy) -> f64 {
        match game.node(node) {
            Node::Terminal { payoff } => *payoff,
            Node::Chance { outcomes } => outcomes
                .iter()
                .map(|&(p, c)| p * brute_force(game, c, p1, p2))
                .sum(),
            Node::Decision {
                player,
                infostate,
                children,
            } => {
                let pi = if *player == Player::One { p1 } else { p2 };
                children
                    .iter()
                    .zip(pi.probs(*infostate))
                    .map(|(&c, p)| p * brute_force(game, c, p1, p2))
                    .sum()
            }
        }
    }

    #[test]
    fn kuhn_uniform_matches_enumeration() {
        let game = build_kuhn();
        let p1 = BehavioralPolicy::uniform(&game, Player::One);
        let p2 = BehavioralPolicy::uniform(&game, Player::Two);
        let u = expected_utility(&game, &p1, &p2).unwrap();
        assert!((u - brute_force(&game, 0, &p1, &p2)).abs() < 1e-14);
        // uniform Kuhn: every path weighed by hand gives 1/8
        assert!((u - 0.125).abs() < 1e-14, "{u}");
    }

    #[test]
    fn uniform_rps_is_equalizing() {
        let game = rock_paper_scissors().to_tree();
        let uniform = BehavioralPolicy::uniform(&game, Player::One);
        let rock = BehavioralPolicy::pure(&game, Player::Two, &[0]);
        assert_eq!(expected_utility(&game, &uniform, &rock).unwrap(), 0.0);
    }

    #[test]
    fn identical_goofspiel_policies_draw() {
        use rand::SeedableRng;
        let game = build_goofspiel(4, PrizeOrder::FixedAscending, GoofspielPayoff::WinLoss).unwrap();
        // one random distribution per own-perspective history, shared by both seats
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut table = std::collections::HashMap::new();
        for info in game.infostates(Player::One) {
            let dist = crate::policy::simplex_point(info.num_actions(), &mut rng);
            table.insert(info.key[2..].to_string(), dist);
        }
        let seat = |p: Player| {
            let probs = game
                .infostates(p)
                .iter()
                .map(|info| table[&info.key[2..]].clone())
                .collect();
            BehavioralPolicy::new(&game, p, probs).unwrap()
        };
        let u = expected_utility(&game, &seat(Player::One), &seat(Player::Two)).unwrap();
        assert!(u.abs() < 1e-12, "{u}");
    }

    #[test]
    fn wrong_owner_is_rejected() {
        let game = build_kuhn();
        let p1 = BehavioralPolicy::uniform(&game, Player::One);
        assert!(expected_utility(&game, &p1, &p1).is_err());
    }
}
