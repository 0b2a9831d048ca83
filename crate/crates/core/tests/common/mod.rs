#![allow(dead_code)]

use psro_core::game::{build_kuhn, GameTree, Node, NodeId, Player};
use psro_core::policy::BehavioralPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn kuhn() -> GameTree {
    build_kuhn()
}

pub fn random_pair(game: &GameTree, seed: u64) -> (BehavioralPolicy, BehavioralPolicy) {
    let mut r = rng(seed);
    (
        BehavioralPolicy::random(game, Player::One, &mut r),
        BehavioralPolicy::random(game, Player::Two, &mut r),
    )
}

/// Probability factors along the path from the root to `id`, split into
/// (player one, player two, chance), found by walking parent links.
pub fn path_factors(
    game: &GameTree,
    id: NodeId,
    one: Option<&BehavioralPolicy>,
    two: Option<&BehavioralPolicy>,
) -> [f64; 3] {
    let mut f = [1.0; 3];
    let mut child = id;
    while let Some(parent) = game.parent(child) {
        match game.node(parent) {
            Node::Chance { outcomes } => {
                f[2] *= outcomes.iter().find(|(_, c)| *c == child).unwrap().0;
            }
            Node::Decision {
                player,
                infostate,
                children,
            } => {
                let a = children.iter().position(|&c| c == child).unwrap();
                let policy = if *player == Player::One { one } else { two };
                if let Some(p) = policy {
                    f[player.index()] *= p.probs(*infostate)[a];
                }
            }
            Node::Terminal { .. } => unreachable!(),
        }
        child = parent;
    }
    f
}

/// Expected payoff to player one by enumerating every terminal history.
pub fn brute_utility(game: &GameTree, one: &BehavioralPolicy, two: &BehavioralPolicy) -> f64 {
    game.nodes()
        .iter()
        .enumerate()
        .filter_map(|(id, n)| match n {
            Node::Terminal { payoff } => {
                let [a, b, c] = path_factors(game, id, Some(one), Some(two));
                Some(a * b * c * payoff)
            }
            _ => None,
        })
        .sum()
}

/// Σ over every (state, action) pair of own reach × weighting/chance reach ×
/// π(a) ln(π(a)/π′(a)), enumerating decision nodes one by one.
pub fn brute_distance(
    game: &GameTree,
    policy: &BehavioralPolicy,
    reference: &BehavioralPolicy,
    weighting: &BehavioralPolicy,
) -> f64 {
    let owner = policy.owner();
    let (one, two) = match owner {
        Player::One => (policy, weighting),
        Player::Two => (weighting, policy),
    };
    let mut total = 0.0;
    for (id, node) in game.nodes().iter().enumerate() {
        if let Node::Decision { player, infostate, .. } = node {
            if *player != owner {
                continue;
            }
            let [a, b, c] = path_factors(game, id, Some(one), Some(two));
            let reach = a * b * c;
            for (p, q) in policy.probs(*infostate).iter().zip(reference.probs(*infostate)) {
                if *p > 0.0 {
                    total += reach * p * (p / q).ln();
                }
            }
        }
    }
    total
}

/// Every pure strategy of `player` as one action index per information state.
pub fn pure_strategies(game: &GameTree, player: Player) -> Vec<BehavioralPolicy> {
    let sizes: Vec<usize> = game.infostates(player).iter().map(|s| s.num_actions()).collect();
    let mut out = Vec::new();
    let mut actions = vec![0; sizes.len()];
    loop {
        out.push(BehavioralPolicy::pure(game, player, &actions));
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return out;
            }
            actions[i] += 1;
            if actions[i] < sizes[i] {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
    }
}
