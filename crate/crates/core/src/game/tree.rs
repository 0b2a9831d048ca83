//! Explicit two-player zero-sum game trees.
//!
//! Nodes live in a flat arena in depth-first pre-order, so every child has a
//! larger id than its parent. Forward passes (reach probabilities) iterate the
//! arena front to back and backward passes iterate it in reverse.
//!
//! Information states are indexed per player in order of first visit. Because
//! of perfect recall an information state is always visited after the one
//! holding its parent sequence, so sequence-form quantities can also be
//! computed by a single front-to-back sweep over information states.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::GameError;

/// One of the two players. Payoffs are always stated for [`Player::One`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// Multiplier turning a player-one payoff into this player's payoff.
    pub fn sign(self) -> f64 {
        match self {
            Player::One => 1.0,
            Player::Two => -1.0,
        }
    }

    pub fn from_index(index: usize) -> Option<Player> {
        match index {
            0 => Some(Player::One),
            1 => Some(Player::Two),
            _ => None,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p{}", self.index() + 1)
    }
}

pub type NodeId = usize;

/// A player's own (information state, action) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sequence {
    pub infostate: usize,
    pub action: usize,
}

#[derive(Debug, Clone)]
pub enum Node {
    Decision {
        player: Player,
        infostate: usize,
        children: Vec<NodeId>,
    },
    Chance {
        outcomes: Vec<(f64, NodeId)>,
    },
    /// Payoff to player one; player two receives the negation.
    Terminal { payoff: f64 },
}

#[derive(Debug, Clone)]
pub struct InfoState {
    pub key: String,
    pub actions: Vec<String>,
    /// The owner's last (information state, action) pair before reaching this state.
    pub parent: Option<Sequence>,
    pub nodes: Vec<NodeId>,
    seq_offset: usize,
}

impl InfoState {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Flat index of the sequence `(self, action)` within the owner's sequence space.
    pub fn sequence_index(&self, action: usize) -> usize {
        self.seq_offset + action
    }
}

/// How a game state unfolds one step. Implemented by the concrete game builders.
pub enum Expansion<S> {
    Terminal(f64),
    Chance(Vec<(f64, S)>),
    Decision {
        player: Player,
        infostate: String,
        actions: Vec<(String, S)>,
    },
}

/// A lazily described game state that [`GameTree::from_root`] expands into an arena.
pub trait GameState: Sized {
    fn expand(self) -> Expansion<Self>;
}

#[derive(Debug, Clone)]
pub struct GameTree {
    name: String,
    nodes: Vec<Node>,
    parents: Vec<Option<NodeId>>,
    infostates: [Vec<InfoState>; 2],
    num_sequences: [usize; 2],
    /// Per player and node: the player's last own sequence on the path to the node.
    last_sequence: [Vec<Option<Sequence>>; 2],
    keys: [HashMap<String, usize>; 2],
}

struct Builder {
    nodes: Vec<Node>,
    parents: Vec<Option<NodeId>>,
    infostates: [Vec<InfoState>; 2],
    keys: [HashMap<String, usize>; 2],
    last_sequence: [Vec<Option<Sequence>>; 2],
}

impl Builder {
    fn build<S: GameState>(
        &mut self,
        state: S,
        parent: Option<NodeId>,
        history: [Option<Sequence>; 2],
    ) -> Result<NodeId, GameError> {
        let id = self.nodes.len();
        self.nodes.push(Node::Terminal { payoff: 0.0 });
        self.parents.push(parent);
        self.last_sequence[0].push(history[0]);
        self.last_sequence[1].push(history[1]);

        let node = match state.expand() {
            Expansion::Terminal(payoff) => {
                if !payoff.is_finite() {
                    return Err(GameError::NonFinite { node: id });
                }
                Node::Terminal { payoff }
            }
            Expansion::Chance(outcomes) => {
                let sum: f64 = outcomes.iter().map(|(p, _)| p).sum();
                if outcomes.iter().any(|(p, _)| !p.is_finite() || *p < 0.0) {
                    return Err(GameError::NonFinite { node: id });
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(GameError::ChanceDistribution { node: id, sum });
                }
                let mut children = Vec::with_capacity(outcomes.len());
                for (p, child) in outcomes {
                    children.push((p, self.build(child, Some(id), history)?));
                }
                Node::Chance { outcomes: children }
            }
            Expansion::Decision {
                player,
                infostate,
                actions,
            } => {
                if actions.is_empty() {
                    return Err(GameError::NoActions { key: infostate });
                }
                let p = player.index();
                if self.keys[1 - p].contains_key(&infostate) {
                    return Err(GameError::OwnerMismatch { key: infostate });
                }
                let labels: Vec<String> = actions.iter().map(|(l, _)| l.clone()).collect();
                let index = match self.keys[p].get(&infostate) {
                    Some(&index) => {
                        let info = &mut self.infostates[p][index];
                        if info.actions != labels {
                            return Err(GameError::ActionMismatch { key: infostate });
                        }
                        if info.parent != history[p] {
                            return Err(GameError::PerfectRecall { key: infostate });
                        }
                        info.nodes.push(id);
                        index
                    }
                    None => {
                        let index = self.infostates[p].len();
                        let seq_offset = self.infostates[p]
                            .last()
                            .map_or(0, |s| s.seq_offset + s.actions.len());
                        self.infostates[p].push(InfoState {
                            key: infostate.clone(),
                            actions: labels,
                            parent: history[p],
                            nodes: vec![id],
                            seq_offset,
                        });
                        self.keys[p].insert(infostate, index);
                        index
                    }
                };
                let mut children = Vec::with_capacity(actions.len());
                for (a, (_, child)) in actions.into_iter().enumerate() {
                    let mut next = history;
                    next[p] = Some(Sequence {
                        infostate: index,
                        action: a,
                    });
                    children.push(self.build(child, Some(id), next)?);
                }
                Node::Decision {
                    player,
                    infostate: index,
                    children,
                }
            }
        };
        self.nodes[id] = node;
        Ok(id)
    }
}

impl GameTree {
    /// Expands `root` depth-first into an arena, interning information states by key.
    pub fn from_root<S: GameState>(name: impl Into<String>, root: S) -> Result<Self, GameError> {
        let mut builder = Builder {
            nodes: Vec::new(),
            parents: Vec::new(),
            infostates: [Vec::new(), Vec::new()],
            keys: [HashMap::new(), HashMap::new()],
            last_sequence: [Vec::new(), Vec::new()],
        };
        builder.build(root, None, [None, None])?;
        let num_sequences = [0, 1].map(|p| {
            builder.infostates[p]
                .last()
                .map_or(0, |s| s.seq_offset + s.actions.len())
        });
        let tree = GameTree {
            name: name.into(),
            nodes: builder.nodes,
            parents: builder.parents,
            infostates: builder.infostates,
            num_sequences,
            last_sequence: builder.last_sequence,
            keys: builder.keys,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parents[id]
    }

    pub fn infostates(&self, player: Player) -> &[InfoState] {
        &self.infostates[player.index()]
    }

    pub fn infostate(&self, player: Player, index: usize) -> &InfoState {
        &self.infostates[player.index()][index]
    }

    pub fn infostate_index(&self, player: Player, key: &str) -> Option<usize> {
        self.keys[player.index()].get(key).copied()
    }

    pub fn num_sequences(&self, player: Player) -> usize {
        self.num_sequences[player.index()]
    }

    /// The player's last own sequence on the path from the root to `node`
    /// (not counting a decision taken at `node` itself).
    pub fn last_sequence(&self, player: Player, node: NodeId) -> Option<Sequence> {
        self.last_sequence[player.index()][node]
    }

    pub fn terminals(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(id, n)| match n {
            Node::Terminal { payoff } => Some((id, *payoff)),
            _ => None,
        })
    }

    /// True when every player acts at most once on any path, as in a matrix game
    /// or any other single-state game.
    pub fn is_single_state(&self) -> bool {
        Player::BOTH
            .iter()
            .all(|&p| self.infostates(p).len() == 1 && self.infostates(p)[0].parent.is_none())
    }

    /// Re-checks the structural invariants: pre-order ids, chance distributions,
    /// finite payoffs, non-empty information states and perfect recall.
    pub fn validate(&self) -> Result<(), GameError> {
        for (id, node) in self.nodes.iter().enumerate() {
            let children: Vec<NodeId> = match node {
                Node::Terminal { payoff } => {
                    if !payoff.is_finite() {
                        return Err(GameError::NonFinite { node: id });
                    }
                    Vec::new()
                }
                Node::Chance { outcomes } => {
                    let sum: f64 = outcomes.iter().map(|(p, _)| p).sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        return Err(GameError::ChanceDistribution { node: id, sum });
                    }
                    outcomes.iter().map(|&(_, c)| c).collect()
                }
                Node::Decision {
                    player,
                    infostate,
                    children,
                } => {
                    let info = &self.infostates[player.index()][*infostate];
                    if info.actions.len() != children.len() {
                        return Err(GameError::ActionMismatch {
                            key: info.key.clone(),
                        });
                    }
                    if self.last_sequence(*player, id) != info.parent {
                        return Err(GameError::PerfectRecall {
                            key: info.key.clone(),
                        });
                    }
                    children.clone()
                }
            };
            for child in children {
                if child <= id || self.parents[child] != Some(id) {
                    return Err(GameError::Ordering { parent: id, child });
                }
            }
        }
        for player in Player::BOTH {
            for (index, info) in self.infostates(player).iter().enumerate() {
                if info.nodes.is_empty() {
                    return Err(GameError::EmptyInfoState {
                        player: player.index(),
                        infostate: index,
                    });
                }
                for &node in &info.nodes {
                    match &self.nodes[node] {
                        Node::Decision {
                            player: owner,
                            infostate,
                            ..
                        } if *owner == player && *infostate == index => {}
                        _ => {
                            return Err(GameError::PerfectRecall {
                                key: info.key.clone(),
                            })
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
