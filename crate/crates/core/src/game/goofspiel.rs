//! Two-player Goofspiel with sealed bids.
//!
//! Each player holds bid cards `1..=n` and `n` prize cards are auctioned one
//! per round. Bids are simultaneous: player one bids first and player two's
//! information state hides that bid. Both bids are revealed after the round.
//! The higher bid wins the prize; ties discard it. The last round is forced
//! (one card each) and resolved without a decision node.

use serde::{Deserialize, Serialize};

use super::tree::{Expansion, GameState, GameTree, Player};
use crate::error::GameError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrizeOrder {
    #[default]
    FixedAscending,
    ChanceShuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GoofspielPayoff {
    /// +1 / -1 / 0 for win, loss, draw.
    #[default]
    WinLoss,
    /// Raw difference of collected prize ranks.
    ScoreDifference,
}

#[derive(Clone)]
struct Round {
    prize: usize,
    bids: [usize; 2],
}

#[derive(Clone)]
struct Goofspiel {
    n: usize,
    order: PrizeOrder,
    payoff: GoofspielPayoff,
    rounds: Vec<Round>,
    /// Prize on the table for the current round, once revealed.
    prize: Option<usize>,
    pending_bid: Option<usize>,
}

impl Goofspiel {
    fn remaining(&self, player: usize) -> Vec<usize> {
        (1..=self.n)
            .filter(|c| !self.rounds.iter().any(|r| r.bids[player] == *c))
            .filter(|c| player != 0 || self.pending_bid != Some(*c))
            .collect()
    }

    fn remaining_prizes(&self) -> Vec<usize> {
        (1..=self.n)
            .filter(|c| !self.rounds.iter().any(|r| r.prize == *c))
            .collect()
    }

    fn key(&self, player: usize) -> String {
        let mut key = String::new();
        for r in &self.rounds {
            let (mine, theirs) = (r.bids[player], r.bids[1 - player]);
            key.push_str(&format!("{}:{}-{},", r.prize, mine, theirs));
        }
        key.push_str(&format!("{}", self.prize.expect("prize revealed")));
        key
    }

    fn score(&self) -> f64 {
        let mut diff = 0.0;
        for r in &self.rounds {
            if r.bids[0] > r.bids[1] {
                diff += r.prize as f64;
            } else if r.bids[0] < r.bids[1] {
                diff -= r.prize as f64;
            }
        }
        match self.payoff {
            GoofspielPayoff::ScoreDifference => diff,
            GoofspielPayoff::WinLoss => {
                if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl GameState for Goofspiel {
    fn expand(mut self) -> Expansion<Self> {
        let prizes = self.remaining_prizes();
        if prizes.is_empty() {
            return Expansion::Terminal(self.score());
        }
        if self.prize.is_none() {
            if prizes.len() == 1 || self.order == PrizeOrder::FixedAscending {
                self.prize = Some(prizes[0]);
            } else {
                let p = 1.0 / prizes.len() as f64;
                return Expansion::Chance(
                    prizes
                        .iter()
                        .map(|&prize| {
                            let mut next = self.clone();
                            next.prize = Some(prize);
                            (p, next)
                        })
                        .collect(),
                );
            }
        }
        if prizes.len() == 1 {
            let bids = [self.remaining(0)[0], self.remaining(1)[0]];
            self.rounds.push(Round {
                prize: self.prize.take().expect("prize revealed"),
                bids,
            });
            return Expansion::Terminal(self.score());
        }
        match self.pending_bid {
            None => {
                let infostate = format!("a|{}", self.key(0));
                let actions = self
                    .remaining(0)
                    .into_iter()
                    .map(|bid| {
                        let mut next = self.clone();
                        next.pending_bid = Some(bid);
                        (bid.to_string(), next)
                    })
                    .collect();
                Expansion::Decision {
                    player: Player::One,
                    infostate,
                    actions,
                }
            }
            Some(first) => {
                let infostate = format!("b|{}", self.key(1));
                let actions = self
                    .remaining(1)
                    .into_iter()
                    .map(|bid| {
                        let mut next = self.clone();
                        next.rounds.push(Round {
                            prize: next.prize.take().expect("prize revealed"),
                            bids: [first, bid],
                        });
                        next.pending_bid = None;
                        (bid.to_string(), next)
                    })
                    .collect();
                Expansion::Decision {
                    player: Player::Two,
                    infostate,
                    actions,
                }
            }
        }
    }
}

/// Builds Goofspiel with `n` cards per suit. Keys list completed rounds as
/// `prize:own-opponent,` followed by the current prize.
pub fn build_goofspiel(
    n: usize,
    order: PrizeOrder,
    payoff: GoofspielPayoff,
) -> Result<GameTree, GameError> {
    if !(2..=8).contains(&n) {
        return Err(GameError::InvalidCardCount(n));
    }
    let root = Goofspiel {
        n,
        order,
        payoff,
        rounds: Vec::new(),
        prize: None,
        pending_bid: None,
    };
    GameTree::from_root(format!("goofspiel{n}"), root)
}
