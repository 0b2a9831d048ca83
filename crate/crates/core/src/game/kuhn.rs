//! Three-card Kuhn poker: ante 1, a single bet of 1.

use super::tree::{Expansion, GameState, GameTree, Player};

const CARDS: [&str; 3] = ["J", "Q", "K"];

#[derive(Clone)]
enum Kuhn {
    Deal,
    Betting { cards: [usize; 2], history: String },
}

impl Kuhn {
    fn showdown(cards: [usize; 2], stake: f64) -> f64 {
        if cards[0] > cards[1] {
            stake
        } else {
            -stake
        }
    }
}

impl GameState for Kuhn {
    fn expand(self) -> Expansion<Self> {
        match self {
            Kuhn::Deal => {
                let mut outcomes = Vec::with_capacity(6);
                for a in 0..3 {
                    for b in 0..3 {
                        if a != b {
                            outcomes.push((
                                1.0 / 6.0,
                                Kuhn::Betting {
                                    cards: [a, b],
                                    history: String::new(),
                                },
                            ));
                        }
                    }
                }
                Expansion::Chance(outcomes)
            }
            Kuhn::Betting { cards, history } => {
                match history.as_str() {
                    "pp" => return Expansion::Terminal(Kuhn::showdown(cards, 1.0)),
                    "bp" => return Expansion::Terminal(1.0),
                    "pbp" => return Expansion::Terminal(-1.0),
                    "bb" | "pbb" => return Expansion::Terminal(Kuhn::showdown(cards, 2.0)),
                    _ => {}
                }
                let player = if history.len() % 2 == 0 {
                    Player::One
                } else {
                    Player::Two
                };
                let card = CARDS[cards[player.index()]];
                let infostate = format!("{card}:{history}");
                let actions = ["p", "b"]
                    .iter()
                    .map(|a| {
                        (
                            a.to_string(),
                            Kuhn::Betting {
                                cards,
                                history: format!("{history}{a}"),
                            },
                        )
                    })
                    .collect();
                Expansion::Decision {
                    player,
                    infostate,
                    actions,
                }
            }
        }
    }
}

/// Builds Kuhn poker. Information-state keys are `<card>:<history>` with
/// `p` for pass/check/fold and `b` for bet/call.
pub fn build_kuhn() -> GameTree {
    GameTree::from_root("kuhn", Kuhn::Deal).expect("kuhn construction is valid")
}
