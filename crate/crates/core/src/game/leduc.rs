//! Two-player Leduc poker.
//!
//! Six cards (two suits of J, Q, K), ante 1, one private card each, a public
//! card after the first betting round. Raises are 2 in the first round and 4
//! in the second, with at most two raises per round. A private card pairing
//! the public card wins, otherwise the higher rank wins; equal ranks split.

use super::tree::{Expansion, GameState, GameTree, Player};

const RANKS: [char; 3] = ['J', 'Q', 'K'];
const MAX_RAISES: usize = 2;

fn rank(card: usize) -> usize {
    card / 2
}

#[derive(Clone)]
enum Leduc {
    Deal,
    Public {
        cards: [usize; 2],
        first: String,
        pot: [f64; 2],
    },
    Betting {
        cards: [usize; 2],
        public: Option<usize>,
        first: String,
        second: String,
        pot: [f64; 2],
    },
}

enum RoundState {
    Open { to_act: Player, facing: bool, raises: usize },
    Folded(Player),
    Closed,
}

fn round_state(history: &str) -> RoundState {
    let bytes = history.as_bytes();
    if let Some(&b'f') = bytes.last() {
        let folder = if bytes.len() % 2 == 1 {
            Player::One
        } else {
            Player::Two
        };
        return RoundState::Folded(folder);
    }
    let raises = bytes.iter().filter(|&&b| b == b'r').count();
    let closed = bytes.len() >= 2 && bytes[bytes.len() - 1] == b'c';
    if closed {
        return RoundState::Closed;
    }
    RoundState::Open {
        to_act: if bytes.len().is_multiple_of(2) {
            Player::One
        } else {
            Player::Two
        },
        facing: bytes.last() == Some(&b'r'),
        raises,
    }
}

fn showdown(cards: [usize; 2], public: usize, pot: [f64; 2]) -> f64 {
    let strength = |c: usize| {
        if rank(c) == rank(public) {
            10 + rank(c)
        } else {
            rank(c)
        }
    };
    let (a, b) = (strength(cards[0]), strength(cards[1]));
    if a > b {
        pot[1]
    } else if a < b {
        -pot[0]
    } else {
        0.0
    }
}

impl GameState for Leduc {
    fn expand(self) -> Expansion<Self> {
        match self {
            Leduc::Deal => {
                let mut outcomes = Vec::with_capacity(30);
                for a in 0..6 {
                    for b in 0..6 {
                        if a != b {
                            outcomes.push((
                                1.0 / 30.0,
                                Leduc::Betting {
                                    cards: [a, b],
                                    public: None,
                                    first: String::new(),
                                    second: String::new(),
                                    pot: [1.0, 1.0],
                                },
                            ));
                        }
                    }
                }
                Expansion::Chance(outcomes)
            }
            Leduc::Public { cards, first, pot } => {
                let outcomes = (0..6)
                    .filter(|c| !cards.contains(c))
                    .map(|c| {
                        (
                            0.25,
                            Leduc::Betting {
                                cards,
                                public: Some(c),
                                first: first.clone(),
                                second: String::new(),
                                pot,
                            },
                        )
                    })
                    .collect();
                Expansion::Chance(outcomes)
            }
            Leduc::Betting {
                cards,
                public,
                first,
                second,
                pot,
            } => {
                let history = if public.is_some() { &second } else { &first };
                match round_state(history) {
                    RoundState::Folded(folder) => Expansion::Terminal(match folder {
                        Player::One => -pot[0],
                        Player::Two => pot[1],
                    }),
                    RoundState::Closed => match public {
                        None => Leduc::Public {
                            cards,
                            first: first.clone(),
                            pot,
                        }
                        .expand(),
                        Some(p) => Expansion::Terminal(showdown(cards, p, pot)),
                    },
                    RoundState::Open {
                        to_act,
                        facing,
                        raises,
                    } => {
                        let me = to_act.index();
                        let raise = if public.is_some() { 4.0 } else { 2.0 };
                        let mine = RANKS[rank(cards[me])];
                        let infostate = match public {
                            None => format!("{mine}:{first}"),
                            Some(p) => format!("{mine}{}:{first}/{second}", RANKS[rank(p)]),
                        };
                        let mut moves: Vec<(char, [f64; 2])> = Vec::new();
                        let to_call = pot[1 - me] - pot[me];
                        if facing {
                            moves.push(('f', pot));
                        }
                        let mut called = pot;
                        called[me] += to_call;
                        moves.push(('c', called));
                        if raises < MAX_RAISES {
                            let mut raised = pot;
                            raised[me] += to_call + raise;
                            moves.push(('r', raised));
                        }
                        let actions = moves
                            .into_iter()
                            .map(|(m, next_pot)| {
                                let (mut f, mut s) = (first.clone(), second.clone());
                                if public.is_some() {
                                    s.push(m);
                                } else {
                                    f.push(m);
                                }
                                (
                                    m.to_string(),
                                    Leduc::Betting {
                                        cards,
                                        public,
                                        first: f,
                                        second: s,
                                        pot: next_pot,
                                    },
                                )
                            })
                            .collect();
                        Expansion::Decision {
                            player: to_act,
                            infostate,
                            actions,
                        }
                    }
                }
            }
        }
    }
}

/// Builds Leduc poker. Keys are `<rank>:<round-1 history>` and
/// `<rank><public rank>:<round-1 history>/<round-2 history>` over actions
/// `f` (fold), `c` (check/call) and `r` (raise).
pub fn build_leduc() -> GameTree {
    GameTree::from_root("leduc", Leduc::Deal).expect("leduc construction is valid")
}
