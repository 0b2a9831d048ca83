//! Command implementations shared by the `psro` binary and its tests.

use std::fmt::Write as _;

use psro_core::error::EvalError;
use psro_core::eval::{gamescape_distance, population_exploitability};
use psro_core::game::{expected_utility, MatrixGame, Player};
use psro_core::policy::{BehavioralPolicy, Population};

/// Gamescape distances below this count as membership.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-8;

/// One base population grown by two candidates against a fixed opponent
/// population, compared on gamescape and population exploitability.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleCase {
    pub name: &'static str,
    /// Distance of the first candidate's payoff row to the second
    /// population's gamescape; zero when contained.
    pub first_into_second: f64,
    /// Distance of the second candidate's payoff row to the first
    /// population's gamescape; positive when the enlargement is strict.
    pub second_outside_first: f64,
    pub pe_first: f64,
    pub pe_second: f64,
}

impl CounterexampleCase {
    pub fn difference(&self) -> f64 {
        self.pe_first - self.pe_second
    }

    /// The second population's gamescape strictly contains the first's
    /// while its population exploitability is strictly larger.
    pub fn reproduced(&self) -> bool {
        self.first_into_second <= MEMBERSHIP_TOLERANCE
            && self.second_outside_first > MEMBERSHIP_TOLERANCE
            && self.difference() < 0.0
    }
}

fn mixed(game: &psro_core::game::GameTree, owner: Player, probs: Vec<f64>) -> BehavioralPolicy {
    BehavioralPolicy::new(game, owner, vec![probs]).expect("valid mixture")
}

fn pure(game: &psro_core::game::GameTree, owner: Player, n: usize, action: usize) -> BehavioralPolicy {
    let mut probs = vec![0.0; n];
    probs[action] = 1.0;
    mixed(game, owner, probs)
}

fn payoff_rows(
    game: &psro_core::game::GameTree,
    members: &[BehavioralPolicy],
    opponents: &[BehavioralPolicy],
) -> Vec<Vec<f64>> {
    members
        .iter()
        .map(|m| {
            opponents
                .iter()
                .map(|o| expected_utility(game, m, o).expect("matching owners"))
                .collect()
        })
        .collect()
}

fn compare(
    name: &'static str,
    matrix: &MatrixGame,
    base: &[BehavioralPolicy],
    candidates: [BehavioralPolicy; 2],
    opponents: &[BehavioralPolicy],
    eps: f64,
) -> Result<CounterexampleCase, EvalError> {
    let game = matrix.to_tree();
    let [first, second] = candidates;
    let grow = |extra: &BehavioralPolicy| {
        let mut members = base.to_vec();
        members.push(extra.clone());
        members
    };
    let (pop_first, pop_second) = (grow(&first), grow(&second));
    let rows_first = payoff_rows(&game, &pop_first, opponents);
    let rows_second = payoff_rows(&game, &pop_second, opponents);
    let first_into_second = gamescape_distance(&rows_second, &rows_first[rows_first.len() - 1])?;
    let second_outside_first = gamescape_distance(&rows_first, &rows_second[rows_second.len() - 1])?;

    let opp = Population::new(opponents.to_vec())?;
    let pe = |own: Vec<BehavioralPolicy>| -> Result<f64, EvalError> {
        Ok(population_exploitability(&game, &Population::new(own)?, &opp, eps)?.value)
    };
    Ok(CounterexampleCase {
        name,
        first_into_second,
        second_outside_first,
        pe_first: pe(pop_first)?,
        pe_second: pe(pop_second)?,
    })
}

/// Rock-paper-scissors for the row player extended with three rows that each
/// lose to exactly one column.
pub fn asymmetric_game() -> MatrixGame {
    MatrixGame::new(vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
        vec![1.0, -1.0, 1.0],
        vec![1.0, 1.0, -1.0],
        vec![-1.0, 1.0, 1.0],
    ])
    .with_labels(&["R", "P", "S", "R'", "P'", "S'"], &["R", "P", "S"])
}

/// Symmetric five-strategy game.
pub fn symmetric_game() -> MatrixGame {
    MatrixGame::new(vec![
        vec![0.0, -1.0, -0.5, -1.0, -4.0],
        vec![1.0, 0.0, 0.5, -1.0, -4.0],
        vec![0.5, -0.5, 0.0, 0.0, 4.0],
        vec![1.0, 1.0, 0.0, 0.0, -4.0],
        vec![4.0, 4.0, -4.0, 4.0, 0.0],
    ])
    .with_labels(&["A", "B", "C", "D", "E"], &["A", "B", "C", "D", "E"])
}

/// Row population `{S, R', P'}` grown by `S'` or by `½R + ½R'`, against the
/// column population `{R, P, ½R + ½P}`.
pub fn asymmetric_case(eps: f64) -> Result<CounterexampleCase, EvalError> {
    let matrix = asymmetric_game();
    let game = matrix.to_tree();
    let row = |a| pure(&game, Player::One, 6, a);
    let col = |a| pure(&game, Player::Two, 3, a);
    let opponents = vec![col(0), col(1), mixed(&game, Player::Two, vec![0.5, 0.5, 0.0])];
    compare(
        "asymmetric",
        &matrix,
        &[row(2), row(3), row(4)],
        [row(5), mixed(&game, Player::One, vec![0.5, 0.0, 0.0, 0.5, 0.0, 0.0])],
        &opponents,
        eps,
    )
}

/// Both players hold `{A, B}`; the row population grows by `C` or by `D`.
pub fn symmetric_case(eps: f64) -> Result<CounterexampleCase, EvalError> {
    let matrix = symmetric_game();
    let game = matrix.to_tree();
    let row = |a| pure(&game, Player::One, 5, a);
    let col = |a| pure(&game, Player::Two, 5, a);
    compare(
        "symmetric",
        &matrix,
        &[row(0), row(1)],
        [row(2), row(3)],
        &[col(0), col(1)],
        eps,
    )
}

pub fn counterexample_report(cases: &[CounterexampleCase]) -> String {
    let mut out = String::new();
    for c in cases {
        let _ = writeln!(out, "{} game", c.name);
        let _ = writeln!(out, "  first candidate to enlarged gamescape: {:.3e}", c.first_into_second);
        let _ = writeln!(out, "  second candidate to smaller gamescape: {:.6}", c.second_outside_first);
        let _ = writeln!(out, "  PE first {:.6}  PE second {:.6}  difference {:.6}", c.pe_first, c.pe_second, c.difference());
        let _ = writeln!(out, "  reproduced: {}", c.reproduced());
    }
    out
}
