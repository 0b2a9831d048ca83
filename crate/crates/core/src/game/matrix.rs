//! Normal-form zero-sum games and the plain-text payoff-matrix format.
//!
//! The file format is a header line `R C` followed by `R` lines of `C`
//! whitespace-separated decimal numbers, the row player's payoffs.

use std::fmt::Write as _;
use std::path::Path;

use super::tree::{Expansion, GameState, GameTree, Player};
use crate::error::GameError;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl MatrixGame {
    /// Builds a game from row-player payoffs. Panics on ragged or empty input,
    /// which is a programming error; file input goes through [`parse_matrix_game`].
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty(), "empty payoff matrix");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged payoff matrix");
        assert!(
            rows.iter().flatten().all(|v| v.is_finite()),
            "non-finite payoff"
        );
        let row_labels = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let col_labels = (0..cols).map(|j| format!("c{j}")).collect();
        MatrixGame {
            rows,
            row_labels,
            col_labels,
        }
    }

    pub fn with_labels(mut self, rows: &[&str], cols: &[&str]) -> Self {
        assert_eq!(rows.len(), self.num_rows());
        assert_eq!(cols.len(), self.num_cols());
        self.row_labels = rows.iter().map(|s| s.to_string()).collect();
        self.col_labels = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Column player's view: the negated transpose.
    pub fn negated_transpose(&self) -> MatrixGame {
        let rows = (0..self.num_cols())
            .map(|j| self.rows.iter().map(|r| -r[j]).collect())
            .collect();
        MatrixGame {
            rows,
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
        }
    }

    /// Serializes into the payoff-matrix text format. Values use Rust's
    /// shortest round-trip representation, so parsing the text is lossless.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_rows(), self.num_cols());
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Wraps the game as a two-decision tree: player one picks a row, then
    /// player two picks a column without observing it.
    pub fn to_tree(&self) -> GameTree {
        GameTree::from_root("matrix", MatrixState::Row(self))
            .expect("matrix game construction is valid")
    }
}

enum MatrixState<'a> {
    Row(&'a MatrixGame),
    Col(&'a MatrixGame, usize),
    Done(f64),
}

impl GameState for MatrixState<'_> {
    fn expand(self) -> Expansion<Self> {
        match self {
            MatrixState::Row(game) => Expansion::Decision {
                player: Player::One,
                infostate: "row".into(),
                actions: game
                    .row_labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.clone(), MatrixState::Col(game, i)))
                    .collect(),
            },
            MatrixState::Col(game, i) => Expansion::Decision {
                player: Player::Two,
                infostate: "col".into(),
                actions: game
                    .col_labels
                    .iter()
                    .enumerate()
                    .map(|(j, l)| (l.clone(), MatrixState::Done(game.rows[i][j])))
                    .collect(),
            },
            MatrixState::Done(payoff) => Expansion::Terminal(payoff),
        }
    }
}

/// Rock-paper-scissors with rows and columns ordered R, P, S.
pub fn rock_paper_scissors() -> MatrixGame {
    MatrixGame::new(vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ])
    .with_labels(&["R", "P", "S"], &["R", "P", "S"])
}

fn parse_error(source: &str, line: usize, column: usize, message: impl Into<String>) -> GameError {
    GameError::Parse {
        path: source.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Parses the payoff-matrix text format. `source` names the input in diagnostics.
pub fn parse_matrix_game(text: &str, source: &str) -> Result<MatrixGame, GameError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(source, 1, 1, "missing `R C` header"))?;
    let dims: Vec<(usize, &str)> = tokens(header).collect();
    if dims.len() != 2 {
        return Err(parse_error(
            source,
            1,
            1,
            format!("header must hold two integers, found {} fields", dims.len()),
        ));
    }
    let mut size = [0usize; 2];
    for (k, &(col, tok)) in dims.iter().enumerate() {
        size[k] = tok
            .parse()
            .ok()
            .filter(|&v: &usize| v > 0)
            .ok_or_else(|| parse_error(source, 1, col, format!("invalid dimension `{tok}`")))?;
    }
    let [r, c] = size;
    let mut rows = Vec::with_capacity(r);
    for (index, line) in lines.by_ref() {
        let lineno = index + 1;
        if rows.len() == r {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_error(
                source,
                lineno,
                1,
                format!("unexpected content after {r} rows"),
            ));
        }
        let mut row = Vec::with_capacity(c);
        for (col, tok) in tokens(line) {
            let v: f64 = tok.parse().map_err(|_| {
                parse_error(source, lineno, col, format!("`{tok}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_error(source, lineno, col, "payoff must be finite"));
            }
            row.push(v);
        }
        if row.len() != c {
            return Err(parse_error(
                source,
                lineno,
                1,
                format!("row {} has {} entries, expected {c}", rows.len() + 1, row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != r {
        return Err(parse_error(
            source,
            text.lines().count() + 1,
            1,
            format!("expected {r} rows, found {}", rows.len()),
        ));
    }
    Ok(MatrixGame::new(rows))
}

/// Tokens with their 1-based character column.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (line[..offset].chars().count() + 1, tok)
    })
}

pub fn load_matrix_game(path: impl AsRef<Path>) -> Result<MatrixGame, GameError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GameError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix_game(&text, &path.display().to_string())
}
