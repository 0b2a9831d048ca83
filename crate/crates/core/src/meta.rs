//! Restricted meta-games: payoff tables over populations and their Nash equilibria.

use std::fmt::Write as _;

use crate::error::{MetaError, PolicyError};
use crate::game::{expected_utility, GameTree, Player};
use crate::policy::Population;

/// Maximin row strategy, minimax column strategy and the game value.
#[derive(Debug, Clone, PartialEq)]
pub struct NashSolution {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub value: f64,
}

impl NashSolution {
    /// Largest deviation gain of either player against the returned pair.
    pub fn certificate(&self, payoffs: &[Vec<f64>]) -> f64 {
        let best_row = payoffs
            .iter()
            .map(|r| dot(r, &self.col))
            .fold(f64::NEG_INFINITY, f64::max);
        let best_col = (0..self.col.len())
            .map(|j| payoffs.iter().zip(&self.row).map(|(r, x)| x * r[j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        (best_row - self.value).max(self.value - best_col)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Payoff table `M[j][k] = u(row_j, col_k)` with a cached equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaGame {
    payoffs: Vec<Vec<f64>>,
    ne: Option<NashSolution>,
    evaluations: usize,
}

impl MetaGame {
    pub fn from_matrix(payoffs: Vec<Vec<f64>>) -> Self {
        MetaGame {
            payoffs,
            ne: None,
            evaluations: 0,
        }
    }

    /// Fills an `rows × cols` table from an entry evaluator.
    pub fn fill_with<E, F>(rows: usize, cols: usize, mut entry: F) -> Result<Self, E>
    where
        F: FnMut(usize, usize) -> Result<f64, E>,
    {
        let mut meta = MetaGame::from_matrix(Vec::new());
        meta.extend_with(rows, cols, &mut entry)?;
        Ok(meta)
    }

    /// Grows the table to `rows × cols`, evaluating only the missing entries.
    /// Returns the number of entries evaluated.
    pub fn extend_with<E, F>(&mut self, rows: usize, cols: usize, mut entry: F) -> Result<usize, E>
    where
        F: FnMut(usize, usize) -> Result<f64, E>,
    {
        let (old_rows, old_cols) = (self.num_rows(), self.num_cols());
        assert!(rows >= old_rows && cols >= old_cols, "meta-games only grow");
        let mut count = 0;
        for j in 0..old_rows {
            for k in old_cols..cols {
                let v = entry(j, k)?;
                self.payoffs[j].push(v);
                count += 1;
            }
        }
        for j in old_rows..rows {
            let row = (0..cols).map(|k| entry(j, k)).collect::<Result<Vec<_>, E>>()?;
            self.payoffs.push(row);
            count += cols;
        }
        if count > 0 {
            self.ne = None;
        }
        self.evaluations += count;
        Ok(count)
    }

    pub fn payoffs(&self) -> &[Vec<f64>] {
        &self.payoffs
    }

    pub fn num_rows(&self) -> usize {
        self.payoffs.len()
    }

    pub fn num_cols(&self) -> usize {
        self.payoffs.first().map_or(0, Vec::len)
    }

    /// Total entries evaluated since construction.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn solve(&mut self) -> &NashSolution {
        if self.ne.is_none() {
            self.ne = Some(solve_zero_sum_ne(&self.payoffs));
        }
        self.ne.as_ref().expect("just solved")
    }

    pub fn nash(&self) -> Option<&NashSolution> {
        self.ne.as_ref()
    }

    /// The table in the payoff-matrix text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_rows(), self.num_cols());
        for row in &self.payoffs {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Member ids with their equilibrium weights, one `side id weight` line each,
    /// followed by the game value.
    pub fn sidecar_text(&mut self, row_ids: &[String], col_ids: &[String]) -> String {
        let ne = self.solve().clone();
        let mut out = String::new();
        for (id, w) in row_ids.iter().zip(&ne.row) {
            let _ = writeln!(out, "row {id} {w:?}");
        }
        for (id, w) in col_ids.iter().zip(&ne.col) {
            let _ = writeln!(out, "col {id} {w:?}");
        }
        let _ = writeln!(out, "value {:?}", ne.value);
        out
    }
}

/// Exact meta-game between two tree populations.
pub fn fill_payoff_matrix(
    game: &GameTree,
    rows: &Population,
    cols: &Population,
) -> Result<MetaGame, PolicyError> {
    let mut meta = MetaGame::from_matrix(Vec::new());
    extend_payoff_matrix(game, &mut meta, rows, cols)?;
    Ok(meta)
}

/// Adds the entries for population members beyond the current table size.
pub fn extend_payoff_matrix(
    game: &GameTree,
    meta: &mut MetaGame,
    rows: &Population,
    cols: &Population,
) -> Result<usize, PolicyError> {
    if rows.owner() != Player::One || cols.owner() != Player::Two {
        return Err(PolicyError::WrongOwner);
    }
    meta.extend_with(rows.len(), cols.len(), |j, k| {
        expected_utility(game, rows.get(j), cols.get(k))
    })
}

const PIVOT_TOLERANCE: f64 = 1e-12;

/// Nash equilibrium of the zero-sum game with row payoffs `m`.
///
/// After shifting the matrix to be strictly positive, the column player's
/// problem is `max 1ᵀw s.t. (M + c)w ≤ 1, w ≥ 0`, solved with a dense
/// tableau simplex under Bland's rule. The row strategy is read off the
/// slack reduced costs (the dual solution).
pub fn solve_zero_sum_ne(m: &[Vec<f64>]) -> NashSolution {
    let rows = m.len();
    let cols = m[0].len();
    let min = m.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let max = m.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = (max - min).max(1.0);
    let shift = 1.0 - min / scale;

    // [A | I | b], last row holds reduced costs with the objective value in the corner
    let width = cols + rows + 1;
    let mut t = vec![vec![0.0; width]; rows + 1];
    for i in 0..rows {
        for j in 0..cols {
            t[i][j] = m[i][j] / scale + shift;
        }
        t[i][cols + i] = 1.0;
        t[i][width - 1] = 1.0;
    }
    t[rows][..cols].fill(-1.0);
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    while let Some(enter) = (0..cols + rows).find(|&j| t[rows][j] < -PIVOT_TOLERANCE) {
        let mut leave: Option<usize> = None;
        for i in 0..rows {
            if t[i][enter] > PIVOT_TOLERANCE {
                let ratio = t[i][width - 1] / t[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let best = t[l][width - 1] / t[l][enter];
                        if ratio < best - PIVOT_TOLERANCE
                            || (ratio <= best + PIVOT_TOLERANCE && basis[i] < basis[l])
                        {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        // A is positive, so the problem is bounded and a leaving row always exists
        let leave = leave.expect("bounded linear program");
        let pivot = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[leave].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == leave {
                continue;
            }
            let factor = row[enter];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        basis[leave] = enter;
    }

    let mut w = vec![0.0; cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            w[b] = t[i][width - 1].max(0.0);
        }
    }
    let z: Vec<f64> = (0..rows).map(|i| t[rows][cols + i].max(0.0)).collect();
    let col = normalize(w);
    let row = normalize(z);
    let value = m
        .iter()
        .zip(&row)
        .map(|(r, x)| x * dot(r, &col))
        .sum();
    NashSolution { row, col, value }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// Opponent weights for the rectified variant: the column meta-strategy
/// restricted to columns that row `k` beats or ties, renormalized. Falls
/// back to `col` when row `k` loses to every supported column.
pub fn rectified_weights(
    m: &[Vec<f64>],
    row: &[f64],
    col: &[f64],
    k: usize,
) -> Result<Vec<f64>, MetaError> {
    if row.len() != m.len() {
        return Err(MetaError::DimensionMismatch {
            expected: m.len(),
            got: row.len(),
        });
    }
    if col.len() != m[0].len() {
        return Err(MetaError::DimensionMismatch {
            expected: m[0].len(),
            got: col.len(),
        });
    }
    if k >= row.len() || row[k] <= 0.0 {
        return Err(MetaError::NotInSupport { index: k });
    }
    let kept: Vec<f64> = col
        .iter()
        .zip(&m[k])
        .map(|(&w, &v)| if v >= 0.0 { w } else { 0.0 })
        .collect();
    let total: f64 = kept.iter().sum();
    if total > 0.0 {
        Ok(kept.into_iter().map(|w| w / total).collect())
    } else {
        Ok(col.to_vec())
    }
}
