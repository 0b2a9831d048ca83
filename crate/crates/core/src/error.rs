use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building, validating or loading games.
#[derive(Debug, Error)]
pub enum GameError {
    #[error("information state `{key}` is reached with different action sets")]
    ActionMismatch { key: String },
    #[error("information state `{key}` violates perfect recall: nodes differ in the owner's action history")]
    PerfectRecall { key: String },
    #[error("information state `{key}` is reached by both players")]
    OwnerMismatch { key: String },
    #[error("decision node for `{key}` has no legal actions")]
    NoActions { key: String },
    #[error("chance node {node} has a distribution summing to {sum}")]
    ChanceDistribution { node: usize, sum: f64 },
    #[error("node {node} has a non-finite payoff or probability")]
    NonFinite { node: usize },
    #[error("node {child} is referenced before its parent {parent}")]
    Ordering { parent: usize, child: usize },
    #[error("information state {infostate} of player {player} has no tree nodes")]
    EmptyInfoState { player: usize, infostate: usize },
    #[error("goofspiel needs between 2 and 8 cards, got {0}")]
    InvalidCardCount(usize),
    #[error("point ({x}, {y}) lies outside the unit disc")]
    OutOfDomain { x: f64, y: f64 },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Errors raised when a policy does not fit its game.
#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy covers {got} information states, the game has {expected}")]
    StateCount { expected: usize, got: usize },
    #[error("information state {infostate} has {got} probabilities, expected {expected}")]
    ActionCount {
        infostate: usize,
        expected: usize,
        got: usize,
    },
    #[error("information state {infostate} does not hold a distribution (sum {sum})")]
    NotADistribution { infostate: usize, sum: f64 },
    #[error("policy owner does not match the requested player")]
    WrongOwner,
    #[error("mixture weights do not form a distribution over {members} members")]
    InvalidWeights { members: usize },
    #[error("population is empty")]
    EmptyPopulation,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Errors from the policy-space distance.
#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("KL divergence is infinite at information state `{key}`: reference assigns zero mass to action {action}")]
    InfiniteKl { key: String, action: usize },
    #[error("weighting opponent must give every action positive probability (information state {infostate})")]
    WeightingSupport { infostate: usize },
    #[error("invalid distance configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Errors from the meta-game solvers.
#[derive(Debug, Error)]
pub enum MetaError {
    #[error("row {index} is outside the support of the row meta-strategy")]
    NotInSupport { index: usize },
    #[error("meta-strategy has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Errors from the evaluation routines.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("payoff vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Errors from the best-response oracles.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("objective diverged at step {step}: value {value}, gradient norm {grad_norm}")]
    Divergence {
        step: usize,
        value: f64,
        grad_norm: f64,
    },
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Errors from a PSRO run or its persisted artifacts.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("oracle failed at iteration {iteration}: {source}")]
    Oracle {
        iteration: usize,
        #[source]
        source: OracleError,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl RunError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }
}
