//! Game definitions: explicit trees, the benchmark builders, matrix games and
//! functional-form games on the plane.

mod functional;
mod goofspiel;
mod kuhn;
mod leduc;
mod matrix;
mod tree;
mod utility;

pub use functional::{
    FunctionalGame2D, Mixture7, MixtureConfig, OpponentSummary, Point, HUMPS, MIXTURE_S,
};
pub use goofspiel::{build_goofspiel, GoofspielPayoff, PrizeOrder};
pub use kuhn::build_kuhn;
pub use leduc::build_leduc;
pub use matrix::{load_matrix_game, parse_matrix_game, rock_paper_scissors, MatrixGame};
pub use tree::{Expansion, GameState, GameTree, InfoState, Node, NodeId, Player, Sequence};
pub use utility::expected_utility;
pub(crate) use utility::{reach, sample_path};
