//! Population-based equilibrium finding for two-player zero-sum games.
//!
//! The crate provides exact game engines, tabular policies in behavioral and
//! sequence form, a meta-game Nash solver, exact exploitability and
//! population exploitability, payoff-space and policy-space diversity
//! measures, diversity-regularized best-response oracles and the outer
//! population loop that ties them together.

pub mod diversity;
pub mod error;
pub mod eval;
pub mod game;
pub mod meta;
pub mod oracle;
pub mod policy;
pub mod psro;
