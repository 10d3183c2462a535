//! Simultaneous-move Monte Carlo tree search for zero-sum perfect-information
//! games, with Hannan-consistent selection (regret matching, Exp3), exact
//! solvers for ground truth, and repeated-game harnesses that check the
//! convergence guarantees empirically.
//!
//! - [`game`]: explicit game trees, generators, JSON files, expected utility
//! - [`policy`]: regret matching, Exp3, exploration wrappers
//! - [`engine`]: the search loop and strategy extraction
//! - [`solver`]: matrix games by LP, backward induction, best responses
//! - [`bandit`]: repeated matrix games with and without payoff error
//! - [`experiment`]: sweep, worst-case search, batteries and audits

pub mod bandit;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod game;
pub mod par;
pub mod policy;
pub mod rng;
pub mod solver;
pub mod strategy;

pub use error::{Error, Result};
pub use game::{GameSpec, MatrixGame, NodeId};
pub use strategy::{BehaviorStrategy, MixedStrategy, Player, Profile};
