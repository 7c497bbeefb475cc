//! Solver and verification toolkit for equilibria of the dynamic trust
//! game in which beliefs come from complexity-penalized partitions of the
//! contingency space.
//!
//! The crate is organised bottom-up:
//!
//! * [`trust_game`]: states, strategies, best replies, ergodic distributions.
//! * [`partition`]: partitions, beliefs, MSPE and the penalized objective.
//! * [`equilibrium`]: verification, closed-form solvers and grid search.
//! * [`bounds`]: numerical counterparts of the cooperation bounds.
//! * [`noise`]: the finite-sample reading of the complexity cost.
//!
//! Data-parallel loops go through [`Execution`]; build without the
//! default `parallel` feature for a purely sequential library.

pub mod bounds;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod noise;
pub mod partition;
pub mod rational;
mod roots;
pub mod trust_game;

pub use config::{Limits, Settings, Tolerances};
pub use error::{Error, Result};
pub use exec::Execution;
pub use partition::{Partition, Penalty};
pub use trust_game::{Action, Contingency, ErgodicDistribution, StateSpace, Strategy};
