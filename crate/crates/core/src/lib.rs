//! Simulation, exact best responses and policy-gradient fictitious play for
//! the two-player reimage/probe moving-target-defence game.

pub mod belief;
pub mod check;
pub mod config;
pub mod error;
pub mod game;
pub mod learner;
pub mod oracle;
pub mod policy;
pub mod simulator;
pub mod sweep;

pub use error::{Error, Result};
