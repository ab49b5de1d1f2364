//! Hybrid reinforcement learning: optimistic online learners warm-started
//! with an offline dataset, exact coverage diagnostics, and a seeded
//! experiment harness.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`]: tabular MDPs, policies, trajectories and exact DP oracles.
//! * [`env`]: forest management, mini-Tetris, random MDPs and block MDPs.
//! * [`agents`]: warm-started UCBVI, LSVI-UCB and finite-class DISC-GOLF.
//! * [`diagnostics`]: partitions, concentrability, coverage and regret curves.
//! * [`harness`]: config-driven multi-trial experiments with CSV/SVG output.

pub mod agents;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{
    DeterministicPolicy, OccupancyTensor, StochasticPolicy, TabularMdp, Trajectory,
};
