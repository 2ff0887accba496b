//! Finite-horizon stochastic planning of multi-resource, multi-user
//! allocations under an exogenous Markov availability process, plus a
//! replicator-dynamics analysis of when users sustain or overexploit a
//! shared resource.
//!
//! The pipeline: enumerate the feasible resource-user assignment states
//! ([`state_space`]), estimate per-stage transition matrices from
//! observation logs ([`markov`]), solve each stage's allocation as an
//! exact transportation problem ([`allocation`]), run backward induction
//! and forward occupancy aggregation over the horizon ([`sdp`]), and
//! classify the cooperation game's equilibria and basins ([`game`]).
//! [`cli`] ties the stages together behind the `hydroplan` binary and
//! [`formats`] pins every file format.

pub mod allocation;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod game;
pub mod markov;
pub mod sdp;
pub mod state_space;
mod transport;

pub use error::{Error, Result};
