//! Simulation and decision library for repeated vector-payoff games and the
//! queueing systems built on them: approachability dynamics, regret-driven
//! play, switched-network scheduling, Lindley recursions with online
//! classification, admission control with lookahead, and memory-limited load
//! balancing. The `harness` module gives every experiment a common config,
//! seeding, and CSV-output surface; the companion CLI crate exposes them as
//! subcommands.

pub mod admission;
pub mod balance;
pub mod convex;
pub mod engine;
pub mod harness;
pub mod lindley;
pub mod network;
pub mod regret;
pub mod rng;
pub mod simplex;
pub mod stats;
