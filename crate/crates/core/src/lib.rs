//! Search-based testing of driving agents.
//!
//! Scenarios are executed in an embedded deterministic 2-D traffic simulator
//! over a pool of workers, and an evolutionary engine mutates them in search
//! of collisions, stuck egos and deadlocks.

pub mod agents;
pub mod canon;
pub mod cli;
pub mod engine;
pub mod exec;
pub mod geometry;
pub mod network;
pub mod scenario;
pub mod sim;
