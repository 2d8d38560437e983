//! Explicit-state model checker for a preemptive ARMv7-M RTOS kernel.
//!
//! The kernel model (exception entry and return, SVC and PendSV handlers,
//! a bitmap scheduler, mutexes and condition variables) runs a
//! producer/consumer workload. [`explorer::dfs_safety`] checks the safety
//! assertions over every reachable state; [`ltl::verify_ltl`] checks LTL
//! properties with a nested depth-first search of the product with a
//! Büchi automaton.

pub mod check;
pub mod config;
pub mod coverage;
pub mod error;
pub mod exception;
pub mod explorer;
pub mod ltl;
pub mod model;
pub mod program;
pub mod sched;
pub mod services;
pub mod state;
pub mod workload;

pub use check::{Check, Violation};
pub use config::{Config, Layout, Mutation, Pid};
pub use coverage::CoverageReport;
pub use explorer::{dfs_safety, Limits, SearchStats, TransitionSystem, Verdict};
pub use model::{KernelModel, Transition};
pub use state::GlobalState;
