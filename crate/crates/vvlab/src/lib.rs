//! A self-contained Volt-VAR optimization laboratory for radial distribution
//! feeders: power flow, device models, synthetic load/PV scenarios, conformal
//! prediction intervals, an adversarial-state control environment, a robust
//! DDPG agent, and brute-force oracles to check it all against.
//!
//! The accompanying guide under `book/` walks through each subsystem; its
//! code snippets are compiled and run as doc-tests from this crate.

pub mod network;
pub mod powerflow;
pub mod scenario;
pub mod conformal;
pub mod nn;
pub mod env;
pub mod ddpg;
pub mod oracle;
pub mod cli;

#[cfg(doctest)]
mod book;
