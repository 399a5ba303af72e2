//! Resilient leader-follower consensus over time-varying multi-hop networks.
//!
//! * [`graph`]: digraphs, bounded paths, l-hop neighborhoods, schedules.
//! * [`robustness`]: exact checks of jointly r-robust following graphs.
//! * [`messaging`]: path-carrying relays and minimum message covers.
//! * [`agents`]: MW-MSR and MDP-MSR update rules.
//! * [`adversary`]: Byzantine and malicious attack scripts.
//! * [`engine`]: simulation, convergence reports and trace checks.
//! * [`config`], [`corpus`], [`cli`]: files, shipped examples, command line.

pub mod adversary;
pub mod agents;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod graph;
pub mod messaging;
pub mod robustness;

pub use error::{Error, Result};
pub use graph::{DiGraph, NodeId, NodeSet, Path, TopologySchedule};
