//! Simulation and analysis toolkit for multi-tenant quantum hardware
//! allocation when the reported calibration data cannot be trusted.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: coupling graphs, shortest paths and subset metrics.
//! - [`calibration`]: true/reported error snapshots, CSV ingestion and a
//!   seeded drift generator.
//! - [`allocation`]: the attractor-node greedy allocator and the
//!   community-based (Louvain + CRI) allocator.
//! - [`adversary`]: the two misreporting heuristics.
//! - [`transpile`]: QASM subset parsing, layout, SWAP routing, depth and
//!   an analytic success-probability estimate.
//! - [`scheduler`]: round-based multi-tenant execution.
//! - [`defense`]: histogram KL-divergence misreport detection.
//! - [`experiment`]: configuration and the baseline-vs-attack drivers used
//!   by the CLI and the Python bindings.

pub mod adversary;
pub mod allocation;
pub mod calibration;
pub mod defense;
mod error;
pub mod experiment;
pub mod scheduler;
pub mod topology;
pub mod transpile;

pub use error::{Error, Result};
