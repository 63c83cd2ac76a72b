//! Qubit allocators.
//!
//! Both allocators consume the *reported* calibration snapshot; they never
//! see true error rates. A request either yields a connected [`Partition`]
//! of exactly the requested size or `None`, which tells the scheduler to
//! defer the job to a later round.

mod comdap;
mod greedy;
mod louvain;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, QubitSubset};
use crate::{Error, Result};

pub use comdap::{comdap_allocate, cri, cri_with, ComdapOptions, Extraction, HardwareBaseline};
pub use greedy::greedy_allocate;
pub use louvain::{louvain, CommunityWeighting};

/// A job's demand against the qubits still free in the current round.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRequest {
    size: usize,
    available: QubitSubset,
}

impl AllocationRequest {
    pub fn new(size: usize, available: QubitSubset) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidSubset("requested size must be at least 1".into()));
        }
        Ok(Self { size, available })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn available(&self) -> &QubitSubset {
        &self.available
    }
}

/// Qubits granted to one job, in the order the allocator added them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub members: QubitSubset,
    /// CFM of the attractor for greedy, CRI for COMDAP.
    pub score: f64,
}

/// Disjoint communities covering an available set, each sorted and ordered
/// by smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunitySet(pub Vec<Vec<usize>>);

impl CommunitySet {
    pub fn communities(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Composite fidelity metric: `degree + (1 - (E + R))` with `E` the mean
/// incident CNOT error and `R` the readout error.
pub fn cfm(g: &CouplingGraph, snap: &CalibrationSnapshot, q: usize) -> Result<f64> {
    let degree = g.degree(q)?;
    let e = snap.avg_cnot_error(g, q)?;
    let r = snap.readout_error(q).ok_or(Error::QubitOutOfRange { qubit: q, qubit_count: g.qubit_count() })?;
    Ok(degree as f64 + (1.0 - (e + r)))
}

/// Index of the largest score; ties go to the earliest entry.
pub(crate) fn argmax_first<T: Copy>(items: impl IntoIterator<Item = (T, f64)>) -> Option<(T, f64)> {
    let mut best: Option<(T, f64)> = None;
    for (item, score) in items {
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((item, score));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorKind {
    Greedy,
    Comdap,
}

impl AllocatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            AllocatorKind::Greedy => "greedy",
            AllocatorKind::Comdap => "comdap",
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(AllocatorKind::Greedy),
            "comdap" => Ok(AllocatorKind::Comdap),
            other => Err(Error::Config(format!("unknown allocator `{other}` (expected greedy or comdap)"))),
        }
    }
}

/// An allocator together with its tunables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Allocator {
    #[default]
    Greedy,
    Comdap(ComdapOptions),
}

impl Allocator {
    pub fn kind(&self) -> AllocatorKind {
        match self {
            Allocator::Greedy => AllocatorKind::Greedy,
            Allocator::Comdap(_) => AllocatorKind::Comdap,
        }
    }

    pub fn allocate(
        &self,
        g: &CouplingGraph,
        reported: &CalibrationSnapshot,
        req: &AllocationRequest,
    ) -> Result<Option<Partition>> {
        match self {
            Allocator::Greedy => greedy_allocate(g, reported, req),
            Allocator::Comdap(opts) => comdap_allocate(g, reported, req, opts),
        }
    }
}

impl From<AllocatorKind> for Allocator {
    fn from(kind: AllocatorKind) -> Self {
        match kind {
            AllocatorKind::Greedy => Allocator::Greedy,
            AllocatorKind::Comdap => Allocator::Comdap(ComdapOptions::default()),
        }
    }
}
