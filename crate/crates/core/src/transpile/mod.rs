//! Transpilation-cost proxy: logical circuits, layout onto an allocated
//! partition, shortest-path SWAP routing, ASAP depth and an analytic
//! success-probability estimate.
//!
//! Layout and routing read the *reported* snapshot; [`pst_estimate`] must
//! be given the *true* one.

mod layout;
mod qasm;
mod route;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;
use crate::{Error, Result};

pub use layout::{initial_layout, Layout};
pub use qasm::{parse_qasm, to_qasm};
pub use route::route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    OneQubit(usize),
    TwoQubit { control: usize, target: usize },
    Measure(usize),
}

impl Gate {
    fn qubits(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Gate::OneQubit(q) | Gate::Measure(q) => (q, None),
            Gate::TwoQubit { control, target } => (control, Some(target)),
        };
        std::iter::once(a).chain(b)
    }
}

/// A tenant program over logical qubits `0..qubit_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalCircuit {
    qubit_count: usize,
    gates: Vec<Gate>,
}

impl LogicalCircuit {
    pub fn new(qubit_count: usize, gates: Vec<Gate>) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::Qasm { line: 0, message: "circuit needs at least one qubit".into() });
        }
        for g in &gates {
            if let Some(q) = g.qubits().find(|&q| q >= qubit_count) {
                return Err(Error::Qasm { line: 0, message: format!("gate {g:?} uses qubit {q} of {qubit_count}") });
            }
            if let Gate::TwoQubit { control, target } = g {
                if control == target {
                    return Err(Error::Qasm { line: 0, message: format!("two-qubit gate on qubit {control} twice") });
                }
            }
        }
        Ok(Self { qubit_count, gates })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::TwoQubit { .. })).count()
    }

    /// ASAP depth of the circuit on its own logical qubits, with no
    /// connectivity constraint.
    pub fn logical_depth(&self) -> usize {
        asap_depth(self.qubit_count, self.gates.iter().map(|g| g.qubits()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhysicalOp {
    /// `swap` marks the three CNOTs that make up a routing SWAP.
    Cnot { control: usize, target: usize, swap: bool },
    OneQubit(usize),
    Measure(usize),
}

impl PhysicalOp {
    fn qubits(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            PhysicalOp::OneQubit(q) | PhysicalOp::Measure(q) => (q, None),
            PhysicalOp::Cnot { control, target, .. } => (control, Some(target)),
        };
        std::iter::once(a).chain(b)
    }
}

/// A circuit placed and routed on one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedCircuit {
    /// Partition members, ascending.
    pub partition: Vec<usize>,
    pub initial_layout: Layout,
    pub final_layout: Layout,
    pub ops: Vec<PhysicalOp>,
    pub swap_count: usize,
}

impl RoutedCircuit {
    pub fn cnot_count(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, PhysicalOp::Cnot { .. })).count()
    }

    /// ASAP schedule length; every op holds its qubits for one layer.
    pub fn depth(&self) -> usize {
        let width = self.ops.iter().flat_map(|op| op.qubits()).max().map_or(0, |q| q + 1);
        asap_depth(width, self.ops.iter().map(|op| op.qubits()))
    }
}

fn asap_depth<I: Iterator<Item = usize>>(width: usize, ops: impl Iterator<Item = I>) -> usize {
    let mut level = vec![0usize; width];
    let mut depth = 0;
    for qubits in ops {
        let qs: Vec<usize> = qubits.collect();
        let layer = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for q in qs {
            level[q] = layer;
        }
        depth = depth.max(layer);
    }
    depth
}

/// Product of `(1 - e)` over every emitted CNOT and `(1 - r)` over every
/// distinct measured qubit, all from `truth`. One-qubit gates are free.
pub fn pst_estimate(r: &RoutedCircuit, truth: &CalibrationSnapshot) -> Result<f64> {
    let mut pst = 1.0;
    let mut measured = BTreeSet::new();
    for op in &r.ops {
        match *op {
            PhysicalOp::Cnot { control, target, .. } => {
                let e = truth
                    .cnot_error(control, target)
                    .ok_or_else(|| Error::Calibration(format!("no cnot error for {control}-{target}")))?;
                pst *= 1.0 - e;
            }
            PhysicalOp::Measure(q) => {
                measured.insert(q);
            }
            PhysicalOp::OneQubit(_) => {}
        }
    }
    for q in measured {
        let r = truth.readout_error(q).ok_or_else(|| Error::Calibration(format!("no readout error for qubit {q}")))?;
        pst *= 1.0 - r;
    }
    Ok(pst)
}
