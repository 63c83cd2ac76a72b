use serde::{Deserialize, Serialize};

use crate::allocation::cfm;
use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, QubitSubset};
use crate::{Error, Result};

use super::{Gate, LogicalCircuit};

/// Logical-to-physical assignment; entry `l` is the physical qubit holding
/// logical qubit `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout(pub Vec<usize>);

impl Layout {
    pub fn identity(n: usize) -> Self {
        Layout((0..n).collect())
    }

    pub fn physical(&self, logical: usize) -> usize {
        self.0[logical]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether the layout is injective and lands exactly on `members`.
    pub fn is_bijection_onto(&self, members: &[usize]) -> bool {
        let mut a = self.0.clone();
        let mut b = members.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        a.windows(2).all(|w| w[0] != w[1]) && a == b
    }
}

/// Places logical qubits onto the partition.
///
/// Logical qubits are taken busiest first (by two-qubit gate count, ties
/// to the lower index). Each one goes to the free physical qubit adjacent
/// to the most already-placed interaction partners, weighted by how often
/// they interact; ties fall back to descending CFM under `reported`, then
/// to the lower physical index.
pub fn initial_layout(
    c: &LogicalCircuit,
    partition: &QubitSubset,
    g: &CouplingGraph,
    reported: &CalibrationSnapshot,
) -> Result<Layout> {
    let n = c.qubit_count();
    if partition.len() != n {
        return Err(Error::Layout(format!("{n}-qubit circuit on a {}-qubit partition", partition.len())));
    }

    let mut interactions = vec![vec![0usize; n]; n];
    let mut participation = vec![0usize; n];
    for gate in c.gates() {
        if let Gate::TwoQubit { control, target } = *gate {
            interactions[control][target] += 1;
            interactions[target][control] += 1;
            participation[control] += 1;
            participation[target] += 1;
        }
    }
    let mut logical: Vec<usize> = (0..n).collect();
    logical.sort_by(|&a, &b| participation[b].cmp(&participation[a]).then(a.cmp(&b)));

    let mut physical = partition
        .sorted()
        .into_iter()
        .map(|p| cfm(g, reported, p).map(|s| (p, s)))
        .collect::<Result<Vec<_>>>()?;
    physical.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut placement: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; physical.len()];
    for &l in &logical {
        let mut best: Option<(usize, usize)> = None;
        for (slot, &(p, _)) in physical.iter().enumerate() {
            if used[slot] {
                continue;
            }
            let affinity: usize = (0..n)
                .filter_map(|m| placement[m].map(|pm| (m, pm)))
                .filter(|&(m, pm)| interactions[l][m] > 0 && g.has_edge(p, pm))
                .map(|(m, _)| interactions[l][m])
                .sum();
            if best.is_none_or(|(_, a)| affinity > a) {
                best = Some((slot, affinity));
            }
        }
        let (slot, _) = best.expect("as many physical as logical qubits");
        used[slot] = true;
        placement[l] = Some(physical[slot].0);
    }
    Ok(Layout(placement.into_iter().map(|p| p.expect("all placed")).collect()))
}
