use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, QubitSubset};
use crate::Result;

use super::{argmax_first, cfm, AllocationRequest, Partition};

/// Attractor-node greedy allocation.
///
/// The available qubit with the highest CFM becomes the attractor; the
/// partition then grows one qubit at a time by taking the frontier qubit
/// (available and adjacent to the partition) with the highest CFM. Ties go
/// to the lowest index. Returns `None` when the frontier runs dry before
/// the requested size is reached.
pub fn greedy_allocate(
    g: &CouplingGraph,
    reported: &CalibrationSnapshot,
    req: &AllocationRequest,
) -> Result<Option<Partition>> {
    let n = g.qubit_count();
    let mut available = vec![false; n];
    for &q in req.available().members() {
        g.check_qubit(q)?;
        available[q] = true;
    }
    if req.size() > req.available().len() {
        return Ok(None);
    }

    let mut score = vec![f64::NEG_INFINITY; n];
    for q in (0..n).filter(|&q| available[q]) {
        score[q] = cfm(g, reported, q)?;
    }

    let Some((attractor, attractor_cfm)) = argmax_first((0..n).filter(|&q| available[q]).map(|q| (q, score[q]))) else {
        return Ok(None);
    };

    let mut members = vec![attractor];
    let mut taken = vec![false; n];
    let mut frontier = vec![false; n];
    taken[attractor] = true;
    for &v in g.neighbors(attractor) {
        frontier[v] = available[v];
    }
    while members.len() < req.size() {
        let next = argmax_first((0..n).filter(|&q| frontier[q]).map(|q| (q, score[q])));
        let Some((q, _)) = next else {
            return Ok(None);
        };
        members.push(q);
        taken[q] = true;
        frontier[q] = false;
        for &v in g.neighbors(q) {
            if available[v] && !taken[v] {
                frontier[v] = true;
            }
        }
    }
    Ok(Some(Partition { members: QubitSubset::new(members)?, score: attractor_cfm }))
}
