//! Community-based dynamic allocation: Louvain clusters scored by the
//! connectivity and reliability index (CRI).

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, QubitSubset};
use crate::{Error, Result};

use super::louvain::{louvain, CommunityWeighting};
use super::{argmax_first, cfm, AllocationRequest, Partition};

/// Weight of the fidelity term relative to density over compactness.
const ALPHA: f64 = 1.0;

/// Largest candidate set the exhaustive extraction will enumerate.
pub const EXACT_EXTRACTION_LIMIT: usize = 12;

/// How a connected subset of the requested size is carved out of a larger
/// community.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extraction {
    /// Seeded expansion from the highest-CFM member.
    #[default]
    Greedy,
    /// Exhaustive search for the densest connected subset; only for sets of
    /// at most [`EXACT_EXTRACTION_LIMIT`] qubits.
    Exact,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComdapOptions {
    pub weighting: CommunityWeighting,
    pub extraction: Extraction,
}

/// The hardware-level CRI denominator, computed once per snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareBaseline(f64);

impl HardwareBaseline {
    /// Density, compactness and errors over the whole device.
    pub fn new(g: &CouplingGraph, snap: &CalibrationSnapshot) -> Result<Self> {
        let all = QubitSubset::all(g);
        Ok(Self(structure_and_fidelity(g, snap, &all)?))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `D/C + alpha (1 - (E + R))` for one subset.
fn structure_and_fidelity(g: &CouplingGraph, snap: &CalibrationSnapshot, s: &QubitSubset) -> Result<f64> {
    let density = g.density(s)?;
    let compactness = g.compactness(s)?;
    let intra = g.induced_edges(s.members());
    let e = if intra.is_empty() {
        0.0
    } else {
        intra
            .iter()
            .map(|e| snap.cnot_error(e.low(), e.high()).expect("snapshot covers graph"))
            .sum::<f64>()
            / intra.len() as f64
    };
    let r = s
        .members()
        .iter()
        .map(|&q| snap.readout_error(q).expect("snapshot covers graph"))
        .sum::<f64>()
        / s.len() as f64;
    Ok(density / compactness + ALPHA * (1.0 - (e + r)))
}

/// Connectivity and reliability index of `s`, normalised by the whole
/// device.
pub fn cri(g: &CouplingGraph, snap: &CalibrationSnapshot, s: &QubitSubset) -> Result<f64> {
    let baseline = HardwareBaseline::new(g, snap)?;
    cri_with(g, snap, s, baseline)
}

/// CRI against a fixed hardware normaliser.
pub fn cri_with(g: &CouplingGraph, snap: &CalibrationSnapshot, s: &QubitSubset, baseline: HardwareBaseline) -> Result<f64> {
    Ok(structure_and_fidelity(g, snap, s)? / baseline.value())
}

struct Scorer<'a> {
    g: &'a CouplingGraph,
    snap: &'a CalibrationSnapshot,
    baseline: HardwareBaseline,
    cfm: Vec<f64>,
}

impl Scorer<'_> {
    fn cri(&self, members: &[usize]) -> Result<f64> {
        cri_with(self.g, self.snap, &QubitSubset::new(members.to_vec())?, self.baseline)
    }

    /// Highest CRI; ties go to the candidate with the smallest lowest
    /// member, which is the iteration order callers supply.
    fn best(&self, candidates: Vec<Vec<usize>>) -> Result<Option<(Vec<usize>, f64)>> {
        let scored = candidates
            .into_iter()
            .map(|c| self.cri(&c).map(|s| (c, s)))
            .collect::<Result<Vec<_>>>()?;
        let mut best: Option<(Vec<usize>, f64)> = None;
        for (c, s) in scored {
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((c, s));
            }
        }
        Ok(best)
    }

    /// Grows a connected `size`-subset of `set` from its highest-CFM
    /// member, each step adding the neighbor with the most edges into the
    /// subset (ties: higher CFM, then lower index).
    fn extract_greedy(&self, set: &[usize], size: usize) -> Vec<usize> {
        let seed = argmax_first(set.iter().map(|&q| (q, self.cfm[q]))).expect("non-empty set").0;
        let mut subset = vec![seed];
        while subset.len() < size {
            let mut best: Option<(usize, usize, f64)> = None;
            for &q in set {
                if subset.contains(&q) {
                    continue;
                }
                let links = subset.iter().filter(|&&p| self.g.has_edge(p, q)).count();
                if links == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bq, bl, bc)) => {
                        links > bl || (links == bl && (self.cfm[q] > bc || (self.cfm[q] == bc && q < bq)))
                    }
                };
                if better {
                    best = Some((q, links, self.cfm[q]));
                }
            }
            let (q, ..) = best.expect("connected set always has a frontier");
            subset.push(q);
        }
        subset
    }

    /// Densest connected `size`-subset of `set` by enumeration; ties on
    /// edge count go to higher CRI, then lexicographically smaller.
    fn extract_exact(&self, set: &[usize], size: usize) -> Result<Vec<usize>> {
        if set.len() > EXACT_EXTRACTION_LIMIT {
            return Err(Error::Config(format!(
                "exact extraction is limited to {EXACT_EXTRACTION_LIMIT}-qubit sets, got {}",
                set.len()
            )));
        }
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        let mut best: Option<(Vec<usize>, usize, f64)> = None;
        for mask in 0u32..(1 << sorted.len()) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let cand: Vec<usize> = (0..sorted.len()).filter(|i| mask >> i & 1 == 1).map(|i| sorted[i]).collect();
            if !self.g.is_induced_connected(&cand) {
                continue;
            }
            let edges = self.g.induced_edge_count(&cand);
            let score = self.cri(&cand)?;
            let better = match &best {
                None => true,
                Some((b, be, bs)) => edges > *be || (edges == *be && (score > *bs || (score == *bs && cand < *b))),
            };
            if better {
                best = Some((cand, edges, score));
            }
        }
        Ok(best.expect("a connected set has a connected subset of every size").0)
    }

    fn extract(&self, set: &[usize], size: usize, how: Extraction) -> Result<Vec<usize>> {
        match how {
            Extraction::Greedy => Ok(self.extract_greedy(set, size)),
            Extraction::Exact => self.extract_exact(set, size),
        }
    }
}

/// COMDAP allocation.
///
/// 1. A community of exactly the requested size is returned verbatim (the
///    highest-CRI one if several).
/// 2. Otherwise a connected subset is extracted from every larger
///    community and the highest-CRI extraction wins. A request for a single
///    qubit with no singleton community takes the highest-CFM qubit.
/// 3. Otherwise, starting from the highest-CRI community, adjacent
///    communities are merged in descending CRI order until the merged set
///    is large enough, and step 2 runs on the merged set.
///
/// Returns `None` when no connected available region is large enough.
pub fn comdap_allocate(
    g: &CouplingGraph,
    reported: &CalibrationSnapshot,
    req: &AllocationRequest,
    opts: &ComdapOptions,
) -> Result<Option<Partition>> {
    let size = req.size();
    if size > req.available().len() {
        return Ok(None);
    }
    let mut cfm_scores = vec![f64::NEG_INFINITY; g.qubit_count()];
    for &q in req.available().members() {
        cfm_scores[q] = cfm(g, reported, q)?;
    }
    let scorer = Scorer { g, snap: reported, baseline: HardwareBaseline::new(g, reported)?, cfm: cfm_scores };
    let communities = louvain(g, reported, req.available(), opts.weighting)?.0;

    let exact: Vec<Vec<usize>> = communities.iter().filter(|c| c.len() == size).cloned().collect();
    if let Some((members, score)) = scorer.best(exact)? {
        return Ok(Some(Partition { members: QubitSubset::new(members)?, score }));
    }

    if size == 1 {
        let (q, _) = argmax_first(req.available().sorted().into_iter().map(|q| (q, scorer.cfm[q])))
            .expect("available is non-empty");
        let score = scorer.cri(&[q])?;
        return Ok(Some(Partition { members: QubitSubset::new(vec![q])?, score }));
    }

    let larger: Vec<&Vec<usize>> = communities.iter().filter(|c| c.len() > size).collect();
    if !larger.is_empty() {
        let extracted = larger
            .into_iter()
            .map(|c| scorer.extract(c, size, opts.extraction))
            .collect::<Result<Vec<_>>>()?;
        let (members, score) = scorer.best(extracted)?.expect("at least one candidate");
        return Ok(Some(Partition { members: QubitSubset::new(members)?, score }));
    }

    // merge step
    let community_cri = communities.iter().map(|c| scorer.cri(c)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..communities.len()).collect();
    order.sort_by(|&a, &b| community_cri[b].total_cmp(&community_cri[a]).then(a.cmp(&b)));
    for &start in &order {
        let mut merged_flags = vec![false; communities.len()];
        merged_flags[start] = true;
        let mut merged = communities[start].clone();
        while merged.len() < size {
            let adjacent = order.iter().copied().find(|&c| {
                !merged_flags[c] && communities[c].iter().any(|&q| merged.iter().any(|&p| g.has_edge(p, q)))
            });
            let Some(next) = adjacent else { break };
            merged_flags[next] = true;
            merged.extend_from_slice(&communities[next]);
        }
        if merged.len() >= size {
            let members = scorer.extract(&merged, size, opts.extraction)?;
            let score = scorer.cri(&members)?;
            return Ok(Some(Partition { members: QubitSubset::new(members)?, score }));
        }
    }
    Ok(None)
}
