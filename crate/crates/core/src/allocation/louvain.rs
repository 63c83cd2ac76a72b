//! Deterministic Louvain modularity maximisation over the available part
//! of the coupling graph.
//!
//! Nodes are visited in ascending order and each visit applies the best
//! strictly improving move immediately; ties between candidate communities
//! go to the lowest community id. Levels aggregate until a level makes no
//! move. Communities that end up disconnected in the coupling graph are
//! split into their connected pieces.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, QubitSubset};
use crate::{Error, Result};

use super::CommunitySet;

const MAX_PASSES: usize = 100;
const MAX_LEVELS: usize = 32;
const GAIN_EPS: f64 = 1e-12;

/// How calibration data turns into Louvain edge weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommunityWeighting {
    /// `max(0, 1 - cnot_error)`.
    #[default]
    Fidelity,
    /// Every edge weighs 1; calibration data is ignored.
    Unweighted,
}

impl CommunityWeighting {
    pub fn name(&self) -> &'static str {
        match self {
            CommunityWeighting::Fidelity => "fidelity",
            CommunityWeighting::Unweighted => "unweighted",
        }
    }

    pub fn weight(&self, cnot_error: f64) -> f64 {
        match self {
            CommunityWeighting::Fidelity => (1.0 - cnot_error).max(0.0),
            CommunityWeighting::Unweighted => 1.0,
        }
    }
}

impl fmt::Display for CommunityWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CommunityWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity" => Ok(CommunityWeighting::Fidelity),
            "unweighted" => Ok(CommunityWeighting::Unweighted),
            other => Err(Error::Config(format!("unknown community weighting `{other}`"))),
        }
    }
}

/// Weighted graph on local node ids with self-loop weights.
struct Level {
    n: usize,
    adj: Vec<BTreeMap<usize, f64>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn total_weight(&self) -> f64 {
        let edges: f64 = self.adj.iter().flat_map(|m| m.values()).sum::<f64>() / 2.0;
        edges + self.self_loops.iter().sum::<f64>()
    }

    fn strength(&self, i: usize) -> f64 {
        self.adj[i].values().sum::<f64>() + 2.0 * self.self_loops[i]
    }

    /// One local-moving phase. Returns the community of each node and
    /// whether anything moved.
    fn local_moves(&self) -> (Vec<usize>, bool) {
        let m2 = 2.0 * self.total_weight();
        let mut comm: Vec<usize> = (0..self.n).collect();
        let strength: Vec<f64> = (0..self.n).map(|i| self.strength(i)).collect();
        let mut tot = strength.clone();
        let mut any_move = false;
        if m2 == 0.0 {
            return (comm, false);
        }
        for _ in 0..MAX_PASSES {
            let mut moved = false;
            for i in 0..self.n {
                let own = comm[i];
                let k = strength[i];
                tot[own] -= k;
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for (&j, &w) in &self.adj[i] {
                    *links.entry(comm[j]).or_insert(0.0) += w;
                }
                let gain = |c: usize, k_in: f64| k_in - tot[c] * k / m2;
                let mut best = own;
                let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
                for (&c, &k_in) in &links {
                    let g = gain(c, k_in);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += k;
                if best != own {
                    comm[i] = best;
                    moved = true;
                    any_move = true;
                }
            }
            if !moved {
                break;
            }
        }
        (comm, any_move)
    }

    /// Collapses communities into nodes. `labels` must be dense `0..k`.
    fn aggregate(&self, labels: &[usize], k: usize) -> Level {
        let mut adj = vec![BTreeMap::new(); k];
        let mut self_loops = vec![0.0; k];
        for i in 0..self.n {
            self_loops[labels[i]] += self.self_loops[i];
            for (&j, &w) in &self.adj[i] {
                let (a, b) = (labels[i], labels[j]);
                if a == b {
                    // each internal edge is seen from both ends
                    self_loops[a] += w / 2.0;
                } else {
                    *adj[a].entry(b).or_insert(0.0) += w;
                }
            }
        }
        Level { n: k, adj, self_loops }
    }
}

/// Renumbers labels densely in order of first appearance.
fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let mut order = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        order.push(*map.entry(l).or_insert(next));
    }
    (order, map.len())
}

/// Louvain communities of the subgraph induced by `available`.
pub fn louvain(
    g: &CouplingGraph,
    reported: &CalibrationSnapshot,
    available: &QubitSubset,
    weighting: CommunityWeighting,
) -> Result<CommunitySet> {
    let nodes = available.sorted();
    for &q in &nodes {
        g.check_qubit(q)?;
    }
    let mut local = vec![usize::MAX; g.qubit_count()];
    for (i, &q) in nodes.iter().enumerate() {
        local[q] = i;
    }
    let mut adj = vec![BTreeMap::new(); nodes.len()];
    for e in g.induced_edges(&nodes) {
        let err = reported.cnot_error(e.low(), e.high()).expect("snapshot covers graph");
        let w = weighting.weight(err);
        if w > 0.0 {
            let (a, b) = (local[e.low()], local[e.high()]);
            adj[a].insert(b, w);
            adj[b].insert(a, w);
        }
    }
    let mut level = Level { n: nodes.len(), adj, self_loops: vec![0.0; nodes.len()] };
    // membership[i] = node of the current level that original node i maps to
    let mut membership: Vec<usize> = (0..nodes.len()).collect();

    for _ in 0..MAX_LEVELS {
        let (comm, moved) = level.local_moves();
        if !moved {
            break;
        }
        let (labels, k) = relabel(&comm);
        for m in &mut membership {
            *m = labels[*m];
        }
        level = level.aggregate(&labels, k);
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in membership.iter().enumerate() {
        groups.entry(c).or_default().push(nodes[i]);
    }
    let mut communities: Vec<Vec<usize>> =
        groups.into_values().flat_map(|members| g.induced_components(&members)).collect();
    communities.sort_by_key(|c| c[0]);
    Ok(CommunitySet(communities))
}
