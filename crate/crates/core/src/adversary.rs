//! Misreporting heuristics. A plan only ever rewrites the *reported*
//! snapshot; true hardware behaviour is left alone.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, Edge};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    /// Over-report central high-degree qubits.
    H1,
    /// Under-report spread-out high-degree qubits.
    H2,
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::H1 => "H1",
            Heuristic::H2 => "H2",
        })
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(Heuristic::H1),
            "h2" => Ok(Heuristic::H2),
            other => Err(Error::InvalidPlan(format!("unknown heuristic `{other}`"))),
        }
    }
}

/// Why a target was chosen, kept for audit output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEvidence {
    /// Standard deviation of the target's shortest-path distances.
    Sigma(f64),
    /// Minimum hop distance to the previously selected targets (`None` for
    /// the first pick).
    MinDistance(Option<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisreportTarget {
    pub qubit: usize,
    /// Relative change applied to the reported error, e.g. `0.15` for +15%.
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<TargetEvidence>,
}

/// Adversary plan: which qubits to misreport and by how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisreportPlan {
    pub heuristic: Heuristic,
    pub n: usize,
    pub targets: Vec<MisreportTarget>,
}

impl MisreportPlan {
    /// Checks the sign and ordering rules of the plan's heuristic.
    pub fn validate(&self) -> Result<()> {
        if self.targets.len() != self.n {
            return Err(Error::InvalidPlan(format!("n = {} but {} targets", self.n, self.targets.len())));
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.targets {
            if !seen.insert(t.qubit) {
                return Err(Error::InvalidPlan(format!("qubit {} targeted twice", t.qubit)));
            }
            if !t.delta.is_finite() || t.delta <= -1.0 {
                return Err(Error::InvalidPlan(format!("delta {} must be finite and above -1", t.delta)));
            }
        }
        match self.heuristic {
            Heuristic::H1 => {
                if let Some(t) = self.targets.iter().find(|t| t.delta <= 0.0) {
                    return Err(Error::InvalidPlan(format!("H1 over-reports; qubit {} has delta {}", t.qubit, t.delta)));
                }
            }
            Heuristic::H2 => {
                if let Some(t) = self.targets.iter().find(|t| t.delta >= 0.0) {
                    return Err(Error::InvalidPlan(format!("H2 under-reports; qubit {} has delta {}", t.qubit, t.delta)));
                }
                if self.targets.windows(2).any(|w| w[1].delta.abs() >= w[0].delta.abs()) {
                    return Err(Error::InvalidPlan("H2 magnitudes must strictly decrease".into()));
                }
            }
        }
        Ok(())
    }

    /// Largest `|delta|` in the plan, 0 when empty.
    pub fn max_magnitude(&self) -> f64 {
        self.targets.iter().map(|t| t.delta.abs()).fold(0.0, f64::max)
    }

    /// Heuristic I plan: the `n` most central max-degree qubits, each
    /// over-reported by `k` (e.g. `0.15`).
    pub fn heuristic1(g: &CouplingGraph, n: usize, k: f64) -> Result<Self> {
        let targets = heuristic1_targets(g, n)?
            .into_iter()
            .map(|q| {
                let sigma = g.path_stddev(q)?;
                Ok(MisreportTarget { qubit: q, delta: k, evidence: Some(TargetEvidence::Sigma(sigma)) })
            })
            .collect::<Result<Vec<_>>>()?;
        let plan = Self { heuristic: Heuristic::H1, n, targets };
        plan.validate()?;
        Ok(plan)
    }

    /// Heuristic II plan: `ks.len()` spread-out max-degree qubits, the
    /// i-th under-reported by `ks[i]` (magnitudes, e.g. `[0.15, 0.12, 0.10]`).
    pub fn heuristic2(g: &CouplingGraph, ks: &[f64]) -> Result<Self> {
        let picks = heuristic2_targets(g, ks.len())?;
        let dist = g.distances();
        let targets = picks
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let min_d = picks[..i].iter().map(|&p| dist.get(q, p).expect("connected")).min();
                MisreportTarget { qubit: q, delta: -ks[i].abs(), evidence: Some(TargetEvidence::MinDistance(min_d)) }
            })
            .collect();
        let plan = Self { heuristic: Heuristic::H2, n: ks.len(), targets };
        plan.validate()?;
        Ok(plan)
    }
}

fn check_target_count(g: &CouplingGraph, n: usize) -> Result<Vec<usize>> {
    if !g.is_connected() {
        return Err(Error::Disconnected("target selection needs a connected graph".into()));
    }
    let pool = g.max_degree_qubits();
    if n == 0 || n > pool.len() {
        return Err(Error::InvalidPlan(format!("n = {n} must be in 1..={} (max-degree qubits)", pool.len())));
    }
    Ok(pool)
}

/// Max-degree qubits ranked by ascending path-distance spread, first `n`.
pub fn heuristic1_targets(g: &CouplingGraph, n: usize) -> Result<Vec<usize>> {
    let pool = check_target_count(g, n)?;
    let mut ranked = pool
        .into_iter()
        .map(|q| g.path_stddev(q).map(|s| (q, s)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(n).map(|(q, _)| q).collect())
}

/// Max-min dispersion over the max-degree qubits: start from the lowest
/// index, then repeatedly take the qubit farthest from all picks so far.
pub fn heuristic2_targets(g: &CouplingGraph, n: usize) -> Result<Vec<usize>> {
    let pool = check_target_count(g, n)?;
    let dist = g.distances();
    let mut picked = vec![pool[0]];
    while picked.len() < n {
        let mut best: Option<(usize, u32)> = None;
        for &q in pool.iter().filter(|q| !picked.contains(q)) {
            let d = picked.iter().map(|&p| dist.get(q, p).expect("connected")).min().expect("non-empty");
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((q, d));
            }
        }
        picked.push(best.expect("pool larger than picks").0);
    }
    Ok(picked)
}

/// Produces the reported snapshot for `plan`. Each edge touching a target
/// is scaled by `1 + delta` and clamped to `[0, 1]`; an edge touching two
/// targets takes the larger-magnitude delta once.
pub fn apply_misreport(truth: &CalibrationSnapshot, g: &CouplingGraph, plan: &MisreportPlan) -> Result<CalibrationSnapshot> {
    let mut factor: BTreeMap<Edge, f64> = BTreeMap::new();
    for t in &plan.targets {
        g.check_qubit(t.qubit)?;
        for e in g.incident_edges(t.qubit) {
            let slot = factor.entry(e).or_insert(t.delta);
            if t.delta.abs() > slot.abs() {
                *slot = t.delta;
            }
        }
    }
    let mut reported = truth.clone();
    for (e, delta) in factor {
        let v = truth.cnot_error(e.low(), e.high()).expect("snapshot covers graph");
        reported.set_cnot_error(e, (v * (1.0 + delta)).clamp(0.0, 1.0));
    }
    Ok(reported)
}
