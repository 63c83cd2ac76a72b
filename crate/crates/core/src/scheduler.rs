//! Round-based multi-tenant execution.
//!
//! Each round scans the pending queue in order and places every job the
//! allocator can fit into the still-free qubits; jobs that do not fit are
//! skipped and retried in later rounds. A round closes once a full scan
//! places nothing. Allocation and layout consume the reported snapshot,
//! while success probability is always scored against the true one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationRequest, Allocator};
use crate::calibration::CalibrationSnapshot;
use crate::topology::{CouplingGraph, QubitSubset};
use crate::transpile::{initial_layout, pst_estimate, route, Gate, LogicalCircuit};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: usize,
    pub circuit: LogicalCircuit,
}

impl Job {
    pub fn size(&self) -> usize {
        self.circuit.qubit_count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedJob {
    pub job_id: usize,
    /// Physical qubits in allocation order.
    pub members: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round_index: usize,
    pub placed_jobs: Vec<PlacedJob>,
    pub active_qubits: usize,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobMetrics {
    pub id: usize,
    pub round: usize,
    pub size: usize,
    pub depth: usize,
    pub cnot_count: usize,
    pub swap_count: usize,
    pub pst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub allocator: String,
    /// Louvain weighting, for community-based allocation only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub community_weighting: Option<String>,
    pub total_rounds: usize,
    pub rounds: Vec<RoundReport>,
    /// Per-job metrics in queue order.
    pub jobs: Vec<JobMetrics>,
    pub mean_utilization: f64,
    pub mean_depth: f64,
    pub mean_cnot_count: f64,
    pub mean_swap_count: f64,
    pub mean_pst: f64,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

impl ExperimentReport {
    /// `round,placed,active,utilization` rows.
    pub fn rounds_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["round", "placed", "active", "utilization"]).expect("in-memory write");
        for r in &self.rounds {
            w.write_record([
                r.round_index.to_string(),
                r.placed_jobs.len().to_string(),
                r.active_qubits.to_string(),
                r.utilization.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// `id,round,depth,cnots,swaps,pst` rows.
    pub fn jobs_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "round", "depth", "cnots", "swaps", "pst"]).expect("in-memory write");
        for j in &self.jobs {
            w.write_record([
                j.id.to_string(),
                j.round.to_string(),
                j.depth.to_string(),
                j.cnot_count.to_string(),
                j.swap_count.to_string(),
                j.pst.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Runs the whole queue to completion.
pub fn run_queue(
    jobs: &[Job],
    g: &CouplingGraph,
    truth: &CalibrationSnapshot,
    reported: &CalibrationSnapshot,
    allocator: &Allocator,
) -> Result<ExperimentReport> {
    let n = g.qubit_count();
    if let Some(job) = jobs.iter().find(|j| j.size() > n) {
        return Err(Error::Scheduling(format!("job {} needs {} qubits, hardware has {n}", job.id, job.size())));
    }

    let mut pending: Vec<usize> = (0..jobs.len()).collect();
    let mut rounds = Vec::new();
    let mut metrics: Vec<Option<JobMetrics>> = vec![None; jobs.len()];

    while !pending.is_empty() {
        let round_index = rounds.len();
        let mut free = vec![true; n];
        let mut placed: Vec<(usize, PlacedJob)> = Vec::new();
        loop {
            let mut progress = false;
            let mut still_pending = Vec::with_capacity(pending.len());
            for &idx in &pending {
                let job = &jobs[idx];
                let available: Vec<usize> = (0..n).filter(|&q| free[q]).collect();
                if job.size() > available.len() {
                    still_pending.push(idx);
                    continue;
                }
                let req = AllocationRequest::new(job.size(), QubitSubset::new(available)?)?;
                match allocator.allocate(g, reported, &req)? {
                    Some(p) => {
                        for &q in p.members.members() {
                            free[q] = false;
                        }
                        placed.push((idx, PlacedJob { job_id: job.id, members: p.members.members().to_vec(), score: p.score }));
                        progress = true;
                    }
                    None => still_pending.push(idx),
                }
            }
            pending = still_pending;
            if !progress || pending.is_empty() {
                break;
            }
        }
        if placed.is_empty() {
            let job = &jobs[pending[0]];
            return Err(Error::Scheduling(format!("job {} cannot be placed even on idle hardware", job.id)));
        }

        for (idx, pj) in &placed {
            let job = &jobs[*idx];
            let part = QubitSubset::new(pj.members.clone())?;
            let layout = initial_layout(&job.circuit, &part, g, reported)?;
            let routed = route(&job.circuit, &layout, &part, g)?;
            metrics[*idx] = Some(JobMetrics {
                id: job.id,
                round: round_index,
                size: job.size(),
                depth: routed.depth(),
                cnot_count: routed.cnot_count(),
                swap_count: routed.swap_count,
                pst: pst_estimate(&routed, truth)?,
            });
        }
        let active_qubits: usize = placed.iter().map(|(_, pj)| pj.members.len()).sum();
        rounds.push(RoundReport {
            round_index,
            placed_jobs: placed.into_iter().map(|(_, pj)| pj).collect(),
            active_qubits,
            utilization: active_qubits as f64 / n as f64,
        });
    }

    let jobs: Vec<JobMetrics> = metrics.into_iter().map(|m| m.expect("every job placed")).collect();
    Ok(ExperimentReport {
        allocator: allocator.kind().name().to_string(),
        community_weighting: match allocator {
            Allocator::Comdap(opts) => Some(opts.weighting.name().to_string()),
            Allocator::Greedy => None,
        },
        total_rounds: rounds.len(),
        mean_utilization: mean(rounds.iter().map(|r| r.utilization)),
        mean_depth: mean(jobs.iter().map(|j| j.depth as f64)),
        mean_cnot_count: mean(jobs.iter().map(|j| j.cnot_count as f64)),
        mean_swap_count: mean(jobs.iter().map(|j| j.swap_count as f64)),
        mean_pst: mean(jobs.iter().map(|j| j.pst)),
        rounds,
        jobs,
    })
}

/// Seeded synthetic workload. Each job gets a uniform size in
/// `size_min..=size_max`, a Hadamard on every qubit, about
/// `gate_density * size` CNOTs between uniformly random distinct pairs
/// (none for single-qubit jobs), and a final measurement of every qubit.
pub fn gen_workload(count: usize, size_min: usize, size_max: usize, gate_density: f64, seed: u64) -> Result<Vec<Job>> {
    if size_min == 0 || size_min > size_max {
        return Err(Error::Config(format!("job sizes need 1 <= min <= max, got {size_min}..={size_max}")));
    }
    if !(gate_density.is_finite() && gate_density >= 0.0) {
        return Err(Error::Config(format!("gate density {gate_density} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let size = rng.random_range(size_min..=size_max);
            let mut gates: Vec<Gate> = (0..size).map(Gate::OneQubit).collect();
            if size >= 2 {
                let cnots = ((gate_density * size as f64).round() as usize).max(1);
                for _ in 0..cnots {
                    let control = rng.random_range(0..size);
                    let mut target = rng.random_range(0..size - 1);
                    if target >= control {
                        target += 1;
                    }
                    gates.push(Gate::TwoQubit { control, target });
                }
            }
            gates.extend((0..size).map(Gate::Measure));
            Ok(Job { id, circuit: LogicalCircuit::new(size, gates)? })
        })
        .collect()
}
