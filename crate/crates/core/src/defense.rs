//! Misreport detection by comparing each qubit's error distribution across
//! two windows of calibration cycles with the Kullback-Leibler divergence.

use serde::{Deserialize, Serialize};

use crate::adversary::{apply_misreport, MisreportPlan};
use crate::calibration::CalibrationSeries;
use crate::topology::CouplingGraph;
use crate::{Error, Result};

/// Smoothed histogram over shared bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDistribution {
    bin_edges: Vec<f64>,
    probabilities: Vec<f64>,
}

impl ErrorDistribution {
    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// `bins` equal-width bins spanning `[lo, hi]`.
pub fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

/// Normalised histogram of `samples`, then `eps` added to every bin and
/// renormalised. The last bin is closed on the right.
pub fn build_distribution(samples: &[f64], bin_edges: &[f64], eps: f64) -> Result<ErrorDistribution> {
    if bin_edges.len() < 2 {
        return Err(Error::Detection("need at least two bin edges".into()));
    }
    if bin_edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Detection("bin edges must be strictly ascending".into()));
    }
    if samples.is_empty() {
        return Err(Error::Detection("no samples".into()));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Detection(format!("smoothing {eps} must be non-negative")));
    }
    let (lo, hi) = (bin_edges[0], bin_edges[bin_edges.len() - 1]);
    let bins = bin_edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if !(lo..=hi).contains(&x) {
            return Err(Error::Detection(format!("sample {x} outside [{lo}, {hi}]")));
        }
        // first edge strictly above x, minus one; x == hi falls in the last bin
        let idx = bin_edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    let norm = 1.0 + eps * bins as f64;
    let probabilities = counts.iter().map(|&c| (c as f64 / n + eps) / norm).collect();
    Ok(ErrorDistribution { bin_edges: bin_edges.to_vec(), probabilities })
}

/// `D(P || Q) = sum P ln(P / Q)`, in nats. Bins where `P` is zero add
/// nothing.
pub fn kl_divergence(p: &ErrorDistribution, q: &ErrorDistribution) -> Result<f64> {
    if p.bin_edges != q.bin_edges {
        return Err(Error::Detection("distributions use different bins".into()));
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.probabilities.iter().zip(&q.probabilities) {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::Detection("reference distribution has an empty bin; use eps > 0".into()));
        }
        total += pi * (pi / qi).ln();
    }
    // rounding can leave tiny negatives for identical inputs
    Ok(total.max(0.0))
}

/// Gaussian kernel density of `samples` evaluated on `grid`. Bandwidth
/// follows Silverman's rule when `bandwidth` is `None`. For plotting only.
pub fn kde_on_grid(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Vec<f64> {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return vec![0.0; grid.len()];
    }
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let h = bandwidth.unwrap_or_else(|| 1.06 * sd * n.powf(-0.2)).max(f64::MIN_POSITIVE);
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| samples.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect()
}

/// Inclusive range of cycle ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleWindow {
    pub start: u64,
    pub end: u64,
}

impl CycleWindow {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if end < start {
            return Err(Error::Detection(format!("window {start}..={end} is empty")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, cycle: u64) -> bool {
        (self.start..=self.end).contains(&cycle)
    }

    pub fn overlaps(&self, other: &CycleWindow) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl std::str::FromStr for CycleWindow {
    type Err = Error;

    /// `a..b` (inclusive) or `a-b`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .or_else(|| s.split_once('-'))
            .ok_or_else(|| Error::Config(format!("window `{s}` is not `start..end`")))?;
        let parse = |v: &str| v.trim().parse::<u64>().map_err(|_| Error::Config(format!("bad cycle id in window `{s}`")));
        Self::new(parse(a)?, parse(b)?).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub bins: usize,
    pub eps: f64,
    pub tau: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { bins: 10, eps: 1e-9, tau: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitDivergence {
    pub qubit: usize,
    pub divergence: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub qubits: Vec<QubitDivergence>,
    pub tau: f64,
    pub flagged: Vec<usize>,
    pub params: DetectParams,
    pub window1: CycleWindow,
    pub window2: CycleWindow,
}

fn window_samples(series: &CalibrationSeries, g: &CouplingGraph, q: usize, w: CycleWindow) -> Result<Vec<f64>> {
    series
        .snapshots()
        .iter()
        .filter(|s| w.contains(s.cycle_id()))
        .map(|s| s.avg_cnot_error(g, q))
        .collect()
}

/// Per-qubit `D(window1 || window2)` for every qubit with at least one
/// coupling edge.
pub fn window_divergences(
    series: &CalibrationSeries,
    g: &CouplingGraph,
    window1: CycleWindow,
    window2: CycleWindow,
    bins: usize,
    eps: f64,
) -> Result<Vec<(usize, f64)>> {
    if window1.overlaps(&window2) {
        return Err(Error::Detection("windows overlap".into()));
    }
    if bins == 0 {
        return Err(Error::Detection("need at least one bin".into()));
    }
    let mut out = Vec::new();
    for q in (0..g.qubit_count()).filter(|&q| !g.neighbors(q).is_empty()) {
        let a = window_samples(series, g, q, window1)?;
        let b = window_samples(series, g, q, window2)?;
        if a.len() < 3 || b.len() < 3 {
            return Err(Error::Detection(format!(
                "windows need at least 3 cycles each, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let lo = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
        let hi = a.iter().chain(&b).copied().fold(f64::NEG_INFINITY, f64::max);
        let divergence = if hi <= lo {
            0.0
        } else {
            let edges = equal_width_edges(lo, hi, bins);
            kl_divergence(&build_distribution(&a, &edges, eps)?, &build_distribution(&b, &edges, eps)?)?
        };
        out.push((q, divergence));
    }
    Ok(out)
}

/// Flags every qubit whose divergence exceeds `params.tau`.
pub fn detect(
    series: &CalibrationSeries,
    g: &CouplingGraph,
    window1: CycleWindow,
    window2: CycleWindow,
    params: DetectParams,
) -> Result<DetectionVerdict> {
    let qubits: Vec<QubitDivergence> = window_divergences(series, g, window1, window2, params.bins, params.eps)?
        .into_iter()
        .map(|(qubit, divergence)| QubitDivergence { qubit, divergence, flagged: divergence > params.tau })
        .collect();
    let flagged = qubits.iter().filter(|q| q.flagged).map(|q| q.qubit).collect();
    Ok(DetectionVerdict { qubits, tau: params.tau, flagged, params, window1, window2 })
}

/// Nearest-rank percentile of the pooled divergences of honest runs.
pub fn calibrate_threshold(honest_runs: &[Vec<f64>], percentile: f64) -> Result<f64> {
    if honest_runs.len() < 30 {
        return Err(Error::Detection(format!("need at least 30 honest runs, got {}", honest_runs.len())));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::Detection(format!("percentile {percentile} outside (0, 100]")));
    }
    let mut pool: Vec<f64> = honest_runs.iter().flatten().copied().collect();
    if pool.is_empty() {
        return Err(Error::Detection("honest runs carry no divergences".into()));
    }
    pool.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * pool.len() as f64).ceil() as usize;
    Ok(pool[rank.clamp(1, pool.len()) - 1])
}

/// Largest relative deviation of any window-2 cycle from the window-1
/// mean, per qubit. This is the statistic a fixed-bound threshold detector
/// looks at.
pub fn max_relative_deviation(
    series: &CalibrationSeries,
    g: &CouplingGraph,
    window1: CycleWindow,
    window2: CycleWindow,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for q in (0..g.qubit_count()).filter(|&q| !g.neighbors(q).is_empty()) {
        let a = window_samples(series, g, q, window1)?;
        let b = window_samples(series, g, q, window2)?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::Detection("empty window".into()));
        }
        let reference = a.iter().sum::<f64>() / a.len() as f64;
        if reference == 0.0 {
            return Err(Error::Detection(format!("qubit {q} has zero reference error")));
        }
        let dev = b.iter().map(|x| ((x - reference) / reference).abs()).fold(0.0, f64::max);
        out.push((q, dev));
    }
    Ok(out)
}

/// Fixed-bound detector: flags a qubit when any window-2 cycle deviates
/// from its window-1 mean by more than `bound` (e.g. `0.15`).
pub fn threshold_detect(
    series: &CalibrationSeries,
    g: &CouplingGraph,
    window1: CycleWindow,
    window2: CycleWindow,
    bound: f64,
) -> Result<Vec<usize>> {
    Ok(max_relative_deviation(series, g, window1, window2)?
        .into_iter()
        .filter(|&(_, d)| d > bound)
        .map(|(q, _)| q)
        .collect())
}

/// Replaces every snapshot inside `window` with its misreported version.
pub fn inject_misreport(
    series: &CalibrationSeries,
    g: &CouplingGraph,
    plan: &MisreportPlan,
    window: CycleWindow,
) -> Result<CalibrationSeries> {
    let snapshots = series
        .snapshots()
        .iter()
        .map(|s| if window.contains(s.cycle_id()) { apply_misreport(s, g, plan) } else { Ok(s.clone()) })
        .collect::<Result<Vec<_>>>()?;
    CalibrationSeries::new(snapshots)
}
