//! Experiment configuration and the drivers behind each CLI subcommand.
//!
//! Configs are TOML. Every field has a default, so an empty file is a valid
//! config (hanoi27, uniform 0.02/0.02 errors, greedy, no attack, 40
//! generated jobs of 2 to 10 qubits). Reports embed the fully resolved
//! config, so any report can be replayed from its own contents.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{heuristic2_targets, Heuristic, MisreportPlan};
use crate::allocation::Allocator;
use crate::calibration::{synth_drift, CalibrationSeries, CalibrationSnapshot};
use crate::defense::{calibrate_threshold, detect, window_divergences, CycleWindow, DetectParams, DetectionVerdict};
use crate::scheduler::{gen_workload, run_queue, ExperimentReport, Job};
use crate::topology::{builtin, CouplingGraph};
use crate::transpile::parse_qasm;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologySource {
    Builtin(String),
    File(PathBuf),
}

impl Default for TopologySource {
    fn default() -> Self {
        TopologySource::Builtin("hanoi27".into())
    }
}

impl TopologySource {
    pub fn load(&self) -> Result<CouplingGraph> {
        match self {
            TopologySource::Builtin(name) => {
                builtin(name).ok_or_else(|| Error::Config(format!("topology: unknown builtin `{name}`")))
            }
            TopologySource::File(path) => CouplingGraph::from_edge_list(&read_referenced(path, "topology.file")?),
        }
    }
}

/// True (and, without an attack, reported) calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ErrorModel {
    Uniform {
        cnot: f64,
        readout: f64,
    },
    /// One cycle of a calibration CSV; the first cycle when `cycle` is unset.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cycle: Option<u64>,
    },
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel::Uniform { cnot: 0.02, readout: 0.02 }
    }
}

impl ErrorModel {
    pub fn load(&self, g: &CouplingGraph) -> Result<CalibrationSnapshot> {
        match self {
            ErrorModel::Uniform { cnot, readout } => {
                CalibrationSnapshot::uniform(g, *cnot, *readout).map_err(|e| Error::Config(format!("errors: {e}")))
            }
            ErrorModel::File { path, cycle } => {
                let series = CalibrationSeries::from_csv(g, &read_referenced(path, "errors.path")?)?;
                let mut snaps = series.into_snapshots();
                match cycle {
                    None => Ok(snaps.swap_remove(0)),
                    Some(c) => snaps
                        .into_iter()
                        .find(|s| s.cycle_id() == *c)
                        .ok_or_else(|| Error::Config(format!("errors.cycle: no cycle {c} in {}", path.display()))),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AttackConfig {
    #[default]
    None,
    H1 {
        n: usize,
        k: f64,
    },
    /// Under-report with the given strictly decreasing magnitudes; the
    /// target count is `ks.len()`.
    H2 {
        ks: Vec<f64>,
    },
    /// A plan file as written by `attack-plan`.
    Plan {
        path: PathBuf,
    },
}

impl AttackConfig {
    pub fn plan(&self, g: &CouplingGraph) -> Result<Option<MisreportPlan>> {
        let plan = match self {
            AttackConfig::None => return Ok(None),
            AttackConfig::H1 { n, k } => MisreportPlan::heuristic1(g, *n, *k)?,
            AttackConfig::H2 { ks } => MisreportPlan::heuristic2(g, ks)?,
            AttackConfig::Plan { path } => {
                let plan = parse_plan(&read_referenced(path, "attack.path")?)
                    .map_err(|e| Error::InvalidPlan(format!("{}: {e}", path.display())))?;
                plan.validate()?;
                for t in &plan.targets {
                    g.check_qubit(t.qubit).map_err(|e| Error::InvalidPlan(e.to_string()))?;
                }
                plan
            }
        };
        Ok(Some(plan))
    }
}

/// Reads a bare plan or an `attack-plan` report wrapping one.
pub fn parse_plan(text: &str) -> Result<MisreportPlan> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    if let Some(inner) = value.get_mut("plan") {
        value = inner.take();
    }
    let plan: MisreportPlan = serde_json::from_value(value)?;
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WorkloadConfig {
    Generated {
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default = "default_size_min")]
        size_min: usize,
        #[serde(default = "default_size_max")]
        size_max: usize,
        /// Two-qubit gates per logical qubit.
        #[serde(default = "default_density")]
        gate_density: f64,
        #[serde(default)]
        seed: u64,
    },
    Qasm {
        files: Vec<PathBuf>,
    },
}

fn default_count() -> usize {
    40
}
fn default_size_min() -> usize {
    2
}
fn default_size_max() -> usize {
    10
}
fn default_density() -> f64 {
    2.0
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig::Generated {
            count: default_count(),
            size_min: default_size_min(),
            size_max: default_size_max(),
            gate_density: default_density(),
            seed: 0,
        }
    }
}

impl WorkloadConfig {
    pub fn seed(&self) -> Option<u64> {
        match self {
            WorkloadConfig::Generated { seed, .. } => Some(*seed),
            WorkloadConfig::Qasm { .. } => None,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let WorkloadConfig::Generated { seed, .. } = &mut self {
            *seed = new_seed;
        }
        self
    }

    pub fn load(&self) -> Result<Vec<Job>> {
        match self {
            WorkloadConfig::Generated { count, size_min, size_max, gate_density, seed } => {
                gen_workload(*count, *size_min, *size_max, *gate_density, *seed)
            }
            WorkloadConfig::Qasm { files } => files
                .iter()
                .enumerate()
                .map(|(id, path)| {
                    let text = read_referenced(path, "workload.files")?;
                    let circuit = parse_qasm(&text).map_err(|e| match e {
                        Error::Qasm { line, message } => {
                            Error::Qasm { line, message: format!("{}: {message}", path.display()) }
                        }
                        other => other,
                    })?;
                    Ok(Job { id, circuit })
                })
                .collect(),
        }
    }
}

/// Natural calibration drift, used for the stealth check and for synthetic
/// detection runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub cv: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { cv: 0.30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    pub errors: ErrorModel,
    pub allocator: Allocator,
    pub attack: AttackConfig,
    pub workload: WorkloadConfig,
    pub drift: DriftConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Field-level checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        match &self.attack {
            AttackConfig::H1 { n, k } if *n == 0 || k.is_nan() || *k <= 0.0 => {
                return Err(Error::Config(format!("attack: h1 needs n >= 1 and k > 0, got n = {n}, k = {k}")));
            }
            AttackConfig::H2 { ks } if ks.is_empty() || ks.windows(2).any(|w| w[1] >= w[0]) || ks[0] <= 0.0 => {
                return Err(Error::Config(format!("attack: h2 ks must be positive and strictly decreasing, got {ks:?}")));
            }
            _ => {}
        }
        if let WorkloadConfig::Generated { size_min, size_max, gate_density, .. } = &self.workload {
            if *size_min == 0 || size_min > size_max {
                return Err(Error::Config(format!("workload: need 1 <= size_min <= size_max, got {size_min}..{size_max}")));
            }
            if !(*gate_density >= 0.0 && gate_density.is_finite()) {
                return Err(Error::Config(format!("workload: gate_density {gate_density} must be non-negative")));
            }
        }
        if let WorkloadConfig::Qasm { files } = &self.workload {
            if files.is_empty() {
                return Err(Error::Config("workload: qasm file list is empty".into()));
            }
        }
        if !(0.0..1.5).contains(&self.drift.cv) {
            return Err(Error::Config(format!("drift.cv {} outside [0, 1.5)", self.drift.cv)));
        }
        Ok(())
    }
}

fn read_referenced(path: &Path, field: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{field}: cannot read {}: {e}", path.display())))
}

/// Whether every misreport stays inside the natural fluctuation band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StealthCheck {
    pub max_delta: f64,
    pub drift_cv: f64,
    pub within_drift: bool,
}

/// Attacked minus baseline; percentages are relative to the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub delta_rounds: i64,
    pub delta_utilization: f64,
    pub delta_depth_pct: f64,
    pub delta_pst_pct: f64,
}

fn pct(base: f64, attacked: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (attacked - base) / base * 100.0
    }
}

impl Comparison {
    pub fn between(baseline: &ExperimentReport, attacked: &ExperimentReport) -> Self {
        Self {
            delta_rounds: attacked.total_rounds as i64 - baseline.total_rounds as i64,
            delta_utilization: attacked.mean_utilization - baseline.mean_utilization,
            delta_depth_pct: pct(baseline.mean_depth, attacked.mean_depth),
            delta_pst_pct: pct(baseline.mean_pst, attacked.mean_pst),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<MisreportPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stealth: Option<StealthCheck>,
    pub baseline: ExperimentReport,
    pub attacked: ExperimentReport,
    pub comparison: Comparison,
}

/// Runs the queue once on true errors and once on misreported errors.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulateReport> {
    config.validate()?;
    let g = config.topology.load()?;
    let truth = config.errors.load(&g)?;
    let plan = config.attack.plan(&g)?;
    let jobs = config.workload.load()?;

    let baseline = run_queue(&jobs, &g, &truth, &truth, &config.allocator)?;
    let attacked = match &plan {
        None => baseline.clone(),
        Some(plan) => {
            let reported = crate::adversary::apply_misreport(&truth, &g, plan)?;
            run_queue(&jobs, &g, &truth, &reported, &config.allocator)?
        }
    };
    let stealth = plan.as_ref().map(|p| StealthCheck {
        max_delta: p.max_magnitude(),
        drift_cv: config.drift.cv,
        within_drift: p.max_magnitude() <= config.drift.cv,
    });
    let comparison = Comparison::between(&baseline, &attacked);
    Ok(SimulateReport { config: config.clone(), seed: config.workload.seed(), plan, stealth, baseline, attacked, comparison })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedQubit {
    pub qubit: usize,
    pub value: f64,
}

/// A plan plus the full candidate ranking it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlanReport {
    pub plan: MisreportPlan,
    /// Max-degree qubits by ascending path-distance σ (H1), with ties.
    pub sigma_ranking: Vec<RankedQubit>,
    /// For H2: at each pick after the first, every candidate that reached
    /// the winning min distance.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tied_candidates: Vec<Vec<usize>>,
}

pub fn sigma_ranking(g: &CouplingGraph) -> Result<Vec<RankedQubit>> {
    let mut ranking = g
        .max_degree_qubits()
        .into_iter()
        .map(|q| g.path_stddev(q).map(|value| RankedQubit { qubit: q, value }))
        .collect::<Result<Vec<_>>>()?;
    ranking.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.qubit.cmp(&b.qubit)));
    Ok(ranking)
}

/// Replays the H2 selection and lists, for every pick after the first,
/// all candidates tied at the best min distance.
pub fn heuristic2_ties(g: &CouplingGraph, n: usize) -> Result<Vec<Vec<usize>>> {
    let chosen = heuristic2_targets(g, n)?;
    let pool = g.max_degree_qubits();
    let d = g.distances();
    let mut out = Vec::new();
    for i in 1..chosen.len() {
        let score = |q: usize| chosen[..i].iter().map(|&p| d.get(p, q).unwrap_or(u32::MAX)).min().unwrap_or(u32::MAX);
        let best = score(chosen[i]);
        out.push(pool.iter().copied().filter(|q| !chosen[..i].contains(q) && score(*q) == best).collect());
    }
    Ok(out)
}

pub fn cmd_attack_plan(g: &CouplingGraph, heuristic: Heuristic, n: usize, ks: &[f64]) -> Result<AttackPlanReport> {
    let plan = match heuristic {
        Heuristic::H1 => {
            let k = *ks.first().ok_or_else(|| Error::InvalidPlan("h1 needs a k value".into()))?;
            if ks.len() > 1 {
                return Err(Error::InvalidPlan("h1 takes a single k".into()));
            }
            MisreportPlan::heuristic1(g, n, k)?
        }
        Heuristic::H2 => {
            if ks.len() != n {
                return Err(Error::InvalidPlan(format!("h2 needs {n} k values, got {}", ks.len())));
            }
            MisreportPlan::heuristic2(g, ks)?
        }
    };
    let tied_candidates = match heuristic {
        Heuristic::H1 => Vec::new(),
        Heuristic::H2 => heuristic2_ties(g, n)?,
    };
    Ok(AttackPlanReport { plan, sigma_ranking: sigma_ranking(g)?, tied_candidates })
}

/// Synthetic detection setup: honest drift histories to calibrate the
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub runs: usize,
    pub cv: f64,
    pub percentile: f64,
    pub seed: u64,
}

impl Default for ThresholdCalibration {
    fn default() -> Self {
        Self { runs: 200, cv: 0.30, percentile: 95.0, seed: 0 }
    }
}

/// Calibrates the detection threshold on honest synthetic drift around
/// `base`, with window sizes matching `window1`/`window2`.
pub fn synthetic_threshold(
    g: &CouplingGraph,
    base: &CalibrationSnapshot,
    window1: CycleWindow,
    window2: CycleWindow,
    bins: usize,
    eps: f64,
    cal: ThresholdCalibration,
) -> Result<f64> {
    let len1 = window1.end - window1.start + 1;
    let len2 = window2.end - window2.start + 1;
    let w1 = CycleWindow::new(0, len1 - 1)?;
    let w2 = CycleWindow::new(len1, len1 + len2 - 1)?;
    let runs = (0..cal.runs as u64)
        .map(|r| {
            let series = synth_drift(base, (len1 + len2) as usize, cal.cv, cal.seed.wrapping_add(r))?;
            Ok(window_divergences(&series, g, w1, w2, bins, eps)?.into_iter().map(|(_, d)| d).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    calibrate_threshold(&runs, cal.percentile)
}

/// How the detection threshold is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Fixed(f64),
    Synthetic(ThresholdCalibration),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<ThresholdCalibration>,
    #[serde(flatten)]
    pub verdict: DetectionVerdict,
}

/// With a synthetic threshold, the honest base is the per-edge mean of the
/// first window.
pub fn cmd_detect(
    series: &CalibrationSeries,
    g: &CouplingGraph,
    window1: CycleWindow,
    window2: CycleWindow,
    bins: usize,
    eps: f64,
    threshold: Threshold,
) -> Result<DetectReport> {
    let (tau, calibration) = match threshold {
        Threshold::Fixed(tau) => (tau, None),
        Threshold::Synthetic(cal) => {
            let base = window_mean(series, g, window1)?;
            (synthetic_threshold(g, &base, window1, window2, bins, eps, cal)?, Some(cal))
        }
    };
    let verdict = detect(series, g, window1, window2, DetectParams { bins, eps, tau })?;
    Ok(DetectReport { calibration, verdict })
}

fn window_mean(series: &CalibrationSeries, g: &CouplingGraph, w: CycleWindow) -> Result<CalibrationSnapshot> {
    let snaps: Vec<&CalibrationSnapshot> = series.snapshots().iter().filter(|s| w.contains(s.cycle_id())).collect();
    if snaps.is_empty() {
        return Err(Error::Detection(format!("no cycles in window {}..{}", w.start, w.end)));
    }
    let n = snaps.len() as f64;
    let cnot = g
        .edges()
        .iter()
        .map(|e| (*e, snaps.iter().map(|s| s.cnot_error(e.low(), e.high()).unwrap_or(0.0)).sum::<f64>() / n))
        .collect();
    let readout = (0..g.qubit_count())
        .map(|q| snaps.iter().map(|s| s.readout_error(q).unwrap_or(0.0)).sum::<f64>() / n)
        .collect();
    CalibrationSnapshot::new(g, 0, cnot, readout)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub baseline_rounds: usize,
    pub attacked_rounds: usize,
    pub delta_rounds: i64,
    pub baseline_utilization: f64,
    pub attacked_utilization: f64,
    pub delta_utilization: f64,
    pub baseline_depth: f64,
    pub attacked_depth: f64,
    pub delta_depth_pct: f64,
    pub baseline_pst: f64,
    pub attacked_pst: f64,
    pub delta_pst_pct: f64,
}

impl SweepRow {
    fn from_report(seed: u64, r: &SimulateReport) -> Self {
        Self {
            seed,
            baseline_rounds: r.baseline.total_rounds,
            attacked_rounds: r.attacked.total_rounds,
            delta_rounds: r.comparison.delta_rounds,
            baseline_utilization: r.baseline.mean_utilization,
            attacked_utilization: r.attacked.mean_utilization,
            delta_utilization: r.comparison.delta_utilization,
            baseline_depth: r.baseline.mean_depth,
            attacked_depth: r.attacked.mean_depth,
            delta_depth_pct: r.comparison.delta_depth_pct,
            baseline_pst: r.baseline.mean_pst,
            attacked_pst: r.attacked.mean_pst,
            delta_pst_pct: r.comparison.delta_pst_pct,
        }
    }

    fn values(&self) -> [f64; 12] {
        [
            self.baseline_rounds as f64,
            self.attacked_rounds as f64,
            self.delta_rounds as f64,
            self.baseline_utilization,
            self.attacked_utilization,
            self.delta_utilization,
            self.baseline_depth,
            self.attacked_depth,
            self.delta_depth_pct,
            self.baseline_pst,
            self.attacked_pst,
            self.delta_pst_pct,
        ]
    }
}

const SWEEP_COLUMNS: [&str; 13] = [
    "seed",
    "baseline_rounds",
    "attacked_rounds",
    "delta_rounds",
    "baseline_utilization",
    "attacked_utilization",
    "delta_utilization",
    "baseline_depth",
    "attacked_depth",
    "delta_depth_pct",
    "baseline_pst",
    "attacked_pst",
    "delta_pst_pct",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Column means over the seeds.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        (0..12).map(|c| self.rows.iter().map(|r| r.values()[c]).sum::<f64>() / n).collect()
    }

    /// Population standard deviation of each column.
    pub fn std(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        let mean = self.mean();
        (0..12)
            .map(|c| (self.rows.iter().map(|r| (r.values()[c] - mean[c]).powi(2)).sum::<f64>() / n).sqrt())
            .collect()
    }

    /// Per-seed rows followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.seed.to_string()];
            rec.extend(r.values().iter().map(f64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        for (label, stats) in [("mean", self.mean()), ("std", self.std())] {
            let mut rec = vec![label.to_string()];
            rec.extend(stats.iter().map(f64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Simulates the config once per workload seed. `threads > 1` fans the
/// seeds out; rows always come back in seed-list order.
pub fn cmd_sweep(config: &ExperimentConfig, seeds: &[u64], threads: usize) -> Result<SweepReport> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    config.validate()?;
    let run = |seed: u64| -> Result<SweepRow> {
        let cfg = ExperimentConfig { workload: config.workload.clone().with_seed(seed), ..config.clone() };
        Ok(SweepRow::from_report(seed, &cmd_simulate(&cfg)?))
    };
    let threads = threads.clamp(1, seeds.len());
    let rows = if threads == 1 {
        seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?
    } else {
        let chunk = seeds.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()))
                .collect();
            let mut rows = Vec::with_capacity(seeds.len());
            for h in handles {
                rows.extend(h.join().expect("sweep worker panicked")?);
            }
            Ok::<_, Error>(rows)
        })?
    };
    Ok(SweepReport { config: config.clone(), seeds: seeds.to_vec(), rows })
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
