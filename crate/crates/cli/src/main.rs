use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtqsim_core::adversary::Heuristic;
use mtqsim_core::allocation::{Allocator, AllocatorKind, ComdapOptions, CommunityWeighting};
use mtqsim_core::calibration::{synth_drift, CalibrationSeries, CalibrationSnapshot};
use mtqsim_core::defense::{inject_misreport, CycleWindow};
use mtqsim_core::experiment::{
    cmd_attack_plan, cmd_detect, cmd_simulate, cmd_sweep, parse_plan, write_atomic, AttackConfig, ExperimentConfig, Threshold,
    ThresholdCalibration, TopologySource, WorkloadConfig,
};
use mtqsim_core::topology::builtin;
use mtqsim_core::transpile::to_qasm;
use mtqsim_core::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "mtqsim", version, about = "Multi-tenant qubit allocation under misreported calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a job queue on true errors, then on misreported errors, and compare.
    Simulate(SimulateArgs),
    /// Pick misreport targets and write the plan as JSON.
    AttackPlan(AttackPlanArgs),
    /// Compare two windows of a calibration series with the KL detector.
    Detect(DetectArgs),
    /// Repeat `simulate` over several workload seeds.
    Sweep(SweepArgs),
    /// Write a seeded synthetic workload as JSON or QASM files.
    GenWorkload(GenWorkloadArgs),
    /// Write a synthetic drifting calibration series as CSV.
    GenCalibration(GenCalibrationArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin topology name or an edge-list file.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    allocator: Option<AllocatorKind>,
    /// Louvain edge weighting for comdap.
    #[arg(long)]
    weighting: Option<CommunityWeighting>,
    /// none, h1, h2, or a plan JSON file.
    #[arg(long)]
    attack: Option<String>,
    /// Target count for h1.
    #[arg(long)]
    n: Option<usize>,
    /// Perturbation magnitude(s); one for h1, a decreasing list for h2.
    #[arg(long, value_delimiter = ',')]
    k: Vec<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Workload seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-round and per-job CSVs for both legs here.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AttackPlanArgs {
    #[arg(long, default_value = "hanoi27")]
    topology: String,
    /// h1 or h2.
    #[arg(long)]
    attack: Heuristic,
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Defaults: 0.15 for h1, 0.15,0.12,0.10 for h2.
    #[arg(long, value_delimiter = ',')]
    k: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Calibration series CSV.
    #[arg(long)]
    series: PathBuf,
    #[arg(long, default_value = "hanoi27")]
    topology: String,
    /// Reference window, `start..end` inclusive.
    #[arg(long)]
    window1: CycleWindow,
    /// Window under test.
    #[arg(long)]
    window2: CycleWindow,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Fixed threshold; otherwise calibrated on honest synthetic drift.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 200)]
    calibration_runs: usize,
    #[arg(long, default_value_t = 0.30)]
    cv: f64,
    #[arg(long, default_value_t = 95.0)]
    percentile: f64,
    /// Seed for the threshold calibration runs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Seed list: `1..20` (inclusive) or `1,2,3`.
    #[arg(long)]
    seeds: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Aggregate CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full sweep report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadFormat {
    Json,
    Qasm,
}

#[derive(Args)]
struct GenWorkloadArgs {
    #[arg(long, default_value_t = 40)]
    count: usize,
    #[arg(long, default_value_t = 2)]
    size_min: usize,
    #[arg(long, default_value_t = 10)]
    size_max: usize,
    #[arg(long, default_value_t = 2.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: WorkloadFormat,
    /// JSON file, or a directory for QASM files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenCalibrationArgs {
    #[arg(long, default_value = "hanoi27")]
    topology: String,
    #[arg(long, default_value_t = 14)]
    cycles: usize,
    #[arg(long, default_value_t = 0.30)]
    cv: f64,
    #[arg(long, default_value_t = 0.02)]
    cnot: f64,
    #[arg(long, default_value_t = 0.02)]
    readout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Misreport plan JSON applied to every cycle from `--attack-from` on.
    #[arg(long)]
    attack: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    attack_from: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn topology_source(spec: &str) -> TopologySource {
    if builtin(spec).is_some() {
        TopologySource::Builtin(spec.to_string())
    } else {
        TopologySource::File(spec.into())
    }
}

fn default_ks(heuristic: Heuristic) -> Vec<f64> {
    match heuristic {
        Heuristic::H1 => vec![0.15],
        Heuristic::H2 => vec![0.15, 0.12, 0.10],
    }
}

fn resolve_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = &a.topology {
        cfg.topology = topology_source(t);
    }
    if let Some(kind) = a.allocator {
        cfg.allocator = match kind {
            AllocatorKind::Greedy => Allocator::Greedy,
            AllocatorKind::Comdap => match cfg.allocator {
                Allocator::Comdap(opts) => Allocator::Comdap(opts),
                Allocator::Greedy => Allocator::Comdap(ComdapOptions::default()),
            },
        };
    }
    if let Some(w) = a.weighting {
        match &mut cfg.allocator {
            Allocator::Comdap(opts) => opts.weighting = w,
            Allocator::Greedy => return Err(Error::Config("--weighting only applies to comdap".into())),
        }
    }
    if let Some(attack) = &a.attack {
        cfg.attack = match attack.to_ascii_lowercase().as_str() {
            "none" => AttackConfig::None,
            "h1" | "h2" => {
                let h: Heuristic = attack.parse()?;
                let ks = if a.k.is_empty() { default_ks(h) } else { a.k.clone() };
                match h {
                    Heuristic::H1 => match ks.as_slice() {
                        [k] => AttackConfig::H1 { n: a.n.unwrap_or(3), k: *k },
                        _ => return Err(Error::Config("h1 takes a single --k".into())),
                    },
                    Heuristic::H2 => {
                        if let Some(n) = a.n.filter(|&n| n != ks.len()) {
                            return Err(Error::Config(format!("--n {n} does not match {} --k values", ks.len())));
                        }
                        AttackConfig::H2 { ks }
                    }
                }
            }
            _ if Path::new(attack).is_file() => AttackConfig::Plan { path: attack.into() },
            _ => {
                return Err(Error::Config(format!(
                    "unknown attack `{attack}` (expected none, h1, h2 or a plan file)"
                )))
            }
        };
    } else if a.n.is_some() || !a.k.is_empty() {
        return Err(Error::Config("--n and --k need --attack".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("--seeds `{spec}`: expected `a..b` or a comma list"));
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = resolve_config(&a.exp)?;
    if let Some(seed) = a.seed {
        cfg.workload = cfg.workload.with_seed(seed);
    }
    let out = a.out.or_else(|| cfg.out.clone());
    let report = cmd_simulate(&cfg)?;
    if let Some(dir) = &a.csv_dir {
        fs::create_dir_all(dir)?;
        for (leg, r) in [("baseline", &report.baseline), ("attacked", &report.attacked)] {
            write_atomic(&dir.join(format!("{leg}_rounds.csv")), r.rounds_csv().as_bytes())?;
            write_atomic(&dir.join(format!("{leg}_jobs.csv")), r.jobs_csv().as_bytes())?;
        }
    }
    emit(out.as_deref(), &json(&report))
}

fn attack_plan(a: AttackPlanArgs) -> Result<()> {
    let g = topology_source(&a.topology).load()?;
    let ks = if a.k.is_empty() { default_ks(a.attack) } else { a.k };
    let report = cmd_attack_plan(&g, a.attack, a.n, &ks)?;
    emit(a.out.as_deref(), &json(&report))
}

fn detect(a: DetectArgs) -> Result<()> {
    let g = topology_source(&a.topology).load()?;
    let series = CalibrationSeries::from_csv(&g, &read_input(&a.series)?)?;
    let threshold = match a.tau {
        Some(tau) => Threshold::Fixed(tau),
        None => Threshold::Synthetic(ThresholdCalibration {
            runs: a.calibration_runs,
            cv: a.cv,
            percentile: a.percentile,
            seed: a.seed,
        }),
    };
    let report = cmd_detect(&series, &g, a.window1, a.window2, a.bins, a.eps, threshold)
        .map_err(|e| match e {
            Error::Detection(m) => Error::Config(m),
            other => other,
        })?;
    emit(a.out.as_deref(), &json(&report))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = resolve_config(&a.exp)?;
    let seeds = parse_seeds(&a.seeds)?;
    let report = cmd_sweep(&cfg, &seeds, a.threads)?;
    if let Some(path) = &a.json {
        write_atomic(path, json(&report).as_bytes())?;
    }
    emit(a.out.as_deref(), &report.to_csv())
}

fn gen_workload(a: GenWorkloadArgs) -> Result<()> {
    let workload = WorkloadConfig::Generated {
        count: a.count,
        size_min: a.size_min,
        size_max: a.size_max,
        gate_density: a.density,
        seed: a.seed,
    };
    let jobs = workload.load()?;
    match a.format {
        WorkloadFormat::Json => write_atomic(&a.out, json(&jobs).as_bytes()),
        WorkloadFormat::Qasm => {
            fs::create_dir_all(&a.out)?;
            for job in &jobs {
                write_atomic(&a.out.join(format!("job_{:03}.qasm", job.id)), to_qasm(&job.circuit).as_bytes())?;
            }
            Ok(())
        }
    }
}

fn gen_calibration(a: GenCalibrationArgs) -> Result<()> {
    let g = topology_source(&a.topology).load()?;
    let base = CalibrationSnapshot::uniform(&g, a.cnot, a.readout)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut series = synth_drift(&base, a.cycles, a.cv, a.seed).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(path) = &a.attack {
        let plan = parse_plan(&read_input(path)?)
            .map_err(|e| Error::InvalidPlan(format!("{}: {e}", path.display())))?;
        series = inject_misreport(&series, &g, &plan, CycleWindow::new(a.attack_from, u64::MAX)?)?;
    }
    emit(a.out.as_deref(), &series.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::AttackPlan(a) => attack_plan(a),
        Command::Detect(a) => detect(a),
        Command::Sweep(a) => sweep(a),
        Command::GenWorkload(a) => gen_workload(a),
        Command::GenCalibration(a) => gen_calibration(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_DATA })
        }
    }
}
