//! Python bindings. Structured results cross the boundary as JSON strings
//! (decode with `json.loads`); scalars and lists map directly.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mtqsim_core::adversary::{heuristic1_targets, heuristic2_targets, Heuristic};
use mtqsim_core::allocation::{cfm, cri};
use mtqsim_core::calibration::{synth_drift, CalibrationSeries, CalibrationSnapshot};
use mtqsim_core::defense::{build_distribution, detect, kl_divergence, CycleWindow, DetectParams};
use mtqsim_core::experiment::{cmd_attack_plan, cmd_simulate, cmd_sweep, ExperimentConfig};
use mtqsim_core::topology::{hanoi27, CouplingGraph, QubitSubset};
use mtqsim_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("reports serialize")
}

/// Undirected coupling graph.
#[pyclass(frozen)]
struct Topology(CouplingGraph);

#[pymethods]
impl Topology {
    #[new]
    fn new(qubit_count: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        CouplingGraph::new(qubit_count, edges).map(Topology).map_err(py_err)
    }

    /// The 27-qubit heavy-hex device.
    #[staticmethod]
    fn hanoi27() -> Self {
        Topology(hanoi27())
    }

    /// Parses the `qubits N` + `u v` edge-list format.
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        CouplingGraph::from_edge_list(text).map(Topology).map_err(py_err)
    }

    #[getter]
    fn qubit_count(&self) -> usize {
        self.0.qubit_count()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().iter().map(|e| (e.low(), e.high())).collect()
    }

    fn degree(&self, q: usize) -> PyResult<usize> {
        self.0.degree(q).map_err(py_err)
    }

    fn max_degree_qubits(&self) -> Vec<usize> {
        self.0.max_degree_qubits()
    }

    /// Hop distance, or `None` when unreachable.
    fn distance(&self, u: usize, v: usize) -> PyResult<Option<u32>> {
        self.0.distance(u, v).map_err(py_err)
    }

    fn path_stddev(&self, q: usize) -> PyResult<f64> {
        self.0.path_stddev(q).map_err(py_err)
    }

    fn heuristic_targets(&self, heuristic: &str, n: usize) -> PyResult<Vec<usize>> {
        match heuristic.parse::<Heuristic>().map_err(py_err)? {
            Heuristic::H1 => heuristic1_targets(&self.0, n),
            Heuristic::H2 => heuristic2_targets(&self.0, n),
        }
        .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Topology(qubits={}, edges={})", self.0.qubit_count(), self.0.edges().len())
    }
}

/// One calibration cycle bound to its topology.
#[pyclass(frozen)]
struct Snapshot {
    graph: CouplingGraph,
    snap: CalibrationSnapshot,
}

#[pymethods]
impl Snapshot {
    #[staticmethod]
    fn uniform(topology: &Topology, cnot: f64, readout: f64) -> PyResult<Self> {
        let snap = CalibrationSnapshot::uniform(&topology.0, cnot, readout).map_err(py_err)?;
        Ok(Snapshot { graph: topology.0.clone(), snap })
    }

    fn cnot_error(&self, u: usize, v: usize) -> Option<f64> {
        self.snap.cnot_error(u, v)
    }

    fn readout_error(&self, q: usize) -> Option<f64> {
        self.snap.readout_error(q)
    }

    fn cfm(&self, q: usize) -> PyResult<f64> {
        cfm(&self.graph, &self.snap, q).map_err(py_err)
    }

    fn cri(&self, members: Vec<usize>) -> PyResult<f64> {
        let s = QubitSubset::new(members).map_err(py_err)?;
        cri(&self.graph, &self.snap, &s).map_err(py_err)
    }
}

/// Simulates a TOML experiment config; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml = ""))]
fn simulate(py: Python<'_>, config_toml: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(py_err)?;
    py.detach(|| cmd_simulate(&cfg)).map(|r| to_json(&r)).map_err(py_err)
}

/// Per-seed comparison CSV with mean and std rows.
#[pyfunction]
#[pyo3(signature = (config_toml, seeds, threads = 1))]
fn sweep(py: Python<'_>, config_toml: &str, seeds: Vec<u64>, threads: usize) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(py_err)?;
    py.detach(|| cmd_sweep(&cfg, &seeds, threads)).map(|r| r.to_csv()).map_err(py_err)
}

/// Misreport plan with its audit trail, as JSON.
#[pyfunction]
#[pyo3(signature = (topology, heuristic, n, ks))]
fn attack_plan(topology: &Topology, heuristic: &str, n: usize, ks: Vec<f64>) -> PyResult<String> {
    let h = heuristic.parse::<Heuristic>().map_err(py_err)?;
    cmd_attack_plan(&topology.0, h, n, &ks).map(|r| to_json(&r)).map_err(py_err)
}

/// Smoothed histogram probabilities of `samples` over `bin_edges`.
#[pyfunction]
#[pyo3(signature = (samples, bin_edges, eps = 1e-9))]
fn histogram(samples: Vec<f64>, bin_edges: Vec<f64>, eps: f64) -> PyResult<Vec<f64>> {
    build_distribution(&samples, &bin_edges, eps).map(|d| d.probabilities().to_vec()).map_err(py_err)
}

/// `D(P || Q)` in nats between the histograms of two sample sets.
#[pyfunction]
#[pyo3(signature = (p_samples, q_samples, bin_edges, eps = 1e-9))]
fn kl(p_samples: Vec<f64>, q_samples: Vec<f64>, bin_edges: Vec<f64>, eps: f64) -> PyResult<f64> {
    let p = build_distribution(&p_samples, &bin_edges, eps).map_err(py_err)?;
    let q = build_distribution(&q_samples, &bin_edges, eps).map_err(py_err)?;
    kl_divergence(&p, &q).map_err(py_err)
}

/// Synthetic drifting calibration history as CSV.
#[pyfunction]
#[pyo3(signature = (topology, cycles, cv = 0.30, seed = 0, cnot = 0.02, readout = 0.02))]
fn drift_csv(topology: &Topology, cycles: usize, cv: f64, seed: u64, cnot: f64, readout: f64) -> PyResult<String> {
    let base = CalibrationSnapshot::uniform(&topology.0, cnot, readout).map_err(py_err)?;
    synth_drift(&base, cycles, cv, seed).map(|s| s.to_csv()).map_err(py_err)
}

/// KL verdict for two inclusive cycle windows, as JSON.
#[pyfunction]
#[pyo3(signature = (topology, series_csv, window1, window2, tau, bins = 10, eps = 1e-9))]
fn detect_csv(
    topology: &Topology,
    series_csv: &str,
    window1: (u64, u64),
    window2: (u64, u64),
    tau: f64,
    bins: usize,
    eps: f64,
) -> PyResult<String> {
    let series = CalibrationSeries::from_csv(&topology.0, series_csv).map_err(py_err)?;
    let w1 = CycleWindow::new(window1.0, window1.1).map_err(py_err)?;
    let w2 = CycleWindow::new(window2.0, window2.1).map_err(py_err)?;
    detect(&series, &topology.0, w1, w2, DetectParams { bins, eps, tau }).map(|v| to_json(&v)).map_err(py_err)
}

#[pymodule]
fn mtqsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<Snapshot>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(attack_plan, m)?)?;
    m.add_function(wrap_pyfunction!(histogram, m)?)?;
    m.add_function(wrap_pyfunction!(kl, m)?)?;
    m.add_function(wrap_pyfunction!(drift_csv, m)?)?;
    m.add_function(wrap_pyfunction!(detect_csv, m)?)?;
    Ok(())
}
