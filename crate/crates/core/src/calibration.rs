//! Error-rate data model: calibration snapshots, series, CSV exchange and
//! the seeded drift generator used in place of real provider history.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::topology::{CouplingGraph, Edge};
use crate::{Error, Result};

/// Error figures reported for one calibration cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSnapshot {
    cycle_id: u64,
    cnot_error: BTreeMap<Edge, f64>,
    readout_error: Vec<f64>,
}

fn check_probability(what: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Calibration(format!("{what} = {value} is outside [0, 1]")))
    }
}

impl CalibrationSnapshot {
    /// Builds a snapshot and checks that it covers exactly the edges and
    /// qubits of `g` with values in `[0, 1]`.
    pub fn new(
        g: &CouplingGraph,
        cycle_id: u64,
        cnot_error: BTreeMap<Edge, f64>,
        readout_error: Vec<f64>,
    ) -> Result<Self> {
        if readout_error.len() != g.qubit_count() {
            return Err(Error::Calibration(format!(
                "{} readout entries for {} qubits",
                readout_error.len(),
                g.qubit_count()
            )));
        }
        for (q, &r) in readout_error.iter().enumerate() {
            check_probability(&format!("readout error of qubit {q}"), r)?;
        }
        for (e, &v) in &cnot_error {
            if !g.has_edge(e.low(), e.high()) {
                return Err(Error::Calibration(format!("edge {e} is not in the coupling graph")));
            }
            check_probability(&format!("cnot error of edge {e}"), v)?;
        }
        if let Some(e) = g.edges().iter().find(|e| !cnot_error.contains_key(e)) {
            return Err(Error::Calibration(format!("missing cnot error for edge {e}")));
        }
        Ok(Self { cycle_id, cnot_error, readout_error })
    }

    /// Every edge at `cnot`, every qubit at `readout`.
    pub fn uniform(g: &CouplingGraph, cnot: f64, readout: f64) -> Result<Self> {
        let cnot_error = g.edges().iter().map(|&e| (e, cnot)).collect();
        Self::new(g, 0, cnot_error, vec![readout; g.qubit_count()])
    }

    pub fn cycle_id(&self) -> u64 {
        self.cycle_id
    }

    pub fn with_cycle_id(mut self, cycle_id: u64) -> Self {
        self.cycle_id = cycle_id;
        self
    }

    pub fn cnot_errors(&self) -> &BTreeMap<Edge, f64> {
        &self.cnot_error
    }

    /// CNOT error on the edge between `u` and `v`, if that edge exists.
    pub fn cnot_error(&self, u: usize, v: usize) -> Option<f64> {
        if u == v {
            return None;
        }
        self.cnot_error.get(&Edge::new(u, v)).copied()
    }

    pub fn readout_errors(&self) -> &[f64] {
        &self.readout_error
    }

    pub fn readout_error(&self, q: usize) -> Option<f64> {
        self.readout_error.get(q).copied()
    }

    /// Replaces one edge's CNOT error. The caller keeps the value in range.
    pub(crate) fn set_cnot_error(&mut self, e: Edge, value: f64) {
        self.cnot_error.insert(e, value);
    }

    /// Mean CNOT error over the edges incident to `q`.
    pub fn avg_cnot_error(&self, g: &CouplingGraph, q: usize) -> Result<f64> {
        let degree = g.degree(q)?;
        if degree == 0 {
            return Err(Error::IsolatedQubit(q));
        }
        let sum: f64 = g
            .incident_edges(q)
            .map(|e| self.cnot_error.get(&e).copied().expect("snapshot covers graph"))
            .sum();
        Ok(sum / degree as f64)
    }

    /// Mean CNOT error over all edges; 0 for an edgeless graph.
    pub fn mean_cnot_error(&self) -> f64 {
        if self.cnot_error.is_empty() {
            0.0
        } else {
            self.cnot_error.values().sum::<f64>() / self.cnot_error.len() as f64
        }
    }
}

/// Snapshots of one device ordered by strictly increasing cycle id.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSeries {
    snapshots: Vec<CalibrationSnapshot>,
}

impl CalibrationSeries {
    pub fn new(snapshots: Vec<CalibrationSnapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Calibration("no snapshots".into()));
        }
        for w in snapshots.windows(2) {
            if w[1].cycle_id <= w[0].cycle_id {
                return Err(Error::Calibration(format!(
                    "cycle ids not strictly increasing: {} then {}",
                    w[0].cycle_id, w[1].cycle_id
                )));
            }
            let same_cover = w[0].readout_error.len() == w[1].readout_error.len()
                && w[0].cnot_error.keys().eq(w[1].cnot_error.keys());
            if !same_cover {
                return Err(Error::Calibration("snapshots cover different graphs".into()));
            }
        }
        Ok(Self { snapshots })
    }

    pub fn snapshots(&self) -> &[CalibrationSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn into_snapshots(self) -> Vec<CalibrationSnapshot> {
        self.snapshots
    }

    /// Per-cycle mean incident CNOT error of `q`.
    pub fn avg_cnot_trace(&self, g: &CouplingGraph, q: usize) -> Result<Vec<f64>> {
        self.snapshots.iter().map(|s| s.avg_cnot_error(g, q)).collect()
    }

    /// Coefficient of variation, in percent, of `q`'s mean incident CNOT
    /// error across cycles (population standard deviation over mean).
    pub fn fluctuation_percent(&self, g: &CouplingGraph, q: usize) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::Calibration("fluctuation needs at least two cycles".into()));
        }
        let trace = self.avg_cnot_trace(g, q)?;
        let n = trace.len() as f64;
        let mean = trace.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return Err(Error::Calibration(format!("qubit {q} has zero mean error")));
        }
        let var = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(100.0 * var.sqrt() / mean)
    }

    /// Renders the series in the `cycle,kind,subject,value` CSV schema.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cycle", "kind", "subject", "value"]).expect("in-memory write");
        for snap in &self.snapshots {
            let cycle = snap.cycle_id.to_string();
            for (e, v) in &snap.cnot_error {
                w.write_record([cycle.as_str(), "cnot", &e.to_string(), &v.to_string()])
                    .expect("in-memory write");
            }
            for (q, v) in snap.readout_error.iter().enumerate() {
                w.write_record([cycle.as_str(), "readout", &q.to_string(), &v.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Parses the calibration CSV schema against `g`. Every row problem is
    /// reported with its line number.
    pub fn from_csv(g: &CouplingGraph, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::CalibrationCsv { line: 1, message: e.to_string() })?
            .clone();
        if !header.is_empty() && header.iter().ne(["cycle", "kind", "subject", "value"]) {
            return Err(Error::CalibrationCsv {
                line: 1,
                message: format!("expected header `cycle,kind,subject,value`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
            });
        }

        let mut snapshots = Vec::new();
        // cycle, first line, cnot errors, readout errors
        type Pending = (u64, u64, BTreeMap<Edge, f64>, Vec<Option<f64>>);
        let mut current: Option<Pending> = None;
        let finish = |(cycle, line, cnot, readout): Pending| {
            let readout = readout
                .into_iter()
                .enumerate()
                .map(|(q, r)| {
                    r.ok_or_else(|| Error::CalibrationCsv {
                        line,
                        message: format!("cycle {cycle} has no readout row for qubit {q}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            CalibrationSnapshot::new(g, cycle, cnot, readout)
                .map_err(|e| Error::CalibrationCsv { line, message: format!("cycle {cycle}: {e}") })
        };

        for record in reader.records() {
            let record = record.map_err(|e| Error::CalibrationCsv {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::CalibrationCsv { line, message };
            if record.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", record.len())));
            }
            let cycle: u64 = record[0].parse().map_err(|_| bad(format!("bad cycle `{}`", &record[0])))?;
            let value: f64 = record[3].parse().map_err(|_| bad(format!("bad value `{}`", &record[3])))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(bad(format!("value {value} is outside [0, 1]")));
            }

            match &current {
                Some((c, ..)) if *c == cycle => {}
                Some((c, ..)) if *c > cycle => {
                    return Err(bad(format!("cycle {cycle} follows cycle {c}; cycles must ascend")));
                }
                _ => {
                    if let Some(done) = current.take() {
                        snapshots.push(finish(done)?);
                    }
                    current = Some((cycle, line, BTreeMap::new(), vec![None; g.qubit_count()]));
                }
            }
            let (_, last_line, cnot, readout) = current.as_mut().expect("set above");
            *last_line = line;
            match &record[1] {
                "cnot" => {
                    let edge: Edge = record[2].parse().map_err(bad)?;
                    if !g.has_edge(edge.low(), edge.high()) {
                        return Err(bad(format!("unknown edge {edge}")));
                    }
                    if cnot.insert(edge, value).is_some() {
                        return Err(bad(format!("duplicate cnot row for edge {edge}")));
                    }
                }
                "readout" => {
                    let q: usize = record[2].parse().map_err(|_| bad(format!("bad qubit `{}`", &record[2])))?;
                    let slot = readout.get_mut(q).ok_or_else(|| bad(format!("unknown qubit {q}")))?;
                    if slot.replace(value).is_some() {
                        return Err(bad(format!("duplicate readout row for qubit {q}")));
                    }
                }
                other => return Err(bad(format!("unknown kind `{other}`"))),
            }
        }
        if let Some(done) = current.take() {
            snapshots.push(finish(done)?);
        }
        if snapshots.is_empty() {
            return Err(Error::Calibration("no snapshots".into()));
        }
        Self::new(snapshots)
    }
}

/// Lognormal log-scale that gives a multiplicative factor `exp(s z)` the
/// coefficient of variation `cv`.
pub fn lognormal_scale(cv: f64) -> f64 {
    (1.0 + cv * cv).ln().sqrt()
}

/// Generates `cycles` snapshots where each edge's CNOT error is the base
/// value times an independent lognormal factor with coefficient of
/// variation `cv`, clamped to `[0, 1]`. Readout errors stay at base.
///
/// Cycle ids continue from the base snapshot's id.
pub fn synth_drift(base: &CalibrationSnapshot, cycles: usize, cv: f64, seed: u64) -> Result<CalibrationSeries> {
    if cycles == 0 {
        return Err(Error::Calibration("drift needs at least one cycle".into()));
    }
    if !(0.0..1.5).contains(&cv) {
        return Err(Error::Calibration(format!("drift cv {cv} outside [0, 1.5)")));
    }
    let scale = lognormal_scale(cv);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snapshots = (0..cycles as u64)
        .map(|t| {
            let cnot_error = base
                .cnot_error
                .iter()
                .map(|(&e, &v)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (e, (v * (scale * z).exp()).clamp(0.0, 1.0))
                })
                .collect();
            CalibrationSnapshot {
                cycle_id: base.cycle_id + t,
                cnot_error,
                readout_error: base.readout_error.clone(),
            }
        })
        .collect();
    CalibrationSeries::new(snapshots)
}
