//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtqsim_core::adversary::{heuristic1_targets, heuristic2_targets, MisreportPlan};
use mtqsim_core::allocation::{
    cfm, comdap_allocate, cri, louvain, AllocationRequest, Allocator, ComdapOptions, CommunityWeighting,
};
use mtqsim_core::calibration::{synth_drift, CalibrationSnapshot};
use mtqsim_core::defense::{
    build_distribution, calibrate_threshold, inject_misreport, kl_divergence, max_relative_deviation,
    window_divergences, CycleWindow,
};
use mtqsim_core::experiment::{cmd_simulate, cmd_sweep, AttackConfig, ExperimentConfig, SimulateReport, SweepReport};
use mtqsim_core::topology::{hanoi27, CouplingGraph, Edge, QubitSubset};
use mtqsim_core::transpile::{initial_layout, pst_estimate, route, Gate, LogicalCircuit, PhysicalOp};

type Outcome = (bool, String);

fn floyd_warshall(g: &CouplingGraph) -> Vec<Vec<u32>> {
    let n = g.qubit_count();
    let inf = u32::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in g.edges() {
        d[e.low()][e.high()] = 1;
        d[e.high()][e.low()] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn degree3_pool(g: &CouplingGraph) -> Vec<usize> {
    (0..g.qubit_count()).filter(|&q| g.neighbors(q).len() == 3).collect()
}

fn c1_fixture() -> Outcome {
    let pool = degree3_pool(&hanoi27());
    let expected = vec![1, 7, 8, 12, 14, 18, 19, 25];
    (pool == expected, format!("degree-3 set {pool:?}, expected {expected:?}"))
}

fn c2_heuristic2() -> Outcome {
    let g = hanoi27();
    let d = floyd_warshall(&g);
    let pool = degree3_pool(&g);
    // oracle: every max-min optimal choice at each step
    let mut chosen = vec![pool[0]];
    let mut optimal_sets = Vec::new();
    for _ in 1..3 {
        let score = |q: usize| chosen.iter().map(|&p| d[p][q]).min().unwrap();
        let rest: Vec<usize> = pool.iter().copied().filter(|q| !chosen.contains(q)).collect();
        let best = rest.iter().map(|&q| score(q)).max().unwrap();
        let optimal: Vec<usize> = rest.iter().copied().filter(|&q| score(q) == best).collect();
        chosen.push(optimal[0]);
        optimal_sets.push((optimal, best));
    }
    let got = heuristic2_targets(&g, 3).unwrap();
    let expected = vec![1, 25, 14];
    let matches_oracle = got == chosen;
    (
        got == expected && matches_oracle,
        format!(
            "got {got:?}, expected {expected:?}; oracle lowest-index pick {chosen:?}; optimal sets per step {optimal_sets:?}"
        ),
    )
}

fn c3_heuristic1() -> Outcome {
    let g = hanoi27();
    let d = floyd_warshall(&g);
    let n = g.qubit_count();
    // m * sum(d^2) - (sum d)^2 orders qubits exactly like the variance
    let spread = |q: usize| {
        let ds: Vec<u64> = (0..n).filter(|&v| v != q).map(|v| d[q][v] as u64).collect();
        let m = ds.len() as u64;
        m * ds.iter().map(|x| x * x).sum::<u64>() - ds.iter().sum::<u64>().pow(2)
    };
    let mut ranking: Vec<(usize, u64)> = degree3_pool(&g).into_iter().map(|q| (q, spread(q))).collect();
    ranking.sort_by_key(|&(q, s)| (s, q));
    let mut ok = true;
    for k in [2, 3] {
        let oracle: Vec<usize> = ranking[..k].iter().map(|r| r.0).collect();
        ok &= heuristic1_targets(&g, k).unwrap() == oracle;
    }
    let m = (n - 1) as f64;
    let shown: Vec<String> = ranking.iter().map(|&(q, s)| format!("{q}:{:.4}", (s as f64).sqrt() / m)).collect();
    (
        ok,
        format!(
            "n=2 -> {:?}, n=3 -> {:?}; sigma ranking [{}]; reference selections {{12,14}} and {{7,8,12}}",
            heuristic1_targets(&g, 2).unwrap(),
            heuristic1_targets(&g, 3).unwrap(),
            shown.join(", ")
        ),
    )
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

fn preset_sweep(allocator: Allocator, attack: AttackConfig) -> SweepReport {
    let cfg = ExperimentConfig { allocator, attack, ..Default::default() };
    let seeds: Vec<u64> = SEEDS.collect();
    cmd_sweep(&cfg, &seeds, 4).unwrap()
}

fn comdap() -> Allocator {
    Allocator::Comdap(ComdapOptions::default())
}

fn h1() -> AttackConfig {
    AttackConfig::H1 { n: 3, k: 0.15 }
}

fn h2() -> AttackConfig {
    AttackConfig::H2 { ks: vec![0.15, 0.12, 0.10] }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c4_c5_throughput(greedy: &SweepReport, comdap: &SweepReport) -> (Outcome, Outcome) {
    let n = greedy.rows.len();
    let not_better = greedy.rows.iter().filter(|r| r.attacked_rounds >= r.baseline_rounds).count();
    let dg = mean(greedy.rows.iter().map(|r| r.delta_rounds as f64));
    let dc = mean(comdap.rows.iter().map(|r| r.delta_rounds as f64));
    let c4 = (
        not_better * 10 >= n * 9 && dg >= dc,
        format!("greedy attacked >= baseline rounds in {not_better}/{n} seeds; mean delta rounds greedy {dg:+.2}, comdap {dc:+.2}"),
    );
    let ug = -mean(greedy.rows.iter().map(|r| r.delta_utilization));
    let uc = -mean(comdap.rows.iter().map(|r| r.delta_utilization));
    let c5 = (ug > uc, format!("mean utilization drop greedy {ug:+.4}, comdap {uc:+.4}"));
    (c4, c5)
}

fn c6_depth_pst(greedy: &SweepReport, comdap: &SweepReport) -> Outcome {
    let stats = |r: &SweepReport| {
        let base_depth = mean(r.rows.iter().map(|x| x.baseline_depth));
        let att_depth = mean(r.rows.iter().map(|x| x.attacked_depth));
        let base_pst = mean(r.rows.iter().map(|x| x.baseline_pst));
        let att_pst = mean(r.rows.iter().map(|x| x.attacked_pst));
        ((att_depth - base_depth) / base_depth * 100.0, (att_pst - base_pst) / base_pst * 100.0)
    };
    let (gd, gp) = stats(greedy);
    let (cd, cp) = stats(comdap);
    let ok = gd > 0.0 && cd > 0.0 && gp < 0.0 && cp < 0.0 && gd >= cd && gp <= cp;
    (ok, format!("depth greedy {gd:+.2}%, comdap {cd:+.2}%; pst greedy {gp:+.2}%, comdap {cp:+.2}%"))
}

fn kite() -> (CouplingGraph, CalibrationSnapshot) {
    let g = CouplingGraph::new(5, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
    let cnot: BTreeMap<Edge, f64> = [
        (Edge::new(0, 1), 0.01),
        (Edge::new(0, 2), 0.02),
        (Edge::new(1, 2), 0.03),
        (Edge::new(2, 3), 0.04),
        (Edge::new(3, 4), 0.05),
    ]
    .into();
    let snap = CalibrationSnapshot::new(&g, 0, cnot, vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
    (g, snap)
}

fn random_snapshot(g: &CouplingGraph, rng: &mut ChaCha8Rng) -> CalibrationSnapshot {
    let cnot = g.edges().iter().map(|&e| (e, rng.random_range(0.001..0.1))).collect();
    let readout = (0..g.qubit_count()).map(|_| rng.random_range(0.001..0.1)).collect();
    CalibrationSnapshot::new(g, 0, cnot, readout).unwrap()
}

fn c7_allocators() -> Outcome {
    let (g, snap) = kite();
    let mut notes = Vec::new();
    let mut ok = true;

    // degree + 1 - (mean incident cnot + readout)
    let cfm_hand = [2.0 + 1.0 - (0.015 + 0.1), 2.0 + 1.0 - (0.02 + 0.2), 3.0 + 1.0 - (0.03 + 0.3), 2.0 + 1.0 - (0.045 + 0.4), 1.0 + 1.0 - (0.05 + 0.5)];
    let cfm_err = (0..5).map(|q| (cfm(&g, &snap, q).unwrap() - cfm_hand[q]).abs()).fold(0.0, f64::max);
    ok &= cfm_err < 1e-12;
    let hw = 0.5 / 0.75 + (1.0 - (0.03 + 0.3));
    let tri = (1.0 / 0.5 + (1.0 - (0.02 + 0.2))) / hw;
    let tail = (2.0 / 3.0 + (1.0 - (0.045 + 0.4))) / hw;
    let sub = |m: &[usize]| QubitSubset::new(m.to_vec()).unwrap();
    let cri_err = (cri(&g, &snap, &sub(&[0, 1, 2])).unwrap() - tri)
        .abs()
        .max((cri(&g, &snap, &sub(&[2, 3, 4])).unwrap() - tail).abs());
    ok &= cri_err < 1e-12;
    notes.push(format!("cfm max err {cfm_err:.1e}, cri max err {cri_err:.1e}"));

    // two triangles joined by one bridge; a size-3 request gets a whole community
    let barbell = CouplingGraph::new(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)]).unwrap();
    let bsnap = CalibrationSnapshot::uniform(&barbell, 0.02, 0.02).unwrap();
    let all = QubitSubset::all(&barbell);
    let comms = louvain(&barbell, &bsnap, &all, CommunityWeighting::Fidelity).unwrap();
    let req = AllocationRequest::new(3, all).unwrap();
    let got = comdap_allocate(&barbell, &bsnap, &req, &ComdapOptions::default()).unwrap().unwrap();
    let verbatim = comms.communities().iter().any(|c| c.as_slice() == got.members.sorted());
    ok &= verbatim;
    notes.push(format!("communities {:?}, comdap picked {:?}", comms.communities(), got.members.members()));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hanoi = hanoi27();
    let mut bad = 0;
    let mut placed = 0;
    for i in 0..1000 {
        let snap = random_snapshot(&hanoi, &mut rng);
        let available: Vec<usize> = if i % 4 == 0 {
            (0..27).collect()
        } else {
            (0..27).filter(|_| rng.random_bool(0.7)).collect()
        };
        if available.is_empty() {
            continue;
        }
        let size = rng.random_range(1..=available.len().min(12));
        let req = AllocationRequest::new(size, QubitSubset::new(available.clone()).unwrap()).unwrap();
        for alloc in [Allocator::Greedy, comdap()] {
            match alloc.allocate(&hanoi, &snap, &req).unwrap() {
                Some(p) => {
                    placed += 1;
                    let m = p.members.sorted();
                    let valid = m.len() == size
                        && m.iter().all(|q| available.contains(q))
                        && hanoi.is_induced_connected(&m);
                    if !valid {
                        bad += 1;
                    }
                }
                None if available.len() == 27 => bad += 1,
                None => {}
            }
        }
    }
    ok &= bad == 0;
    notes.push(format!("1000 instances: {placed} partitions, {bad} invalid"));
    (ok, notes.join("; "))
}

/// Replays the routed ops on a logical-contents map and returns the
/// logical two-qubit gates in emission order.
fn replay_logical(ops: &[PhysicalOp], initial: &[usize], width: usize) -> Option<Vec<(usize, usize)>> {
    let mut p2l = vec![usize::MAX; width];
    for (l, &p) in initial.iter().enumerate() {
        p2l[p] = l;
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < ops.len() {
        match ops[i] {
            PhysicalOp::Cnot { control, target, swap: true } => {
                let triple = ops.get(i..i + 3)?;
                let expect = [
                    PhysicalOp::Cnot { control, target, swap: true },
                    PhysicalOp::Cnot { control: target, target: control, swap: true },
                    PhysicalOp::Cnot { control, target, swap: true },
                ];
                if triple != expect {
                    return None;
                }
                p2l.swap(control, target);
                i += 3;
            }
            PhysicalOp::Cnot { control, target, swap: false } => {
                out.push((p2l[control], p2l[target]));
                i += 1;
            }
            _ => i += 1,
        }
    }
    Some(out)
}

fn c8_routing() -> Outcome {
    let g = hanoi27();
    let snap = CalibrationSnapshot::uniform(&g, 0.02, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for trial in 0..300 {
        let size = rng.random_range(2..=6);
        let mut members = vec![rng.random_range(0..27)];
        while members.len() < size {
            let frontier: Vec<usize> = members
                .iter()
                .flat_map(|&m| g.neighbors(m).iter().copied())
                .filter(|q| !members.contains(q))
                .collect();
            members.push(frontier[rng.random_range(0..frontier.len())]);
        }
        let mut gates = Vec::new();
        for _ in 0..rng.random_range(1..=12) {
            let c = rng.random_range(0..size);
            let mut t = rng.random_range(0..size - 1);
            if t >= c {
                t += 1;
            }
            gates.push(Gate::TwoQubit { control: c, target: t });
        }
        let logical: Vec<(usize, usize)> = gates
            .iter()
            .map(|g| match *g {
                Gate::TwoQubit { control, target } => (control, target),
                _ => unreachable!(),
            })
            .collect();
        let circuit = LogicalCircuit::new(size, gates).unwrap();
        let part = QubitSubset::new(members).unwrap();
        let layout = initial_layout(&circuit, &part, &g, &snap).unwrap();
        let r = route(&circuit, &layout, &part, &g).unwrap();
        let on_edges = r.ops.iter().all(|op| match *op {
            PhysicalOp::Cnot { control, target, .. } => g.has_edge(control, target),
            _ => true,
        });
        let accounting = r.cnot_count() == circuit.two_qubit_count() + 3 * r.swap_count;
        let replayed = replay_logical(&r.ops, &layout.0, 27);
        if !on_edges || !accounting || replayed.as_ref() != Some(&logical) {
            failures.push(trial);
        }
    }

    // P3 end-to-end: one swap, four CNOTs at 0.02, two readouts at 0.01
    let p3 = CouplingGraph::path(3).unwrap();
    let s3 = CalibrationSnapshot::uniform(&p3, 0.02, 0.01).unwrap();
    let c = LogicalCircuit::new(3, vec![Gate::TwoQubit { control: 0, target: 2 }, Gate::Measure(0), Gate::Measure(2)]).unwrap();
    let r = route(&c, &mtqsim_core::transpile::Layout::identity(3), &QubitSubset::all(&p3), &p3).unwrap();
    let pst_err = (pst_estimate(&r, &s3).unwrap() - 0.98f64.powi(4) * 0.99f64.powi(2)).abs();
    (
        failures.is_empty() && pst_err < 1e-12,
        format!("300 routed circuits, failures {failures:?}; pst hand product err {pst_err:.1e}"),
    )
}

const WINDOW1: CycleWindow = CycleWindow { start: 0, end: 6 };
const WINDOW2: CycleWindow = CycleWindow { start: 7, end: 13 };
const DETECT_BINS: usize = 5;
const EPS: f64 = 1e-9;

fn c9_detector() -> Outcome {
    let mut notes = Vec::new();

    // (a) worked values
    let edges = [0.0, 1.0, 2.0];
    let p = build_distribution(&[0.5, 1.5], &edges, 0.0).unwrap();
    let q = build_distribution(&[0.5, 1.5, 1.6, 1.7], &edges, 0.0).unwrap();
    let self_kl = kl_divergence(&p, &p).unwrap();
    let worked = kl_divergence(&p, &q).unwrap();
    let a = self_kl == 0.0 && (worked - 0.1438410362258904).abs() < 1e-6;
    notes.push(format!("(a) D(P,P)={self_kl}, D(P,Q)={worked:.6}"));

    // (b) honest threshold, then injected +15% on three central qubits
    let g = hanoi27();
    let base = CalibrationSnapshot::uniform(&g, 0.02, 0.02).unwrap();
    let divergences = |seed: u64| -> Vec<(usize, f64)> {
        let series = synth_drift(&base, 14, 0.30, seed).unwrap();
        window_divergences(&series, &g, WINDOW1, WINDOW2, DETECT_BINS, EPS).unwrap()
    };
    let honest: Vec<Vec<f64>> =
        (0..200).map(|s| divergences(1_000_000 + s).into_iter().map(|(_, d)| d).collect()).collect();
    let tau = calibrate_threshold(&honest, 95.0).unwrap();
    let plan = MisreportPlan::heuristic1(&g, 3, 0.15).unwrap();
    let targets: Vec<usize> = plan.targets.iter().map(|t| t.qubit).collect();
    let (mut any_hits, mut target_hits, mut false_pos, mut honest_total) = (0, 0, 0, 0);
    for trial in 0..500u64 {
        let series = synth_drift(&base, 14, 0.30, trial).unwrap();
        let attacked = inject_misreport(&series, &g, &plan, WINDOW2).unwrap();
        let honest_div = window_divergences(&series, &g, WINDOW1, WINDOW2, DETECT_BINS, EPS).unwrap();
        false_pos += honest_div.iter().filter(|(_, d)| *d > tau).count();
        honest_total += honest_div.len();
        let attacked_div = window_divergences(&attacked, &g, WINDOW1, WINDOW2, DETECT_BINS, EPS).unwrap();
        let hits = attacked_div.iter().filter(|(q, d)| targets.contains(q) && *d > tau).count();
        target_hits += hits;
        any_hits += (hits > 0) as usize;
    }
    let any_rate = any_hits as f64 / 500.0;
    let per_target = target_hits as f64 / (500.0 * targets.len() as f64);
    let fpr = false_pos as f64 / honest_total as f64;
    let b = any_rate >= 0.9 && fpr <= 0.10;
    notes.push(format!(
        "(b) tau={tau:.4}, trials with a flagged target {:.1}%, per-target {:.1}%, honest false positives {:.1}%",
        any_rate * 100.0,
        per_target * 100.0,
        fpr * 100.0
    ));

    // (c) fixed +-15% band on honest drift
    let (mut over, mut total) = (0, 0);
    for trial in 0..100u64 {
        let series = synth_drift(&base, 14, 0.30, 5_000 + trial).unwrap();
        let dev = max_relative_deviation(&series, &g, WINDOW1, WINDOW2).unwrap();
        over += dev.iter().filter(|(_, d)| *d > 0.15).count();
        total += dev.len();
    }
    let share = over as f64 / total as f64;
    let c = share > 0.5;
    notes.push(format!("(c) honest qubits outside the 15% band {:.1}%", share * 100.0));
    (a && b && c, notes.join("; "))
}

fn report_json(r: &SimulateReport) -> String {
    serde_json::to_string_pretty(r).unwrap()
}

fn c10_determinism() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (alloc, attack) in [(Allocator::Greedy, h1()), (comdap(), h2())] {
        let base = ExperimentConfig { allocator: alloc, attack, ..Default::default() };
        let cfg = ExperimentConfig { workload: base.workload.clone().with_seed(17), ..base };
        let first = report_json(&cmd_simulate(&cfg).unwrap());
        let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
        let embedded: ExperimentConfig = serde_json::from_value(parsed["config"].clone()).unwrap();
        let via_toml = ExperimentConfig::from_toml(&embedded.to_toml()).unwrap();
        let again = report_json(&cmd_simulate(&via_toml).unwrap());
        ok &= first == again;
        notes.push(format!("{} bytes identical={}", first.len(), first == again));
    }
    let cfg = ExperimentConfig { attack: h1(), ..Default::default() };
    let a = cmd_sweep(&cfg, &[3, 4, 5], 1).unwrap().to_csv();
    let b = cmd_sweep(&cfg, &[3, 4, 5], 3).unwrap().to_csv();
    ok &= a == b;
    notes.push(format!("sweep csv identical={}", a == b));
    (ok, notes.join("; "))
}

fn main() {
    let mut results: Vec<(String, Outcome, f64)> = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.push((name.to_string(), out, t.elapsed().as_secs_f64()));
    };
    run("1 fixture degree-3 set", &mut c1_fixture);
    run("2 heuristic II targets", &mut c2_heuristic2);
    run("3 heuristic I sigma audit", &mut c3_heuristic1);

    let t = Instant::now();
    let greedy_h1 = preset_sweep(Allocator::Greedy, h1());
    let comdap_h1 = preset_sweep(comdap(), h1());
    let greedy_h2 = preset_sweep(Allocator::Greedy, h2());
    let comdap_h2 = preset_sweep(comdap(), h2());
    let sweep_secs = t.elapsed().as_secs_f64();
    let (c4, c5) = c4_c5_throughput(&greedy_h1, &comdap_h1);
    results.push(("4 throughput degradation".into(), c4, sweep_secs));
    results.push(("5 utilization ordering".into(), c5, sweep_secs));
    results.push(("6 depth/pst ordering".into(), c6_depth_pst(&greedy_h2, &comdap_h2), sweep_secs));

    let mut run = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.push((name.to_string(), out, t.elapsed().as_secs_f64()));
    };
    run("7 allocator exactness", &mut c7_allocators);
    run("8 routing and pst invariants", &mut c8_routing);
    run("9 kl detector", &mut c9_detector);
    run("10 determinism", &mut c10_determinism);

    let mut failed = 0;
    for (name, (ok, detail), secs) in &results {
        let verdict = if *ok { "PASS" } else { "FAIL" };
        failed += !ok as usize;
        println!("criterion {name}: {verdict} [{secs:.2}s] {detail}");
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
