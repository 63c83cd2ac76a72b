use std::collections::BTreeMap;

use proptest::prelude::*;

use mtqsim_core::adversary::{apply_misreport, MisreportPlan};
use mtqsim_core::allocation::{
    greedy_allocate, AllocationRequest, Allocator, ComdapOptions, CommunityWeighting, Extraction,
};
use mtqsim_core::calibration::{synth_drift, CalibrationSeries, CalibrationSnapshot};
use mtqsim_core::defense::{build_distribution, kl_divergence, window_divergences, CycleWindow};
use mtqsim_core::scheduler::{gen_workload, run_queue};
use mtqsim_core::topology::{hanoi27, CouplingGraph, Edge, QubitSubset};
use mtqsim_core::transpile::{initial_layout, route, Gate, LogicalCircuit, PhysicalOp};

/// Random connected graph: a random spanning tree plus extra edges.
fn connected_graph(max_nodes: usize) -> impl Strategy<Value = CouplingGraph> {
    (2..=max_nodes)
        .prop_flat_map(|n| {
            let parents = (1..n).map(|i| 0..i).collect::<Vec<_>>();
            let extra = prop::collection::vec((0..n, 0..n), 0..n);
            (Just(n), parents, extra)
        })
        .prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.into_iter().enumerate().map(|(i, p)| (i + 1, p)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            edges.sort_by_key(|&(a, b)| (a.min(b), a.max(b)));
            edges.dedup_by_key(|&mut (a, b)| (a.min(b), a.max(b)));
            CouplingGraph::new(n, edges).unwrap()
        })
}

/// Errors on a 1/1024 grid so sums stay exact.
fn dyadic_snapshot(g: &CouplingGraph, cnot: &[u32], readout: &[u32]) -> CalibrationSnapshot {
    let map: BTreeMap<Edge, f64> =
        g.edges().iter().zip(cnot.iter().cycle()).map(|(&e, &c)| (e, c as f64 / 1024.0)).collect();
    let r = (0..g.qubit_count()).map(|q| readout[q % readout.len()] as f64 / 1024.0).collect();
    CalibrationSnapshot::new(g, 0, map, r).unwrap()
}

fn floyd_warshall(g: &CouplingGraph) -> Vec<Vec<Option<u32>>> {
    let n = g.qubit_count();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for e in g.edges() {
        d[e.low()][e.high()] = Some(1);
        d[e.high()][e.low()] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bfs_matches_floyd_warshall(g in connected_graph(14), extra_isolated in 0usize..2) {
        let g = if extra_isolated == 1 {
            CouplingGraph::new(g.qubit_count() + 1, g.edges().iter().map(|e| (e.low(), e.high()))).unwrap()
        } else {
            g
        };
        let fw = floyd_warshall(&g);
        #[allow(clippy::needless_range_loop)]
        for u in 0..g.qubit_count() {
            for v in 0..g.qubit_count() {
                prop_assert_eq!(g.distances().get(u, v), fw[u][v]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn allocators_return_valid_partitions(
        g in connected_graph(12),
        cnot in prop::collection::vec(1u32..100, 1..20),
        readout in prop::collection::vec(1u32..100, 1..20),
        mask in prop::collection::vec(any::<bool>(), 12),
        size_pick in 0usize..12,
        exact in any::<bool>(),
    ) {
        let snap = dyadic_snapshot(&g, &cnot, &readout);
        let available: Vec<usize> = (0..g.qubit_count()).filter(|&q| mask[q]).collect();
        prop_assume!(!available.is_empty());
        let size = 1 + size_pick % available.len();
        let req = AllocationRequest::new(size, QubitSubset::new(available.clone()).unwrap()).unwrap();
        let comdap = ComdapOptions {
            weighting: CommunityWeighting::Fidelity,
            extraction: if exact { Extraction::Exact } else { Extraction::Greedy },
        };
        for alloc in [Allocator::Greedy, Allocator::Comdap(comdap)] {
            if let Some(p) = alloc.allocate(&g, &snap, &req).unwrap() {
                let m = p.members.sorted();
                prop_assert_eq!(m.len(), size);
                prop_assert!(m.iter().all(|q| available.contains(q)));
                prop_assert!(g.is_induced_connected(&m));
            }
        }
        let full = AllocationRequest::new(size, QubitSubset::all(&g)).unwrap();
        prop_assert!(Allocator::Greedy.allocate(&g, &snap, &full).unwrap().is_some());
        prop_assert!(Allocator::Comdap(comdap).allocate(&g, &snap, &full).unwrap().is_some());
    }

    #[test]
    fn greedy_ignores_uniform_cnot_offset(
        g in connected_graph(12),
        cnot in prop::collection::vec(1u32..100, 1..20),
        readout in prop::collection::vec(1u32..100, 1..20),
        offset in 1u32..64,
        size_pick in 0usize..12,
    ) {
        let snap = dyadic_snapshot(&g, &cnot, &readout);
        let shifted: Vec<u32> = cnot.iter().map(|c| c + offset).collect();
        let snap2 = dyadic_snapshot(&g, &shifted, &readout);
        let size = 1 + size_pick % g.qubit_count();
        let req = AllocationRequest::new(size, QubitSubset::all(&g)).unwrap();
        let a = greedy_allocate(&g, &snap, &req).unwrap().unwrap();
        let b = greedy_allocate(&g, &snap2, &req).unwrap().unwrap();
        prop_assert_eq!(a.members, b.members);
    }

    #[test]
    fn routing_preserves_logical_interactions(
        g in connected_graph(8),
        pairs in prop::collection::vec((0usize..6, 0usize..6), 1..15),
        width_pick in 0usize..5,
    ) {
        let width = (2 + width_pick).min(g.qubit_count());
        // a connected partition: BFS order from qubit 0
        let order: Vec<usize> = {
            let mut seen = vec![0usize];
            let mut i = 0;
            while i < seen.len() {
                for &v in g.neighbors(seen[i]) {
                    if !seen.contains(&v) {
                        seen.push(v);
                    }
                }
                i += 1;
            }
            seen
        };
        let part = QubitSubset::new(order[..width].to_vec()).unwrap();
        let logical: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(a, b)| (a % width, b % width))
            .filter(|(a, b)| a != b)
            .collect();
        let gates = logical.iter().map(|&(control, target)| Gate::TwoQubit { control, target }).collect();
        let c = LogicalCircuit::new(width, gates).unwrap();
        let snap = CalibrationSnapshot::uniform(&g, 0.02, 0.02).unwrap();
        let layout = initial_layout(&c, &part, &g, &snap).unwrap();
        let r = route(&c, &layout, &part, &g).unwrap();

        let mut p2l = vec![usize::MAX; g.qubit_count()];
        for (l, &p) in layout.0.iter().enumerate() {
            p2l[p] = l;
        }
        let mut replayed = Vec::new();
        let mut swap_cnots = 0;
        for op in &r.ops {
            if let PhysicalOp::Cnot { control, target, swap } = *op {
                prop_assert!(g.has_edge(control, target));
                prop_assert!(part.contains(control) && part.contains(target));
                if swap {
                    swap_cnots += 1;
                    if swap_cnots % 3 == 0 {
                        p2l.swap(control, target);
                    }
                } else {
                    replayed.push((p2l[control], p2l[target]));
                }
            }
        }
        prop_assert_eq!(replayed, logical);
        prop_assert_eq!(r.cnot_count(), c.two_qubit_count() + 3 * r.swap_count);
        for (l, &p) in r.final_layout.0.iter().enumerate() {
            prop_assert_eq!(p2l[p], l);
        }
    }

    #[test]
    fn misreport_touches_only_incident_edges(
        cnot in prop::collection::vec(1u32..1000, 28),
        k in 1u32..40,
        heuristic2 in any::<bool>(),
    ) {
        let g = hanoi27();
        let truth = dyadic_snapshot(&g, &cnot, &[10]);
        let plan = if heuristic2 {
            let k = k as f64 / 100.0;
            MisreportPlan::heuristic2(&g, &[k, k * 0.8, k * 0.6]).unwrap()
        } else {
            MisreportPlan::heuristic1(&g, 3, k as f64 / 100.0).unwrap()
        };
        let reported = apply_misreport(&truth, &g, &plan).unwrap();
        prop_assert_eq!(reported.readout_errors(), truth.readout_errors());
        for e in g.edges() {
            let (t, r) = (truth.cnot_error(e.low(), e.high()).unwrap(), reported.cnot_error(e.low(), e.high()).unwrap());
            let targeted = plan.targets.iter().any(|x| e.touches(x.qubit));
            if !targeted {
                prop_assert_eq!(t.to_bits(), r.to_bits());
            } else if heuristic2 {
                prop_assert!(r < t);
            } else {
                prop_assert!(r > t);
            }
        }
    }

    #[test]
    fn csv_round_trip(cycles in 1usize..6, cv in 0.0f64..1.2, seed in any::<u64>()) {
        let g = hanoi27();
        let base = CalibrationSnapshot::uniform(&g, 0.02, 0.03).unwrap();
        let series = synth_drift(&base, cycles, cv, seed).unwrap();
        let back = CalibrationSeries::from_csv(&g, &series.to_csv()).unwrap();
        prop_assert_eq!(back, series);
    }

    #[test]
    fn kl_is_non_negative(a in prop::collection::vec(0.0f64..1.0, 1..40), b in prop::collection::vec(0.0f64..1.0, 1..40), bins in 1usize..12) {
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let p = build_distribution(&a, &edges, 1e-6).unwrap();
        let q = build_distribution(&b, &edges, 1e-6).unwrap();
        prop_assert!((p.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap() < 1e-12);
    }

    #[test]
    fn detection_ignores_order_within_windows(seed in any::<u64>(), rot in 1u64..7) {
        let g = hanoi27();
        let base = CalibrationSnapshot::uniform(&g, 0.02, 0.02).unwrap();
        let series = synth_drift(&base, 14, 0.3, seed).unwrap();
        // rotate cycle ids inside each 7-cycle window
        let relabelled: Vec<CalibrationSnapshot> = series
            .snapshots()
            .iter()
            .map(|s| {
                let c = s.cycle_id();
                let w = c / 7 * 7;
                s.clone().with_cycle_id(w + (c - w + rot) % 7)
            })
            .collect();
        let mut sorted = relabelled;
        sorted.sort_by_key(|s| s.cycle_id());
        let shuffled = CalibrationSeries::new(sorted).unwrap();
        let w1 = CycleWindow::new(0, 6).unwrap();
        let w2 = CycleWindow::new(7, 13).unwrap();
        prop_assert_eq!(
            window_divergences(&series, &g, w1, w2, 5, 1e-9).unwrap(),
            window_divergences(&shuffled, &g, w1, w2, 5, 1e-9).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scheduler_conservation(seed in any::<u64>(), count in 0usize..40, comdap in any::<bool>()) {
        let g = hanoi27();
        let snap = CalibrationSnapshot::uniform(&g, 0.02, 0.02).unwrap();
        let jobs = gen_workload(count, 2, 10, 2.0, seed).unwrap();
        let alloc = if comdap { Allocator::Comdap(ComdapOptions::default()) } else { Allocator::Greedy };
        let r = run_queue(&jobs, &g, &snap, &snap, &alloc).unwrap();
        let mut seen = vec![0; count];
        for round in &r.rounds {
            let mut used = [false; 27];
            for pj in &round.placed_jobs {
                seen[pj.job_id] += 1;
                for &q in &pj.members {
                    prop_assert!(!used[q]);
                    used[q] = true;
                }
                prop_assert_eq!(pj.members.len(), jobs[pj.job_id].size());
            }
            let active: usize = round.placed_jobs.iter().map(|p| p.members.len()).sum();
            prop_assert_eq!(round.active_qubits, active);
            prop_assert!((round.utilization - active as f64 / 27.0).abs() < 1e-15);
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let total: usize = jobs.iter().map(|j| j.size()).sum();
        prop_assert!(r.total_rounds >= total.div_ceil(27));
    }
}
