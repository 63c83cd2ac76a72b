use crate::topology::{CouplingGraph, QubitSubset};
use crate::{Error, Result};

use super::{Gate, Layout, LogicalCircuit, PhysicalOp, RoutedCircuit};

/// Routes `c` on the partition starting from `layout`.
///
/// Gates run in source order. A two-qubit gate on non-adjacent qubits
/// walks the control's physical carrier along a shortest path inside the
/// partition, one SWAP (three CNOTs) per hop, until it sits next to the
/// target. Routing never leaves the partition.
pub fn route(c: &LogicalCircuit, layout: &Layout, partition: &QubitSubset, g: &CouplingGraph) -> Result<RoutedCircuit> {
    let members = partition.sorted();
    for &p in &members {
        g.check_qubit(p)?;
    }
    if !g.is_induced_connected(&members) {
        return Err(Error::Disconnected(format!("partition {members:?}")));
    }
    if layout.len() != c.qubit_count() || !layout.is_bijection_onto(&members) {
        return Err(Error::Layout("layout is not a bijection onto the partition".into()));
    }

    let mut l2p = layout.0.clone();
    let mut p2l = vec![usize::MAX; g.qubit_count()];
    for (l, &p) in l2p.iter().enumerate() {
        p2l[p] = l;
    }

    let mut ops = Vec::with_capacity(c.gates().len());
    let mut swap_count = 0;
    for gate in c.gates() {
        match *gate {
            Gate::OneQubit(l) => ops.push(PhysicalOp::OneQubit(l2p[l])),
            Gate::Measure(l) => ops.push(PhysicalOp::Measure(l2p[l])),
            Gate::TwoQubit { control, target } => {
                let (pc, pt) = (l2p[control], l2p[target]);
                if !g.has_edge(pc, pt) {
                    let path = g.induced_shortest_path(&members, pc, pt).expect("partition is connected");
                    for hop in path.windows(2).take(path.len() - 2) {
                        let (a, b) = (hop[0], hop[1]);
                        ops.push(PhysicalOp::Cnot { control: a, target: b, swap: true });
                        ops.push(PhysicalOp::Cnot { control: b, target: a, swap: true });
                        ops.push(PhysicalOp::Cnot { control: a, target: b, swap: true });
                        let (la, lb) = (p2l[a], p2l[b]);
                        p2l.swap(a, b);
                        l2p[la] = b;
                        l2p[lb] = a;
                        swap_count += 1;
                    }
                }
                ops.push(PhysicalOp::Cnot { control: l2p[control], target: l2p[target], swap: false });
            }
        }
    }
    Ok(RoutedCircuit { partition: members, initial_layout: layout.clone(), final_layout: Layout(l2p), ops, swap_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::CalibrationSnapshot;
    use crate::transpile::pst_estimate;

    fn cx(c: usize, t: usize) -> Gate {
        Gate::TwoQubit { control: c, target: t }
    }

    #[test]
    fn adjacent_pair_needs_no_swap() {
        let g = CouplingGraph::path(2).unwrap();
        let c = LogicalCircuit::new(2, vec![cx(0, 1)]).unwrap();
        let r = route(&c, &Layout::identity(2), &QubitSubset::all(&g), &g).unwrap();
        assert_eq!(r.swap_count, 0);
        assert_eq!(r.cnot_count(), 1);
        assert_eq!(r.depth(), 1);
    }

    #[test]
    fn p3_endpoints_take_one_swap() {
        let g = CouplingGraph::path(3).unwrap();
        let c = LogicalCircuit::new(3, vec![cx(0, 2), Gate::Measure(0), Gate::Measure(2)]).unwrap();
        let r = route(&c, &Layout::identity(3), &QubitSubset::all(&g), &g).unwrap();
        assert_eq!(r.swap_count, 1);
        assert_eq!(r.cnot_count(), 4);
        assert_eq!(r.final_layout, Layout(vec![1, 0, 2]));
        // three swap layers, then the CNOT; the measurements follow on their own layers
        let without_measure = RoutedCircuit { ops: r.ops[..4].to_vec(), ..r.clone() };
        assert_eq!(without_measure.depth(), 4);

        let snap = CalibrationSnapshot::uniform(&g, 0.02, 0.01).unwrap();
        let expected = 0.98f64.powi(4) * 0.99f64.powi(2);
        assert!((pst_estimate(&r, &snap).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn stays_inside_partition() {
        // square 0-1-2-3-0 plus a pendant 4 on 0; partition avoids qubit 1
        let g = CouplingGraph::new(5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]).unwrap();
        let part = QubitSubset::new(vec![4, 0, 3, 2]).unwrap();
        let c = LogicalCircuit::new(4, vec![cx(0, 3)]).unwrap();
        let layout = Layout(vec![4, 0, 3, 2]);
        let r = route(&c, &layout, &part, &g).unwrap();
        assert_eq!(r.swap_count, 2);
        for op in &r.ops {
            if let PhysicalOp::Cnot { control, target, .. } = *op {
                assert!(g.has_edge(control, target));
                assert!(control != 1 && target != 1);
            }
        }
    }

    #[test]
    fn rejects_bad_partitions() {
        let g = CouplingGraph::path(4).unwrap();
        let c = LogicalCircuit::new(2, vec![cx(0, 1)]).unwrap();
        let split = QubitSubset::new(vec![0, 3]).unwrap();
        assert!(matches!(route(&c, &Layout(vec![0, 3]), &split, &g), Err(Error::Disconnected(_))));
        let part = QubitSubset::new(vec![0, 1]).unwrap();
        assert!(matches!(route(&c, &Layout(vec![0, 2]), &part, &g), Err(Error::Layout(_))));
    }
}
