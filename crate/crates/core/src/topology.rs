//! Coupling-graph model and the graph metrics shared by the allocators,
//! the adversary heuristics and the router.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An undirected coupling edge, stored with the smaller endpoint first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(usize, usize);

impl Edge {
    /// Normalises the endpoint order. Panics on a self-loop.
    pub fn new(u: usize, v: usize) -> Self {
        assert_ne!(u, v, "self-loop edge ({u}, {v})");
        if u < v {
            Edge(u, v)
        } else {
            Edge(v, u)
        }
    }

    pub fn low(&self) -> usize {
        self.0
    }

    pub fn high(&self) -> usize {
        self.1
    }

    pub fn touches(&self, q: usize) -> bool {
        self.0 == q || self.1 == q
    }

    pub fn other(&self, q: usize) -> Option<usize> {
        if self.0 == q {
            Some(self.1)
        } else if self.1 == q {
            Some(self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

impl FromStr for Edge {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (u, v) = s
            .split_once('-')
            .ok_or_else(|| format!("edge `{s}` is not of the form u-v"))?;
        let u: usize = u.trim().parse().map_err(|_| format!("bad qubit index in `{s}`"))?;
        let v: usize = v.trim().parse().map_err(|_| format!("bad qubit index in `{s}`"))?;
        if u == v {
            return Err(format!("edge `{s}` is a self-loop"));
        }
        Ok(Edge::new(u, v))
    }
}

/// Marker for unreachable pairs in a [`DistanceMatrix`].
const UNREACHABLE: u32 = u32::MAX;

/// Hop distances between every pair of qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    /// Distance between `u` and `v`, `None` when no path exists.
    pub fn get(&self, u: usize, v: usize) -> Option<u32> {
        match self.data[u * self.n + v] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|&d| d != UNREACHABLE)
    }
}

/// Undirected physical-qubit connectivity.
///
/// Adjacency is kept both as sorted neighbor lists (for deterministic
/// traversal) and as a dense bit matrix (for O(1) edge queries). The
/// all-pairs distance matrix is computed lazily and cached.
#[derive(Debug, Clone)]
pub struct CouplingGraph {
    qubit_count: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    adjacent: Vec<bool>,
    distances: OnceLock<DistanceMatrix>,
}

impl PartialEq for CouplingGraph {
    fn eq(&self, other: &Self) -> bool {
        self.qubit_count == other.qubit_count && self.edges == other.edges
    }
}

impl Eq for CouplingGraph {}

impl CouplingGraph {
    pub fn new(qubit_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::InvalidGraph("qubit count must be positive".into()));
        }
        let mut normalised = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on qubit {u}")));
            }
            for q in [u, v] {
                if q >= qubit_count {
                    return Err(Error::QubitOutOfRange { qubit: q, qubit_count });
                }
            }
            normalised.push(Edge::new(u, v));
        }
        normalised.sort_unstable();
        if let Some(w) = normalised.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge {}", w[0])));
        }

        let mut neighbors = vec![Vec::new(); qubit_count];
        let mut adjacent = vec![false; qubit_count * qubit_count];
        for e in &normalised {
            neighbors[e.0].push(e.1);
            neighbors[e.1].push(e.0);
            adjacent[e.0 * qubit_count + e.1] = true;
            adjacent[e.1 * qubit_count + e.0] = true;
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            qubit_count,
            edges: normalised,
            neighbors,
            adjacent,
            distances: OnceLock::new(),
        })
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Complete graph on `n` qubits.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    /// Edges in ascending order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.qubit_count {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange { qubit: q, qubit_count: self.qubit_count })
        }
    }

    /// Sorted neighbor list of `q`. Panics if `q` is out of range.
    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.qubit_count && v < self.qubit_count && self.adjacent[u * self.qubit_count + v]
    }

    pub fn degree(&self, q: usize) -> Result<usize> {
        self.check_qubit(q)?;
        Ok(self.neighbors[q].len())
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Qubits whose degree equals the maximum degree, ascending.
    pub fn max_degree_qubits(&self) -> Vec<usize> {
        let max = self.max_degree();
        (0..self.qubit_count).filter(|&q| self.neighbors[q].len() == max).collect()
    }

    /// Edges incident to `q`, ascending.
    pub fn incident_edges(&self, q: usize) -> impl Iterator<Item = Edge> + '_ {
        self.neighbors[q].iter().map(move |&v| Edge::new(q, v))
    }

    pub fn is_connected(&self) -> bool {
        self.distances().all_finite()
    }

    /// All-pairs hop distances, computed by one BFS per source and cached.
    pub fn distances(&self) -> &DistanceMatrix {
        self.distances.get_or_init(|| {
            let n = self.qubit_count;
            let mut data = vec![UNREACHABLE; n * n];
            let mut queue = VecDeque::new();
            for src in 0..n {
                let row = &mut data[src * n..(src + 1) * n];
                row[src] = 0;
                queue.push_back(src);
                while let Some(u) = queue.pop_front() {
                    for &v in &self.neighbors[u] {
                        if row[v] == UNREACHABLE {
                            row[v] = row[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
            }
            DistanceMatrix { n, data }
        })
    }

    /// Hop distance between two qubits, `None` if unreachable.
    pub fn distance(&self, u: usize, v: usize) -> Result<Option<u32>> {
        self.check_qubit(u)?;
        self.check_qubit(v)?;
        Ok(self.distances().get(u, v))
    }

    /// Population standard deviation of the shortest-path distances from
    /// `q` to every other qubit. The self-distance is excluded.
    pub fn path_stddev(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        if !self.is_connected() {
            return Err(Error::Disconnected("path spread needs a connected graph".into()));
        }
        if self.qubit_count == 1 {
            return Ok(0.0);
        }
        // integer sums keep equal spreads bit-identical, so ties stay ties
        let dist = self.distances();
        let (mut s1, mut s2) = (0u64, 0u64);
        for v in (0..self.qubit_count).filter(|&v| v != q) {
            let d = u64::from(dist.get(q, v).expect("connected"));
            s1 += d;
            s2 += d * d;
        }
        let m = (self.qubit_count - 1) as u64;
        let var = (m * s2 - s1 * s1) as f64 / (m * m) as f64;
        Ok(var.sqrt())
    }

    /// Number of edges with both endpoints in `members`.
    pub fn induced_edge_count(&self, members: &[usize]) -> usize {
        let mut count = 0;
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                if self.has_edge(u, v) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Edges of the subgraph induced by `members`, ascending.
    pub fn induced_edges(&self, members: &[usize]) -> Vec<Edge> {
        let mut mask = vec![false; self.qubit_count];
        for &q in members {
            mask[q] = true;
        }
        self.edges.iter().copied().filter(|e| mask[e.0] && mask[e.1]).collect()
    }

    /// Ratio of induced edges to the `n(n-1)/2` possible ones; 1 for a
    /// singleton.
    pub fn density(&self, s: &QubitSubset) -> Result<f64> {
        self.check_subset(s)?;
        let n = s.len();
        if n == 1 {
            return Ok(1.0);
        }
        let possible = (n * (n - 1) / 2) as f64;
        Ok(self.induced_edge_count(s.members()) as f64 / possible)
    }

    /// Diameter of the induced subgraph over the maximum possible diameter
    /// `n - 1`; 1 for a singleton.
    pub fn compactness(&self, s: &QubitSubset) -> Result<f64> {
        self.check_subset(s)?;
        let n = s.len();
        if n == 1 {
            return Ok(1.0);
        }
        let diameter = self
            .induced_diameter(s.members())
            .ok_or_else(|| Error::Disconnected("induced subgraph of the subset".into()))?;
        Ok(diameter as f64 / (n - 1) as f64)
    }

    /// Diameter of the subgraph induced by `members`, `None` if it is
    /// disconnected.
    pub fn induced_diameter(&self, members: &[usize]) -> Option<usize> {
        let mut best = 0;
        for &src in members {
            let dist = self.induced_bfs(members, src);
            for &q in members {
                best = best.max(dist[q]?);
            }
        }
        Some(best)
    }

    /// Whether the subgraph induced by `members` is connected. Empty sets
    /// count as disconnected.
    pub fn is_induced_connected(&self, members: &[usize]) -> bool {
        match members.first() {
            None => false,
            Some(&src) => {
                let dist = self.induced_bfs(members, src);
                members.iter().all(|&q| dist[q].is_some())
            }
        }
    }

    /// BFS restricted to `members`; entries outside the subset stay `None`.
    pub fn induced_bfs(&self, members: &[usize], src: usize) -> Vec<Option<usize>> {
        let mut mask = vec![false; self.qubit_count];
        for &q in members {
            mask[q] = true;
        }
        let mut dist = vec![None; self.qubit_count];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued nodes have distances");
            for &v in &self.neighbors[u] {
                if mask[v] && dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Shortest path from `src` to `dst` inside `members` (both ends
    /// included). Among equal-length paths the one found by ascending
    /// neighbor order wins.
    pub fn induced_shortest_path(&self, members: &[usize], src: usize, dst: usize) -> Option<Vec<usize>> {
        let mut mask = vec![false; self.qubit_count];
        for &q in members {
            mask[q] = true;
        }
        if !mask[src] || !mask[dst] {
            return None;
        }
        let mut parent = vec![usize::MAX; self.qubit_count];
        parent[src] = src;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if u == dst {
                break;
            }
            for &v in &self.neighbors[u] {
                if mask[v] && parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[dst] == usize::MAX {
            return None;
        }
        let mut path = vec![dst];
        let mut cur = dst;
        while cur != src {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Connected components of the subgraph induced by `members`, each
    /// sorted, ordered by their smallest member.
    pub fn induced_components(&self, members: &[usize]) -> Vec<Vec<usize>> {
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        let mut seen = vec![false; self.qubit_count];
        let mut out = Vec::new();
        for &start in &sorted {
            if seen[start] {
                continue;
            }
            let dist = self.induced_bfs(&sorted, start);
            let comp: Vec<usize> = sorted.iter().copied().filter(|&q| dist[q].is_some()).collect();
            for &q in &comp {
                seen[q] = true;
            }
            out.push(comp);
        }
        out
    }

    fn check_subset(&self, s: &QubitSubset) -> Result<()> {
        for &q in s.members() {
            self.check_qubit(q)?;
        }
        Ok(())
    }

    /// Parses the plain-text edge-list format: a `qubits N` line followed
    /// by one `u v` pair per line. Blank lines and `#` comments are skipped.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut qubits = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::InvalidGraph(format!("line {}: {msg}", idx + 1));
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("qubits"), Some(n), None) if qubits.is_none() => {
                    qubits = Some(n.parse::<usize>().map_err(|_| bad("bad qubit count"))?);
                }
                (Some(u), Some(v), None) if qubits.is_some() => {
                    let u = u.parse().map_err(|_| bad("bad qubit index"))?;
                    let v = v.parse().map_err(|_| bad("bad qubit index"))?;
                    edges.push((u, v));
                }
                _ if qubits.is_none() => return Err(bad("expected `qubits N` header")),
                _ => return Err(bad("expected `u v`")),
            }
        }
        let n = qubits.ok_or_else(|| Error::InvalidGraph("missing `qubits N` header".into()))?;
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("qubits {}\n", self.qubit_count);
        for e in &self.edges {
            out.push_str(&format!("{} {}\n", e.0, e.1));
        }
        out
    }
}

/// Edge list of the 27-qubit heavy-hex lattice (IBM Falcon r5, e.g. Hanoi).
pub const HANOI27_EDGES: [(usize, usize); 28] = [
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8),
    (6, 7), (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13),
    (12, 15), (13, 14), (14, 16), (15, 18), (16, 19), (17, 18), (18, 21),
    (19, 20), (19, 22), (21, 23), (22, 25), (23, 24), (24, 25), (25, 26),
];

/// The 27-qubit heavy-hex coupling graph.
pub fn hanoi27() -> CouplingGraph {
    CouplingGraph::new(27, HANOI27_EDGES).expect("fixture is well formed")
}

/// Resolves a built-in topology by name.
pub fn builtin(name: &str) -> Option<CouplingGraph> {
    match name {
        "hanoi27" | "heavy-hex-27" => Some(hanoi27()),
        _ => None,
    }
}

/// A non-empty set of distinct qubit indices. Insertion order is kept so
/// that allocators can report the order in which qubits were added.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct QubitSubset(Vec<usize>);

impl QubitSubset {
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidSubset("subset is empty".into()));
        }
        let mut sorted = members.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset(format!("qubit {} listed twice", w[0])));
        }
        Ok(Self(members))
    }

    /// Every qubit of `g`.
    pub fn all(g: &CouplingGraph) -> Self {
        Self((0..g.qubit_count()).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.0.contains(&q)
    }

    /// Members in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }

    /// Set equality, ignoring insertion order.
    pub fn same_members(&self, other: &QubitSubset) -> bool {
        self.sorted() == other.sorted()
    }
}

impl TryFrom<Vec<usize>> for QubitSubset {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QubitSubset> for Vec<usize> {
    fn from(s: QubitSubset) -> Self {
        s.0
    }
}
