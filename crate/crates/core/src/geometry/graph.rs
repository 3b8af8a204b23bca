use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;

use super::AtomArrangement;
use crate::{Error, Result};

/// Relative tolerance on |r − r_b| below which an edge decision is rejected.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Maximum relative spread of edge lengths for a common `edge_length`.
pub const EDGE_SPREAD_TOL: f64 = 0.01;

/// Undirected simple graph on zero-based vertices; vertex `i` is atom `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockadeGraph {
    n_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
    degree: Vec<usize>,
    edge_length: Option<f64>,
}

impl BlockadeGraph {
    /// Graph from explicit zero-based edges, without an edge length.
    pub fn from_edges<I>(n_vertices: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::with_edge_length(n_vertices, edges, None)
    }

    pub fn with_edge_length<I>(n_vertices: usize, edges: I, edge_length: Option<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        let mut degree = vec![0; n_vertices];
        for (a, b) in edges {
            if a == b {
                return Err(Error::Parameter(format!("self-loop at vertex {}", a + 1)));
            }
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::Parameter(format!(
                    "edge ({}, {}) outside {} vertices",
                    a + 1,
                    b + 1,
                    n_vertices
                )));
            }
            if set.insert((a.min(b), a.max(b))) {
                degree[a] += 1;
                degree[b] += 1;
            }
        }
        if let Some(d) = edge_length {
            if !(d > 0.0) {
                return Err(Error::Parameter(format!("edge length must be > 0, got {d}")));
            }
        }
        Ok(Self {
            n_vertices,
            edges: set,
            degree,
            edge_length,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Edges as `(j, k)` with `j < k`, zero-based, in lexicographic order.
    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    /// Common nearest-neighbor distance in μm, when all edges share one.
    pub fn edge_length(&self) -> Option<f64> {
        self.edge_length
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Bitmask of the neighbors of `v` under the qubit bit convention (atom 1
    /// is the most significant bit).
    pub fn neighbor_mask(&self, v: usize) -> usize {
        let n = self.n_vertices;
        self.neighbors(v).fold(0, |m, u| m | 1 << (n - 1 - u))
    }

    /// Basis states (bitstrings) with no two excited neighbors, ascending.
    pub fn independent_sets(&self) -> Vec<usize> {
        let n = self.n_vertices;
        let masks: Vec<usize> = self
            .edges
            .iter()
            .map(|&(a, b)| (1 << (n - 1 - a)) | (1 << (n - 1 - b)))
            .collect();
        (0..1usize << n)
            .filter(|s| masks.iter().all(|m| s & m != *m))
            .collect()
    }

    /// Same graph with vertex `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_vertices || !perm.iter().copied().sorted().eq(0..self.n_vertices) {
            return Err(Error::Parameter("relabeling is not a permutation".into()));
        }
        Self::with_edge_length(
            self.n_vertices,
            self.edges.iter().map(|&(a, b)| (perm[a], perm[b])),
            self.edge_length,
        )
    }

    fn adjacency_bits(&self, perm: &[usize]) -> Vec<bool> {
        let n = self.n_vertices;
        let mut bits = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                bits.push(self.has_edge(perm[a], perm[b]));
            }
        }
        bits
    }

    /// Canonical certificate: the lexicographically largest upper-triangle
    /// adjacency bitstring over all vertex orderings, as a hex string.
    /// Two graphs are isomorphic iff their certificates are equal.
    pub fn certificate(&self) -> String {
        let n = self.n_vertices;
        let best = (0..n)
            .permutations(n)
            .map(|p| self.adjacency_bits(&p))
            .max()
            .unwrap_or_default();
        let mut out = format!("{n}:");
        for chunk in best.chunks(4) {
            let nib = chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (3 - i)));
            out.push(char::from_digit(u32::from(nib), 16).unwrap_or('0'));
        }
        out
    }
}

/// Edge `(j, k)` iff |r_j − r_k| < r_b. Distances within relative 1e-9 of
/// `r_b` are rejected as ambiguous.
pub fn blockade_graph(arr: &AtomArrangement, r_b: f64) -> Result<BlockadeGraph> {
    if !(r_b.is_finite() && r_b > 0.0) {
        return Err(Error::Parameter(format!("blockade radius must be > 0, got {r_b}")));
    }
    let mut edges = Vec::new();
    let mut lengths = Vec::new();
    for (j, k, r) in arr.pairs() {
        if (r - r_b).abs() <= BOUNDARY_TOL * r_b {
            return Err(Error::AmbiguousBlockade {
                j: j + 1,
                k: k + 1,
                distance: r,
                r_b,
            });
        }
        if r < r_b {
            edges.push((j, k));
            lengths.push(r);
        }
    }
    let edge_length = if lengths.is_empty() {
        None
    } else {
        let lo = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lengths.iter().copied().fold(0.0, f64::max);
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        ((hi - lo) / mean <= EDGE_SPREAD_TOL).then_some(mean)
    };
    BlockadeGraph::with_edge_length(arr.len(), edges, edge_length)
}

/// Isomorphism class of a small graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GraphClass {
    Path(usize),
    Cycle(usize),
    Star(usize),
    Complete(usize),
    /// K4 minus one edge.
    Diamond,
    /// Anything else, identified by its canonical certificate.
    Other(String),
}

impl fmt::Display for GraphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphClass::Path(n) => write!(f, "path_{n}"),
            GraphClass::Cycle(n) => write!(f, "cycle_{n}"),
            GraphClass::Star(n) => write!(f, "star_{n}"),
            GraphClass::Complete(n) => write!(f, "complete_{n}"),
            GraphClass::Diamond => f.write_str("diamond"),
            GraphClass::Other(c) => write!(f, "other({c})"),
        }
    }
}

impl GraphClass {
    /// Reference graph of this class with a fixed labeling; `None` for
    /// `Other`.
    pub fn reference_graph(&self) -> Option<BlockadeGraph> {
        let edges: Vec<(usize, usize)> = match *self {
            GraphClass::Path(n) => (1..n).map(|i| (i - 1, i)).collect(),
            GraphClass::Cycle(n) if n >= 3 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            GraphClass::Star(n) => (1..n).map(|i| (0, i)).collect(),
            GraphClass::Complete(n) => (0..n).tuple_combinations().collect(),
            // Missing edge (1, 3) in one-based labels.
            GraphClass::Diamond => vec![(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)],
            _ => return None,
        };
        let n = match *self {
            GraphClass::Path(n)
            | GraphClass::Cycle(n)
            | GraphClass::Star(n)
            | GraphClass::Complete(n) => n,
            _ => 4,
        };
        BlockadeGraph::from_edges(n, edges).ok()
    }
}

/// Brute-force isomorphism classification for 1 ≤ N ≤ 8.
pub fn classify_graph(g: &BlockadeGraph) -> Result<GraphClass> {
    let n = g.n_vertices();
    if !(1..=8).contains(&n) {
        return Err(Error::Parameter(format!(
            "classification supports 1..=8 vertices, got {n}"
        )));
    }
    let cert = g.certificate();
    // Order matters where classes coincide for small n (K3 = C3, P3 = S3).
    let candidates = [
        GraphClass::Complete(n),
        GraphClass::Cycle(n),
        GraphClass::Path(n),
        GraphClass::Star(n),
        GraphClass::Diamond,
    ];
    for class in candidates {
        if let Some(r) = class.reference_graph() {
            if r.n_vertices() == n && r.n_edges() == g.n_edges() && r.certificate() == cert {
                return Ok(class);
            }
        }
    }
    Ok(GraphClass::Other(cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        square_to_diamond, star_to_tetrahedron, tetra_to_square, three_atom_bend,
    };
    use proptest::prelude::*;

    fn one_based(n: usize, e: &[(usize, usize)]) -> BlockadeGraph {
        BlockadeGraph::from_edges(n, e.iter().map(|&(a, b)| (a - 1, b - 1))).unwrap()
    }

    #[test]
    fn square_is_cycle() {
        let g = blockade_graph(&tetra_to_square(1.0, 8.0).unwrap(), 10.0).unwrap();
        assert_eq!(g.n_edges(), 4);
        assert_eq!(g.degrees(), &[2, 2, 2, 2]);
        assert!((g.edge_length().unwrap() - 8.0).abs() < 1e-9);
        assert_eq!(classify_graph(&g).unwrap(), GraphClass::Cycle(4));
    }

    #[test]
    fn tetrahedron_is_complete() {
        let g = blockade_graph(&star_to_tetrahedron(1.0, 8.0).unwrap(), 10.0).unwrap();
        assert_eq!(g.n_edges(), 6);
        assert_eq!(classify_graph(&g).unwrap(), GraphClass::Complete(4));
    }

    #[test]
    fn star_and_diamond_geometries() {
        let g = blockade_graph(&star_to_tetrahedron(0.0, 8.0).unwrap(), 10.0).unwrap();
        assert_eq!(classify_graph(&g).unwrap(), GraphClass::Star(4));
        let g = blockade_graph(&square_to_diamond(1.0, 8.0).unwrap(), 10.0).unwrap();
        assert_eq!(g.n_edges(), 5);
        assert!(!g.has_edge(2, 3));
        assert_eq!(classify_graph(&g).unwrap(), GraphClass::Diamond);
    }

    #[test]
    fn straight_chain_is_path() {
        let g = blockade_graph(&three_atom_bend(180.0, 8.0).unwrap(), 10.0).unwrap();
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(classify_graph(&g).unwrap(), GraphClass::Path(3));
    }

    #[test]
    fn boundary_distance_is_rejected() {
        let arr = tetra_to_square(1.0, 8.0).unwrap();
        match blockade_graph(&arr, 8.0) {
            Err(Error::AmbiguousBlockade { .. }) => {}
            other => panic!("expected ambiguity error, got {other:?}"),
        }
        assert!(blockade_graph(&arr, 0.0).is_err());
    }

    #[test]
    fn mixed_edge_lengths_drop_edge_length() {
        let g = blockade_graph(&three_atom_bend(90.0, 8.0).unwrap(), 12.0).unwrap();
        assert_eq!(g.n_edges(), 3);
        assert!(g.edge_length().is_none());
    }

    #[test]
    fn named_classes() {
        assert_eq!(classify_graph(&one_based(4, &[(1, 2), (1, 3), (1, 4)])).unwrap(), GraphClass::Star(4));
        assert_eq!(
            classify_graph(&one_based(4, &[(1, 2), (2, 3), (3, 4), (1, 4), (1, 3)])).unwrap(),
            GraphClass::Diamond
        );
        assert_eq!(classify_graph(&one_based(3, &[(1, 2), (2, 3), (1, 3)])).unwrap(), GraphClass::Complete(3));
        assert_eq!(classify_graph(&one_based(4, &[(1, 2), (2, 3), (3, 4)])).unwrap(), GraphClass::Path(4));
        assert_eq!(classify_graph(&one_based(1, &[])).unwrap(), GraphClass::Complete(1));
        assert!(matches!(
            classify_graph(&one_based(4, &[(1, 2), (3, 4)])).unwrap(),
            GraphClass::Other(_)
        ));
        assert!(classify_graph(&BlockadeGraph::from_edges(9, []).unwrap()).is_err());
    }

    #[test]
    fn self_loops_rejected() {
        assert!(BlockadeGraph::from_edges(2, [(1, 1)]).is_err());
        assert!(BlockadeGraph::from_edges(2, [(0, 2)]).is_err());
    }

    #[test]
    fn independent_sets_of_cycle() {
        let g = one_based(4, &[(1, 2), (2, 3), (3, 4), (1, 4)]);
        assert_eq!(g.independent_sets(), vec![0, 1, 2, 4, 5, 8, 10]);
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<usize>)> {
        (2usize..=6).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
            let m = pairs.len();
            (
                Just(n),
                proptest::sample::subsequence(pairs, 0..=m),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
    }

    proptest! {
        #[test]
        fn classification_invariant_under_relabeling((n, edges, perm) in arb_graph()) {
            let g = BlockadeGraph::from_edges(n, edges).unwrap();
            let h = g.relabeled(&perm).unwrap();
            prop_assert_eq!(classify_graph(&g).unwrap(), classify_graph(&h).unwrap());
            prop_assert_eq!(g.certificate(), h.certificate());
        }

        #[test]
        fn degrees_count_incident_edges((n, edges, _p) in arb_graph()) {
            let g = BlockadeGraph::from_edges(n, edges).unwrap();
            for v in 0..n {
                let count = g.edges().iter().filter(|&&(a, b)| a == v || b == v).count();
                prop_assert_eq!(g.degree(v), count);
            }
            for &(a, b) in g.edges() {
                prop_assert!(a < b);
            }
        }

        #[test]
        fn blockade_graph_is_monotone_in_radius(
            xi in 0.0f64..=1.0,
            r1 in 5.0f64..20.0,
            dr in 0.01f64..5.0,
        ) {
            let arr = star_to_tetrahedron(xi, 8.0).unwrap();
            if let (Ok(a), Ok(b)) = (blockade_graph(&arr, r1), blockade_graph(&arr, r1 + dr)) {
                prop_assert!(a.edges().is_subset(b.edges()));
            }
        }
    }
}
