//! Categorical graphs and the permutation action on them.
//!
//! A [`Graph`] stores one categorical label per node and one per unordered
//! node pair. Edge class `0` always means "no edge"; unlabeled graphs use one
//! node class and two edge classes.

mod io;
mod iso;
pub mod linalg;
mod stats;

pub use io::{graph_from_json_line, graph_to_json_line, read_jsonl, write_jsonl, GraphRecord};
pub use iso::{canonical_hash, is_isomorphic, wl_colors, WL_ITERATIONS};
pub use stats::{
    clustering_coefficients, compute_statistics, normalized_laplacian_spectrum, orbit_counts,
    GraphStatistics, NUM_ORBITS,
};

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// Node labels and symmetric edge labels over `n` nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    node_classes: u8,
    edge_classes: u8,
    nodes: Vec<u8>,
    edges: Vec<u8>,
}

impl Graph {
    /// Unlabeled graph (one node class, two edge classes) with no edges.
    pub fn empty(n: usize) -> Self {
        Self::with_classes(n, 1, 2)
    }

    pub fn with_classes(n: usize, node_classes: u8, edge_classes: u8) -> Self {
        assert!(node_classes >= 1 && edge_classes >= 1);
        Self {
            n,
            node_classes,
            edge_classes,
            nodes: vec![0; n],
            edges: vec![0; n * n],
        }
    }

    /// Unlabeled graph from an edge list. Panics on out-of-range or self-loop edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            g.set_edge(i, j, 1);
        }
        g
    }

    /// Builds a graph from raw parts, checking every invariant.
    pub fn from_parts(
        n: usize,
        node_classes: u8,
        edge_classes: u8,
        nodes: Vec<u8>,
        edges: Vec<u8>,
    ) -> Result<Self> {
        if node_classes == 0 || edge_classes == 0 {
            return Err(Error::Config("class cardinalities must be positive".into()));
        }
        if nodes.len() != n || edges.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {n} node labels and {} edge labels, got {} and {}",
                n * n,
                nodes.len(),
                edges.len()
            )));
        }
        let g = Self {
            n,
            node_classes,
            edge_classes,
            nodes,
            edges,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&x) = self.nodes.iter().find(|&&x| x >= self.node_classes) {
            return Err(Error::Domain(format!(
                "node label {x} >= {}",
                self.node_classes
            )));
        }
        for i in 0..self.n {
            if self.edge(i, i) != 0 {
                return Err(Error::Domain(format!("self-loop at node {i}")));
            }
            for j in 0..self.n {
                let e = self.edge(i, j);
                if e >= self.edge_classes as usize {
                    return Err(Error::Domain(format!(
                        "edge label {e} >= {}",
                        self.edge_classes
                    )));
                }
                if e != self.edge(j, i) {
                    return Err(Error::Domain(format!("edge ({i},{j}) not symmetric")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn node_classes(&self) -> usize {
        self.node_classes as usize
    }

    #[inline]
    pub fn edge_classes(&self) -> usize {
        self.edge_classes as usize
    }

    #[inline]
    pub fn node(&self, i: usize) -> usize {
        self.nodes[i] as usize
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> usize {
        self.edges[i * self.n + j] as usize
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.n + j] != 0
    }

    pub fn node_labels(&self) -> &[u8] {
        &self.nodes
    }

    pub fn set_node(&mut self, i: usize, label: usize) {
        assert!(label < self.node_classes as usize, "node label out of range");
        self.nodes[i] = label as u8;
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_edge(&mut self, i: usize, j: usize, label: usize) {
        assert!(i != j, "self-loops are not representable");
        assert!(label < self.edge_classes as usize, "edge label out of range");
        self.edges[i * self.n + j] = label as u8;
        self.edges[j * self.n + i] = label as u8;
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges[i * self.n..(i + 1) * self.n]
            .iter()
            .filter(|&&e| e != 0)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[i * self.n..(i + 1) * self.n]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(j, _)| j)
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| self.neighbors(i).collect()).collect()
    }

    /// Number of unordered pairs with a non-zero edge label.
    pub fn edge_count(&self) -> usize {
        self.edge_list().len()
    }

    /// Unordered `(i, j)` pairs with `i < j` and a non-zero label.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// A bijection on `{0..n-1}`. Node `k` of the input is moved to position `mapping[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || seen[m] {
                return Err(Error::Argument(format!(
                    "mapping {mapping:?} is not a bijection"
                )));
            }
            seen[m] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.shuffle(rng);
        Self { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    #[inline]
    pub fn apply_index(&self, k: usize) -> usize {
        self.mapping[k]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (k, &m) in self.mapping.iter().enumerate() {
            inv[m] = k;
        }
        Self { mapping: inv }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Permutation) -> Self {
        assert_eq!(self.len(), first.len());
        Self {
            mapping: first.mapping.iter().map(|&k| self.mapping[k]).collect(),
        }
    }
}

/// Relabels `g` so that output node `i` is input node `perm⁻¹(i)`.
pub fn apply_permutation(g: &Graph, perm: &Permutation) -> Result<Graph> {
    if perm.len() != g.n {
        return Err(Error::Dimension(format!(
            "permutation of length {} applied to graph with {} nodes",
            perm.len(),
            g.n
        )));
    }
    let n = g.n;
    let p = &perm.mapping;
    let mut out = Graph::with_classes(n, g.node_classes, g.edge_classes);
    for k in 0..n {
        out.nodes[p[k]] = g.nodes[k];
        for l in 0..n {
            out.edges[p[k] * n + p[l]] = g.edges[k * n + l];
        }
    }
    Ok(out)
}
