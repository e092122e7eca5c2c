//! Stochastic partitioned graphs.
//!
//! A [`PartitionedGraph`] is a vertex set split into labelled blocks plus an
//! immutable, canonically sorted edge list. Graphs are built once and then
//! shared (usually behind an `Arc`) by every model and chain that runs on them.

mod dsu;

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

pub use self::dsu::DisjointSets;
pub use crate::io::load_edge_list;

/// Dense vertex id.
pub type Vertex = u32;

/// Undirected edge, smaller endpoint first.
pub type Edge = (Vertex, Vertex);

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph spec: `{field}` {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("partition sizes must be at least 1 (got {0})")]
    ZeroSize(usize),
    #[error("partition {0} has no vertices")]
    EmptyPartition(u32),
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(Vertex, Vertex),
    #[error("vertex {vertex} out of range for {num_vertices} vertices")]
    VertexOutOfRange { vertex: u64, num_vertices: usize },
    #[error("graph too large: {0}")]
    TooLarge(String),
}

/// Parameters of G(n, [alpha_i], [p_ij]).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    n: usize,
    alphas: Vec<f64>,
    probs: Vec<Vec<f64>>,
}

impl GraphSpec {
    pub fn new(n: usize, alphas: Vec<f64>, probs: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let invalid = |field, reason: String| GraphError::InvalidSpec { field, reason };
        let r = alphas.len();
        if r == 0 {
            return Err(invalid("alphas", "must name at least one partition".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0 && **a <= 1.0)) {
            return Err(invalid("alphas", format!("entry {a} is outside (0, 1]")));
        }
        let total: f64 = alphas.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("alphas", format!("sum to {total}, expected 1")));
        }
        if probs.len() != r || probs.iter().any(|row| row.len() != r) {
            return Err(invalid("probs", format!("must be a {r}x{r} matrix")));
        }
        for (i, row) in probs.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid("probs", format!("entry [{i}][{j}] = {p} is outside [0, 1]")));
                }
                if p != probs[j][i] {
                    return Err(invalid("probs", format!("not symmetric at [{i}][{j}]")));
                }
            }
        }
        let spec = GraphSpec { n, alphas, probs };
        if let Some(i) = spec.partition_sizes().iter().position(|&s| s == 0) {
            return Err(invalid("n", format!("{n} leaves partition {i} empty")));
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// `floor(alpha_i * n)` per block, with the remainder handed out by
    /// largest fractional part (ties to the lower index).
    pub fn partition_sizes(&self) -> Vec<usize> {
        let scaled: Vec<f64> = self.alphas.iter().map(|a| a * self.n as f64).collect();
        let mut sizes: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - scaled[a].floor();
            let fb = scaled[b] - scaled[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let assigned: usize = sizes.iter().sum();
        if assigned <= self.n {
            for &i in order.iter().cycle().take(self.n - assigned) {
                sizes[i] += 1;
            }
        } else {
            for &i in order.iter().rev().cycle().take(assigned - self.n) {
                sizes[i] -= 1;
            }
        }
        sizes
    }
}

/// CSR adjacency: for each vertex, `(neighbor, edge index)` pairs.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    entries: Vec<(Vertex, u32)>,
}

impl Adjacency {
    fn build(num_vertices: usize, edges: &[Edge]) -> Self {
        assert!(edges.len() < u32::MAX as usize, "edge count exceeds adjacency index width");
        let mut offsets = vec![0usize; num_vertices + 1];
        for &(u, v) in edges {
            offsets[u as usize + 1] += 1;
            offsets[v as usize + 1] += 1;
        }
        for i in 0..num_vertices {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut entries = vec![(0, 0); 2 * edges.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            entries[cursor[u as usize]] = (v, e as u32);
            cursor[u as usize] += 1;
            entries[cursor[v as usize]] = (u, e as u32);
            cursor[v as usize] += 1;
        }
        Adjacency { offsets, entries }
    }

    #[inline]
    pub fn neighbors(&self, v: Vertex) -> &[(Vertex, u32)] {
        &self.entries[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }
}

/// Vertex set with partition labels and a canonical edge list.
#[derive(Debug)]
pub struct PartitionedGraph {
    partition_of: Vec<u32>,
    partition_sizes: Vec<usize>,
    edges: Vec<Edge>,
    adjacency: OnceLock<Adjacency>,
}

impl Clone for PartitionedGraph {
    fn clone(&self) -> Self {
        PartitionedGraph {
            partition_of: self.partition_of.clone(),
            partition_sizes: self.partition_sizes.clone(),
            edges: self.edges.clone(),
            adjacency: OnceLock::new(),
        }
    }
}

impl PartialEq for PartitionedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.partition_of == other.partition_of && self.edges == other.edges
    }
}

impl Eq for PartitionedGraph {}

impl PartitionedGraph {
    /// Builds a graph from per-vertex partition labels and an edge list.
    ///
    /// Endpoints are reordered and the list sorted. Labels must cover
    /// `0..r` with no empty partition; self-loops and duplicates are errors.
    pub fn from_parts(partition_of: Vec<u32>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        let n = partition_of.len();
        if n >= u32::MAX as usize {
            return Err(GraphError::TooLarge(format!("{n} vertices")));
        }
        let r = partition_of.iter().map(|&p| p as usize + 1).max().unwrap_or(0);
        let mut partition_sizes = vec![0usize; r];
        for &p in &partition_of {
            partition_sizes[p as usize] += 1;
        }
        if let Some(p) = partition_sizes.iter().position(|&s| s == 0) {
            return Err(GraphError::EmptyPartition(p as u32));
        }
        for e in edges.iter_mut() {
            let (u, v) = *e;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let hi = u.max(v);
            if hi as usize >= n {
                return Err(GraphError::VertexOutOfRange { vertex: hi as u64, num_vertices: n });
            }
            *e = (u.min(v), hi);
        }
        if !edges.is_sorted() {
            edges.sort_unstable();
        }
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(PartitionedGraph { partition_of, partition_sizes, edges, adjacency: OnceLock::new() })
    }

    /// Graph with no partition structure (a single block).
    pub fn unpartitioned(num_vertices: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        Self::from_parts(vec![0; num_vertices], edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.partition_of.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_partitions(&self) -> usize {
        self.partition_sizes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn partition_labels(&self) -> &[u32] {
        &self.partition_of
    }

    #[inline]
    pub fn partition_of(&self, v: Vertex) -> u32 {
        self.partition_of[v as usize]
    }

    pub fn partition_sizes(&self) -> &[usize] {
        &self.partition_sizes
    }

    /// Neighbor lists, built on first use.
    pub fn adjacency(&self) -> &Adjacency {
        self.adjacency.get_or_init(|| Adjacency::build(self.num_vertices(), &self.edges))
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adjacency().degree(v)
    }

    /// Number of edges with exactly one endpoint in the set.
    pub fn cut_size(&self, in_set: &[bool]) -> usize {
        assert_eq!(in_set.len(), self.num_vertices(), "membership mask has wrong length");
        self.edges.iter().filter(|&&(u, v)| in_set[u as usize] != in_set[v as usize]).count()
    }
}

/// Membership mask of a vertex list.
pub fn subset_mask(num_vertices: usize, members: &[Vertex]) -> Vec<bool> {
    let mut mask = vec![false; num_vertices];
    for &v in members {
        mask[v as usize] = true;
    }
    mask
}

/// Samples G(n, [alpha_i], [p_ij]).
///
/// Blocks occupy contiguous id ranges in order. Pairs of each block pair
/// `(i, j)`, `i <= j`, are visited in lexicographic order with geometric
/// skips, so the cost is proportional to the number of edges drawn.
pub fn gen_partitioned<R: Rng + ?Sized>(spec: &GraphSpec, rng: &mut R) -> PartitionedGraph {
    let sizes = spec.partition_sizes();
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut partition_of = Vec::with_capacity(spec.n);
    for (i, &s) in sizes.iter().enumerate() {
        offsets.push(partition_of.len() as u64);
        partition_of.extend(std::iter::repeat_n(i as u32, s));
    }

    let mut edges = Vec::new();
    for i in 0..sizes.len() {
        for j in i..sizes.len() {
            let p = spec.probs[i][j];
            let (si, sj) = (sizes[i] as u64, sizes[j] as u64);
            if i == j {
                let (mut row, mut row_start, mut row_len) = (0u64, 0u64, si.saturating_sub(1));
                sample_pair_indices(si * si.saturating_sub(1) / 2, p, rng, |k| {
                    while k >= row_start + row_len {
                        row_start += row_len;
                        row += 1;
                        row_len = si - 1 - row;
                    }
                    let col = row + 1 + (k - row_start);
                    edges.push(((offsets[i] + row) as Vertex, (offsets[i] + col) as Vertex));
                });
            } else {
                sample_pair_indices(si * sj, p, rng, |k| {
                    edges.push(((offsets[i] + k / sj) as Vertex, (offsets[j] + k % sj) as Vertex));
                });
            }
        }
    }
    edges.sort_unstable();
    PartitionedGraph::from_parts(partition_of, edges).expect("generator emits a valid graph")
}

/// Calls `emit` with each index in `0..total` kept independently with probability `p`.
fn sample_pair_indices<R: Rng + ?Sized>(total: u64, p: f64, rng: &mut R, mut emit: impl FnMut(u64)) {
    if total == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let skips = Geometric::new(p).expect("p in (0, 1)");
    let mut k = 0u64;
    loop {
        k = match k.checked_add(skips.sample(rng)) {
            Some(k) if k < total => k,
            _ => break,
        };
        emit(k);
        k += 1;
    }
}

/// Complete bipartite graph K_{n,m}: left block `0..n`, right block `n..n+m`.
pub fn complete_bipartite(n: usize, m: usize) -> Result<PartitionedGraph, GraphError> {
    if n == 0 || m == 0 {
        return Err(GraphError::ZeroSize(n.min(m)));
    }
    let total = n
        .checked_mul(m)
        .filter(|&t| t < u32::MAX as usize)
        .ok_or_else(|| GraphError::TooLarge(format!("K({n},{m})")))?;
    let mut edges = Vec::with_capacity(total);
    for u in 0..n as Vertex {
        edges.extend((n as Vertex..(n + m) as Vertex).map(|v| (u, v)));
    }
    let mut partition_of = vec![0u32; n];
    partition_of.resize(n + m, 1);
    PartitionedGraph::from_parts(partition_of, edges)
}

/// Connected-component labels of `(0..num_vertices, edges)`; each vertex gets
/// the smallest vertex id of its component.
pub fn components(num_vertices: usize, edges: &[Edge]) -> Vec<u32> {
    let mut sets = DisjointSets::new(num_vertices);
    for &(u, v) in edges {
        sets.union(u, v);
    }
    let mut labels = Vec::new();
    sets.canonical_labels(&mut labels);
    labels
}
