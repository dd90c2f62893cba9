//! Undirected graphs in CSR form, node labels, datasets and the GCN
//! propagation operator.

mod io;

pub use io::{
    embedding_bin_bytes, embedding_csv_string, load_dataset, parse_embedding_bin, read_embedding_bin,
    read_embedding_csv, read_meta, save_dataset, write_atomic, write_embedding_bin,
    write_embedding_csv, DatasetMeta, IngestReport, EDGES_FILE, EMBEDDING_MAGIC, EMBEDDING_VERSION,
    FEATURES_FILE, LABELS_FILE, META_FILE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Dense node feature matrix, one row per node.
pub type FeatureMatrix = Matrix;

/// Undirected, unweighted graph. Each undirected edge is stored in both
/// directions; neighbor lists are sorted and free of duplicates and self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

/// What canonicalisation had to fix while building a graph from raw edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRepairs {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl Graph {
    /// Graph with `num_nodes` nodes and no edges.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
        }
    }

    /// Canonicalise an undirected edge list: self-loops are dropped, `(u, v)`
    /// and `(v, u)` collapse into one edge, repeated edges are merged.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<(Self, EdgeRepairs)> {
        let mut repairs = EdgeRepairs::default();
        let mut canon = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                repairs.self_loops_dropped += 1;
                continue;
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        repairs.duplicates_dropped = before - canon.len();

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &canon {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0usize; 2 * canon.len()];
        for &(u, v) in &canon {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for v in 0..num_nodes {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Ok((Self { offsets, neighbors }, repairs))
    }

    /// Wrap raw CSR arrays after checking every structural invariant.
    pub fn from_csr(offsets: Vec<usize>, neighbors: Vec<usize>) -> Result<Self> {
        let g = Self { offsets, neighbors };
        g.validate()?;
        Ok(g)
    }

    /// Check offsets, ordering, self-loops, duplicates and symmetry.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.offsets.first() != Some(&0) {
            return Err(Error::Validation("offsets must start at 0".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation("offsets must be non-decreasing".into()));
        }
        if self.offsets[n] != self.neighbors.len() {
            return Err(Error::Validation(format!(
                "offsets end at {} but there are {} neighbor entries",
                self.offsets[n],
                self.neighbors.len()
            )));
        }
        let mut directed = Vec::with_capacity(self.neighbors.len());
        for u in 0..n {
            let nb = self.neighbors(u);
            for (i, &v) in nb.iter().enumerate() {
                if v >= n {
                    return Err(Error::Validation(format!("neighbor {v} of {u} out of range")));
                }
                if v == u {
                    return Err(Error::Validation(format!("self-loop at {u}")));
                }
                if i > 0 && nb[i - 1] >= v {
                    return Err(Error::Validation(format!(
                        "neighbor list of {u} is unsorted or has duplicates"
                    )));
                }
                directed.push((u, v));
            }
        }
        let mut reversed: Vec<(usize, usize)> = directed.iter().map(|&(u, v)| (v, u)).collect();
        reversed.sort_unstable();
        if reversed != directed {
            return Err(Error::Validation("adjacency is not symmetric".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Number of stored directed entries (twice the undirected edge count).
    #[inline]
    pub fn num_directed_entries(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|v| self.degree(v)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[usize] {
        &self.neighbors
    }

    /// Undirected edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Relabel nodes so that old node `perm[i]` becomes new node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        if perm.len() != n || inverse.contains(&usize::MAX) {
            return Err(Error::Validation("not a permutation of the node set".into()));
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (inverse[u], inverse[v])).collect();
        Ok(Self::from_edges(n, &edges)?.0)
    }
}

/// Integer class labels `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    values: Vec<usize>,
    num_classes: usize,
}

impl Labels {
    pub fn new(values: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some((i, &y)) = values.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::Validation(format!(
                "label {y} of node {i} out of range 0..{num_classes}"
            )));
        }
        Ok(Self { values, num_classes })
    }

    /// Infer the class count as `max + 1`.
    pub fn from_values(values: Vec<usize>) -> Self {
        let num_classes = values.iter().max().map_or(0, |m| m + 1);
        Self { values, num_classes }
    }

    #[inline]
    pub fn values(&self) -> &[usize] {
        &self.values
    }

    #[inline]
    pub fn get(&self, v: usize) -> usize {
        self.values[v]
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of classes that actually occur.
    pub fn num_present_classes(&self) -> usize {
        let mut seen = vec![false; self.num_classes];
        self.values.iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&s| s).count()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes];
        self.values.iter().for_each(|&y| sizes[y] += 1);
        sizes
    }
}

/// A graph with node features and optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Option<Labels>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: Option<Labels>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            graph,
            features,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows but the graph has {n} nodes",
                self.features.rows()
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::Validation("feature matrix contains non-finite values".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {n} nodes",
                    labels.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Result<&Labels> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("dataset '{}' has no labels", self.name)))
    }

    /// Same dataset on a different topology over the same node set.
    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        Self::new(self.name.clone(), graph, self.features.clone(), self.labels.clone())
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` stored as CSR triples. Row entries are sorted
/// by column and every row carries its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> Self {
        let n = g.num_nodes();
        let deg: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
        let w = |v: usize, u: usize| 1.0 / (deg[v] * deg[u]).sqrt();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(g.num_directed_entries() + n);
        let mut weights = Vec::with_capacity(g.num_directed_entries() + n);
        offsets.push(0);
        for v in 0..n {
            let mut diag_done = false;
            for &u in g.neighbors(v) {
                if !diag_done && u > v {
                    cols.push(v);
                    weights.push(w(v, v));
                    diag_done = true;
                }
                cols.push(u);
                weights.push(w(v, u));
            }
            if !diag_done {
                cols.push(v);
                weights.push(w(v, v));
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            weights,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// `(column, weight)` pairs of row `v`.
    pub fn row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// All `(row, col, weight)` triples in row-major order.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        (0..self.num_nodes())
            .flat_map(|v| self.row(v).map(move |(u, w)| (v, u, w)))
            .collect()
    }

    pub fn weight(&self, v: usize, u: usize) -> f64 {
        let r = self.offsets[v]..self.offsets[v + 1];
        match self.cols[r.clone()].binary_search(&u) {
            Ok(i) => self.weights[r.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|v| self.row(v).map(|(_, w)| w).sum())
            .collect()
    }
}

/// Build the symmetric-normalised GCN operator with self-loops.
pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    NormalizedAdjacency::new(g)
}
