//! Train/test splits for the node, link and pair tasks.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Labels};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Link,
    Pair,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Node => "node",
            Task::Link => "link",
            Task::Pair => "pair",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(Task::Node),
            "link" => Ok(Task::Link),
            "pair" => Ok(Task::Pair),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub task: Task,
    /// Node task: fraction of nodes; link/pair: fraction of positives.
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(task: Task, seed: u64) -> Self {
        let train_fraction = match task {
            Task::Node => 0.3,
            Task::Link | Task::Pair => 0.85,
        };
        Self {
            task,
            train_fraction,
            repeats: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("at least one repeat is required".into()));
        }
        Ok(())
    }
}

/// `round(n * fraction)` nodes for training, clamped so both sides are non-empty.
pub fn node_split(n: usize, train_fraction: f64, rng: &mut impl Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Infeasible(format!("cannot split {n} nodes")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let k = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let test = order.split_off(k);
    Ok((order, test))
}

/// Number of held-out items for a `train_fraction` split of `total`.
pub fn test_count(total: usize, train_fraction: f64) -> usize {
    ((total as f64 * (1.0 - train_fraction)) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSplit {
    pub train_graph: Graph,
    pub train_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// Draw `count` distinct non-edges `(u < v)` avoiding `exclude`.
fn sample_non_edges(
    g: &Graph,
    count: usize,
    exclude: &HashSet<(usize, usize)>,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    let n = g.num_nodes();
    let total = n * n.saturating_sub(1) / 2;
    let available = total.saturating_sub(g.num_edges()).saturating_sub(exclude.len());
    if count > available {
        return Err(Error::Infeasible(format!(
            "need {count} non-edges, only {available} available"
        )));
    }
    if available >= 2 * count {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v || g.has_edge(u, v) {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if !exclude.contains(&key) && seen.insert(key) {
                out.push(key);
            }
        }
        Ok(out)
    } else {
        // dense graph: enumerate and shuffle
        let mut pool: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v) && !exclude.contains(&(u, v)))
            .collect();
        pool.shuffle(rng);
        pool.truncate(count);
        Ok(pool)
    }
}

/// Hold out `ceil(E (1 - train_fraction))` edges as test positives, with as
/// many non-edges as test negatives; the rest of the edges are train
/// positives, matched by disjoint train negatives.
pub fn link_split(g: &Graph, train_fraction: f64, rng: &mut impl Rng) -> Result<LinkSplit> {
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    let n_test = test_count(edges.len(), train_fraction);
    if n_test == 0 || n_test >= edges.len() {
        return Err(Error::Infeasible(format!(
            "{} edges cannot be split into non-empty train and test sets",
            edges.len()
        )));
    }
    edges.shuffle(rng);
    let train_pos = edges.split_off(n_test);
    let test_pos = edges;
    let test_neg = sample_non_edges(g, n_test, &HashSet::new(), rng)?;
    let exclude: HashSet<(usize, usize)> = test_neg.iter().copied().collect();
    let train_neg = sample_non_edges(g, train_pos.len(), &exclude, rng)?;
    let (train_graph, _) = Graph::from_edges(g.num_nodes(), &train_pos)?;
    Ok(LinkSplit {
        train_graph,
        train_pos,
        train_neg,
        test_pos,
        test_neg,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

fn sample_pairs(
    labels: &Labels,
    count: usize,
    same: bool,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let n = labels.len();
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || (labels.get(u) == labels.get(v)) != same {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            out.push(key);
        }
    }
    out
}

/// `count` same-class positives and `count` different-class negatives,
/// each split `train_fraction` / rest.
pub fn pair_split(labels: &Labels, count: usize, train_fraction: f64, rng: &mut impl Rng) -> Result<PairSplit> {
    let sizes = labels.class_sizes();
    let n = labels.len();
    let same_pairs: usize = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let diff_pairs = n * n.saturating_sub(1) / 2 - same_pairs;
    if count == 0 {
        return Err(Error::Infeasible("pair task needs at least one pair".into()));
    }
    if diff_pairs == 0 {
        return Err(Error::Infeasible("pair task needs at least two classes".into()));
    }
    // rejection sampling stays fast while the pools are at most half used
    if 2 * count > same_pairs || 2 * count > diff_pairs {
        return Err(Error::Infeasible(format!(
            "{count} pairs per side exceed half of the available pools ({same_pairs} same, {diff_pairs} different)"
        )));
    }
    let mut pos = sample_pairs(labels, count, true, rng);
    let mut neg = sample_pairs(labels, count, false, rng);
    let k = test_count(count, train_fraction);
    if k == 0 || k >= count {
        return Err(Error::Infeasible(format!("{count} pairs cannot be split")));
    }
    let train_pos = pos.split_off(k);
    let train_neg = neg.split_off(k);
    Ok(PairSplit {
        train_pos,
        train_neg,
        test_pos: pos,
        test_neg: neg,
    })
}

/// Elementwise squared difference.
pub fn pair_embed_l2(e_u: &[f64], e_v: &[f64]) -> Result<Vec<f64>> {
    if e_u.len() != e_v.len() {
        return Err(Error::shape(
            "pair_embed_l2",
            format!("{} vs {} dimensions", e_u.len(), e_v.len()),
        ));
    }
    Ok(e_u.iter().zip(e_v).map(|(a, b)| (a - b) * (a - b)).collect())
}

/// Pair features for a list of pairs, one row each.
pub fn pair_features(h: &Matrix, pairs: &[(usize, usize)]) -> Result<Matrix> {
    let mut out = Matrix::zeros(pairs.len(), h.cols());
    for (r, &(u, v)) in pairs.iter().enumerate() {
        out.row_mut(r).copy_from_slice(&pair_embed_l2(h.row(u), h.row(v))?);
    }
    Ok(out)
}
