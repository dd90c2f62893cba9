//! The two input views: raw ego features and random-walk aggregated features.
//!
//! For every node and every configured walk length one unbiased walk is
//! drawn; the features of the visited nodes (the root excluded) are averaged,
//! and the per-walk averages are combined by concatenation (ascending walk
//! length), mean or sum. Each node draws from its own stream keyed by
//! `(seed, node)`, so the result does not depend on processing order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::numerics::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggr {
    #[default]
    Concat,
    Mean,
    Sum,
}

impl FromStr for Aggr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Aggr::Concat),
            "mean" => Ok(Aggr::Mean),
            "sum" => Ok(Aggr::Sum),
            other => Err(Error::Config(format!("unknown aggregator '{other}'"))),
        }
    }
}

impl fmt::Display for Aggr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggr::Concat => "concat",
            Aggr::Mean => "mean",
            Aggr::Sum => "sum",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub lengths: Vec<usize>,
    pub aggr: Aggr,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            lengths: vec![3, 5, 10],
            aggr: Aggr::Concat,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::Config("at least one walk length is required".into()));
        }
        if self.lengths.contains(&0) {
            return Err(Error::Config("walk lengths must be >= 1".into()));
        }
        Ok(())
    }

    fn sorted_lengths(&self) -> Vec<usize> {
        let mut l = self.lengths.clone();
        l.sort_unstable();
        l
    }

    /// Width of the aggregated view for `num_features` input columns.
    pub fn output_dim(&self, num_features: usize) -> usize {
        match self.aggr {
            Aggr::Concat => num_features * self.lengths.len(),
            Aggr::Mean | Aggr::Sum => num_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub x_ego: FeatureMatrix,
    pub x_agg: FeatureMatrix,
}

/// `length` uniformly chosen steps from `start`, excluding `start` itself.
/// An isolated start yields an empty walk.
pub fn random_walk(g: &Graph, start: usize, length: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(length);
    let mut cur = start;
    for _ in 0..length {
        let nb = g.neighbors(cur);
        if nb.is_empty() {
            break;
        }
        cur = nb[rng.random_range(0..nb.len())];
        walk.push(cur);
    }
    walk
}

/// The walks drawn for `node`, in ascending length order.
pub fn node_walks(g: &Graph, node: usize, cfg: &WalkConfig) -> Vec<Vec<usize>> {
    let mut r = rng::stream(cfg.seed, "walk", node as u64);
    cfg.sorted_lengths()
        .into_iter()
        .map(|len| random_walk(g, node, len, &mut r))
        .collect()
}

/// Aggregate features along precomputed walks (`walks[v][i]` is node `v`'s
/// walk for the i-th length). Empty walks fall back to the node's own row.
pub fn aggregate_walks(x: &Matrix, walks: &[Vec<Vec<usize>>], aggr: Aggr) -> Result<Matrix> {
    if walks.len() != x.rows() {
        return Err(Error::shape(
            "walk_aggregate",
            format!("{} walk sets for {} nodes", walks.len(), x.rows()),
        ));
    }
    let f = x.cols();
    let k = walks.first().map_or(0, Vec::len);
    let width = match aggr {
        Aggr::Concat => f * k,
        Aggr::Mean | Aggr::Sum => f,
    };
    let mut out = Matrix::zeros(x.rows(), width);
    let mut avg = vec![0.0; f];
    for (v, per_len) in walks.iter().enumerate() {
        if per_len.len() != k {
            return Err(Error::shape("walk_aggregate", "ragged walk sets"));
        }
        let row = out.row_mut(v);
        for (i, walk) in per_len.iter().enumerate() {
            if walk.is_empty() {
                avg.copy_from_slice(x.row(v));
            } else {
                avg.fill(0.0);
                for &u in walk {
                    avg.iter_mut().zip(x.row(u)).for_each(|(a, b)| *a += b);
                }
                let inv = 1.0 / walk.len() as f64;
                avg.iter_mut().for_each(|a| *a *= inv);
            }
            match aggr {
                Aggr::Concat => row[i * f..(i + 1) * f].copy_from_slice(&avg),
                Aggr::Mean | Aggr::Sum => row.iter_mut().zip(&avg).for_each(|(o, a)| *o += a),
            }
        }
        if aggr == Aggr::Mean {
            row.iter_mut().for_each(|o| *o /= k as f64);
        }
    }
    Ok(out)
}

/// Walk-aggregated feature matrix.
pub fn walk_aggregate(g: &Graph, x: &FeatureMatrix, cfg: &WalkConfig) -> Result<Matrix> {
    cfg.validate()?;
    if g.num_nodes() != x.rows() {
        return Err(Error::shape(
            "walk_aggregate",
            format!("{} nodes, {} feature rows", g.num_nodes(), x.rows()),
        ));
    }
    let walks: Vec<_> = (0..g.num_nodes()).map(|v| node_walks(g, v, cfg)).collect();
    aggregate_walks(x, &walks, cfg.aggr)
}

pub fn build_views(g: &Graph, x: &FeatureMatrix, cfg: &WalkConfig) -> Result<ViewPair> {
    Ok(ViewPair {
        x_ego: x.clone(),
        x_agg: walk_aggregate(g, x, cfg)?,
    })
}
