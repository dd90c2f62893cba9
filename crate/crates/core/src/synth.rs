//! Synthetic labeled graphs with a target edge homophily.
//!
//! Classes are balanced. Each edge is drawn intra-class with probability `h`
//! and between two distinct classes otherwise; duplicates and self-loops are
//! rejected until the edge budget is met. Features are Gaussian around a
//! per-class mean `s * e_(c mod F)`.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, Labels};
use crate::numerics::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub target_homophily: f64,
    pub avg_degree: f64,
    pub feature_dim: usize,
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_nodes: 1490,
            num_classes: 5,
            target_homophily: 0.5,
            avg_degree: 4.0,
            feature_dim: 64,
            class_separation: 1.75,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn num_edges(&self) -> usize {
        (self.avg_degree * self.num_nodes as f64 / 2.0).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        let c = self.num_classes;
        let h = self.target_homophily;
        if c == 0 || n < c {
            return Err(Error::Config(format!("need 1 <= num_classes <= num_nodes, got C={c}, N={n}")));
        }
        if !(0.0..=1.0).contains(&h) || h.is_nan() {
            return Err(Error::Config(format!("target homophily {h} outside [0, 1]")));
        }
        if c == 1 && h < 1.0 {
            return Err(Error::Config("a single class cannot produce inter-class edges".into()));
        }
        if !self.avg_degree.is_finite() || self.avg_degree < 0.0 {
            return Err(Error::Config(format!("invalid average degree {}", self.avg_degree)));
        }
        if self.num_edges() as f64 > (n as f64) * (n as f64 - 1.0) / 2.0 {
            return Err(Error::Infeasible(format!(
                "{} edges do not fit in a simple graph on {n} nodes",
                self.num_edges()
            )));
        }
        if self.feature_dim < c {
            return Err(Error::Config(format!(
                "feature_dim {} must be >= num_classes {c} so class means stay separated",
                self.feature_dim
            )));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 || !self.class_separation.is_finite() {
            return Err(Error::Config("noise_sigma must be >= 0 and separation finite".into()));
        }
        // capacity of the pair pools the sampler may need
        let sizes = balanced_sizes(n, c);
        let intra: f64 = sizes.iter().map(|&s| (s * s.saturating_sub(1)) as f64 / 2.0).sum();
        let total = n as f64 * (n as f64 - 1.0) / 2.0;
        let m = self.num_edges() as f64;
        if h > 0.0 && m * h > intra * 0.9 + 1.0 {
            return Err(Error::Infeasible("too few intra-class pairs for the requested edges".into()));
        }
        if h < 1.0 && m * (1.0 - h) > (total - intra) * 0.9 + 1.0 {
            return Err(Error::Infeasible("too few inter-class pairs for the requested edges".into()));
        }
        Ok(())
    }
}

fn balanced_sizes(n: usize, c: usize) -> Vec<usize> {
    (0..c).map(|k| n / c + usize::from(k < n % c)).collect()
}

/// Generate a dataset. Identical specs give identical datasets.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.num_nodes;
    let c = spec.num_classes;
    let mut r = rng::stream(spec.seed, "synth", 0);

    let mut labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    labels.shuffle(&mut r);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (v, &y) in labels.iter().enumerate() {
        members[y].push(v);
    }

    let m = spec.num_edges();
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(m * 2);
    let mut edges = Vec::with_capacity(m);
    let max_attempts = 1000 * m.max(1) + 1_000_000;
    let mut attempts = 0;
    while edges.len() < m {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Infeasible(format!(
                "edge sampler stalled after {} of {m} edges",
                edges.len()
            )));
        }
        let u = r.random_range(0..n);
        let cu = labels[u];
        let intra = r.random_bool(spec.target_homophily);
        let target_class = if intra {
            cu
        } else {
            let k = r.random_range(0..c - 1);
            if k >= cu {
                k + 1
            } else {
                k
            }
        };
        let pool = &members[target_class];
        let v = pool[r.random_range(0..pool.len())];
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    let (graph, _) = Graph::from_edges(n, &edges)?;

    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let mut fr = rng::stream(spec.seed, "synth-features", 0);
    let f = spec.feature_dim;
    let mut features = Matrix::zeros(n, f);
    for v in 0..n {
        let row = features.row_mut(v);
        for x in row.iter_mut() {
            *x = noise.sample(&mut fr);
        }
        row[labels[v] % f] += spec.class_separation;
    }

    let name = format!("synth-h{}-n{n}-c{c}-s{}", spec.target_homophily, spec.seed);
    Dataset::new(name, graph, features, Some(Labels::new(labels, c)?))
}

/// `meta.json` extras recording the generator settings.
pub fn spec_meta(spec: &SynthSpec) -> BTreeMap<String, serde_json::Value> {
    let mut extra = BTreeMap::new();
    extra.insert(
        "synth".to_string(),
        serde_json::to_value(spec).expect("spec serialises"),
    );
    extra
}
