//! Edge homophily: the global intra-class edge ratio and its per-node
//! counterpart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Labels};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub global: f64,
    /// Per-node ratio; `None` for isolated nodes.
    pub local: Vec<Option<f64>>,
    pub histogram: Vec<usize>,
}

impl HomophilyReport {
    pub fn num_undefined_local(&self) -> usize {
        self.local.iter().filter(|l| l.is_none()).count()
    }
}

fn check_labels(g: &Graph, y: &Labels) -> Result<()> {
    if y.len() != g.num_nodes() {
        return Err(Error::Validation(format!(
            "{} labels for {} nodes",
            y.len(),
            g.num_nodes()
        )));
    }
    Ok(())
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn global_homophily(g: &Graph, y: &Labels) -> Result<f64> {
    check_labels(g, y)?;
    if g.num_edges() == 0 {
        return Err(Error::Validation("global homophily needs at least one edge".into()));
    }
    let same = g.edges().filter(|&(u, v)| y.get(u) == y.get(v)).count();
    Ok(same as f64 / g.num_edges() as f64)
}

/// Fraction of each node's neighbors that share its label.
pub fn local_homophily(g: &Graph, y: &Labels) -> Result<Vec<Option<f64>>> {
    check_labels(g, y)?;
    Ok((0..g.num_nodes())
        .map(|v| {
            let nb = g.neighbors(v);
            if nb.is_empty() {
                return None;
            }
            let same = nb.iter().filter(|&&u| y.get(u) == y.get(v)).count();
            Some(same as f64 / nb.len() as f64)
        })
        .collect())
}

/// Equal-width bins over `[0, 1]`; bin `i` is `[i/b, (i+1)/b)` except the
/// last, which is closed on the right. Undefined values are skipped.
pub fn homophily_histogram(local: &[Option<f64>], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let mut counts = vec![0; bins];
    for &h in local.iter().flatten() {
        let idx = ((h * bins as f64).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

pub fn homophily_report(g: &Graph, y: &Labels, bins: usize) -> Result<HomophilyReport> {
    let global = global_homophily(g, y)?;
    let local = local_homophily(g, y)?;
    let histogram = homophily_histogram(&local, bins)?;
    Ok(HomophilyReport {
        global,
        local,
        histogram,
    })
}
