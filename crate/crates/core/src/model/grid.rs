//! Exhaustive search over the loss weights `(alpha, beta)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::MvgeConfig;
use super::network::EmbeddingView;
use super::train::train_on_views;
use crate::augment::build_views;
use crate::error::{Error, Result};
use crate::eval::{micro_f1, node_split, train_logreg_ovr, LogRegHyper};
use crate::graph::Dataset;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub alpha: f64,
    pub beta: f64,
    pub best_score: f64,
    /// Row-major over alpha, then beta.
    pub table: Vec<GridPoint>,
}

impl GridSearchResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta,val_micro_f1\n");
        for p in &self.table {
            let _ = writeln!(out, "{},{},{}", p.alpha, p.beta, p.score);
        }
        out
    }
}

/// Grid values `0, step, 2 step, ..., 1`; `1 / step` must be a whole number.
pub fn grid_values(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step {step} outside (0, 1]")));
    }
    let k = (1.0 / step).round();
    if ((1.0 / step) - k).abs() > 1e-9 {
        return Err(Error::Config(format!("grid step {step} does not divide 1")));
    }
    let k = k as usize;
    Ok((0..=k).map(|i| i as f64 / k as f64).collect())
}

/// Train one model per grid point and score validation Micro-F1. The split
/// puts 30% of the nodes in training and `val_fraction` of them in
/// validation; the remaining nodes are never read. Ties go to the lowest
/// alpha, then the lowest beta.
pub fn grid_search_alpha_beta(
    ds: &Dataset,
    cfg: &MvgeConfig,
    grid_step: f64,
    val_fraction: f64,
    view: EmbeddingView,
) -> Result<GridSearchResult> {
    let labels = ds.labels()?;
    cfg.validate()?;
    let values = grid_values(grid_step)?;
    if !(val_fraction > 0.0 && val_fraction <= 0.7) {
        return Err(Error::Config(format!("validation fraction {val_fraction} outside (0, 0.7]")));
    }
    let n = ds.num_nodes();
    let (train_idx, rest) = node_split(n, 0.3, &mut rng::stream(cfg.seed, "grid-split", 0))?;
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, rest.len());
    let val_idx = &rest[..n_val];
    let y = labels.values();
    let truth: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();

    let views = build_views(&ds.graph, &ds.features, &cfg.walk_config())?;
    let mut table = Vec::with_capacity(values.len() * values.len());
    for (i, &alpha) in values.iter().enumerate() {
        for (j, &beta) in values.iter().enumerate() {
            let point_cfg = MvgeConfig {
                alpha,
                beta,
                seed: rng::derive_seed(cfg.seed, "grid-point", (i * values.len() + j) as u64),
                ..cfg.clone()
            };
            let out = train_on_views(&ds.graph, &views, &point_cfg)?;
            let h = out.embeddings.view(view);
            let model = train_logreg_ovr(h, y, &train_idx, LogRegHyper::default())?;
            let pred = model.predict(&h.select_rows(val_idx))?;
            table.push(GridPoint {
                alpha,
                beta,
                score: micro_f1(&pred, &truth)?,
            });
        }
    }
    let best = table
        .iter()
        .fold(table[0], |b, p| if p.score > b.score { *p } else { b });
    Ok(GridSearchResult {
        alpha: best.alpha,
        beta: best.beta,
        best_score: best.score,
        table,
    })
}
