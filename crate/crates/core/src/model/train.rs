use std::fmt::Write as _;

use super::config::MvgeConfig;
use super::loss::{AdjacencyMode, PairSample};
use super::network::{EmbeddingSet, LossParts, MvgeModel, Objective};
use crate::augment::{build_views, ViewPair};
use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};
use crate::numerics::{column_std, AdamConfig, AdamState, Matrix, ParamTensor};
use crate::rng;

/// Losses recorded before each parameter update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<LossParts>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// `epoch,l_ego,l_agg,l_s,l_total` with 1-based epochs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,l_ego,l_agg,l_s,l_total\n");
        for (i, l) in self.epochs.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", i + 1, l.l_ego, l.l_agg, l.l_s, l.l_total);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: MvgeModel,
    pub embeddings: EmbeddingSet,
    pub trace: TrainTrace,
}

/// Build both views from `ds` and train.
pub fn train(ds: &Dataset, cfg: &MvgeConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let views = build_views(&ds.graph, &ds.features, &cfg.walk_config())?;
    train_on_views(&ds.graph, &views, cfg)
}

/// Full-batch Adam on precomputed views.
pub fn train_on_views(g: &Graph, views: &ViewPair, cfg: &MvgeConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut model = MvgeModel::new(cfg, views.x_ego.cols(), views.x_agg.cols())?;
    let objective = Objective::new(g, views, cfg)?;
    let full = cfg.uses_full_adjacency(g.num_nodes());
    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut trace = TrainTrace::default();

    for epoch in 0..cfg.epochs {
        let sample = (!full && cfg.task_mask.adj)
            .then(|| PairSample::draw(g, cfg.sample_ratio, &mut rng::stream(cfg.seed, "adj-neg", epoch as u64)));
        let mode = sample.as_ref().map_or(AdjacencyMode::Full, AdjacencyMode::Sampled);
        let ev = {
            let values: Vec<&Matrix> = model.params().iter().map(|t| &t.value).collect();
            objective.evaluate(&model, &values, mode, true)?
        };
        if !ev.losses.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: epoch + 1,
                detail: format!("{:?}", ev.losses),
            });
        }
        trace.epochs.push(ev.losses);
        let grads = ev.grads.expect("gradients requested");
        let params = model.params_mut();
        for (t, gr) in params.iter_mut().zip(&grads) {
            t.accumulate(gr)?;
        }
        let mut refs: Vec<&mut ParamTensor> = params.iter_mut().collect();
        adam.step(&mut refs)?;
    }

    let embeddings = model.embed(views, objective.propagation())?;
    if !embeddings.is_finite() {
        return Err(Error::NonFinite("final embeddings contain non-finite values".into()));
    }
    Ok(TrainOutput {
        model,
        embeddings,
        trace,
    })
}

/// Population standard deviation of every embedding dimension.
pub fn embedding_dim_std(h: &Matrix) -> Result<Vec<f64>> {
    if h.rows() < 2 {
        return Err(Error::Validation(format!(
            "per-dimension spread needs at least 2 rows, got {}",
            h.rows()
        )));
    }
    Ok(column_std(h))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
