//! Downstream protocols: node classification (Micro-F1), link prediction
//! and same-class pair prediction (ROC-AUC).

pub mod logreg;
pub mod metrics;
pub mod split;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use logreg::{train_logreg_ovr, LogRegHyper, LogRegModel};
pub use metrics::{accuracy, mean_std, micro_f1, roc_auc};
pub use split::{
    link_split, node_split, pair_embed_l2, pair_features, pair_split, test_count, LinkSplit,
    PairSplit, SplitSpec, Task,
};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Labels};
use crate::model::{train, EmbeddingView, MvgeConfig};
use crate::numerics::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub metric: String,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over repeats.
    pub std: f64,
}

impl EvalReport {
    pub fn new(task: Task, metric: &str, scores: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&scores);
        Self {
            task,
            metric: metric.to_string(),
            scores,
            mean,
            std,
        }
    }

    /// `repeat,score`
    pub fn to_csv(&self) -> String {
        let mut out = format!("repeat,{}\n", self.metric);
        for (i, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{i},{s}");
        }
        out
    }
}

/// What each repeat held out, so test items can be audited against training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub repeat: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_pos: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_neg: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub splits: Vec<SplitManifest>,
}

fn check_spec(spec: &SplitSpec, task: Task) -> Result<()> {
    spec.validate()?;
    if spec.task != task {
        return Err(Error::Config(format!("split spec is for the {} task, not {task}", spec.task)));
    }
    Ok(())
}

/// Repeated uniform train/test splits of the nodes; logistic regression on
/// `h`, Micro-F1 on the test nodes.
pub fn node_classification_eval(h: &Matrix, labels: &Labels, spec: &SplitSpec) -> Result<EvalOutcome> {
    check_spec(spec, Task::Node)?;
    if labels.len() != h.rows() {
        return Err(Error::shape(
            "node_classification_eval",
            format!("{} labels for {} embedding rows", labels.len(), h.rows()),
        ));
    }
    if labels.num_present_classes() < 2 {
        return Err(Error::Validation("node classification needs at least two classes".into()));
    }
    let y = labels.values();
    let mut scores = Vec::with_capacity(spec.repeats);
    let mut splits = Vec::with_capacity(spec.repeats);
    for r in 0..spec.repeats {
        let seed = rng::derive_seed(spec.seed, "node-split", r as u64);
        let (train_idx, test_idx) = node_split(h.rows(), spec.train_fraction, &mut rng::stream(seed, "split", 0))?;
        let model = train_logreg_ovr(h, y, &train_idx, LogRegHyper::default())?;
        let pred = model.predict(&h.select_rows(&test_idx))?;
        let truth: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();
        scores.push(micro_f1(&pred, &truth)?);
        splits.push(SplitManifest {
            repeat: r,
            seed,
            train_nodes: train_idx,
            test_nodes: test_idx,
            test_pos: Vec::new(),
            test_neg: Vec::new(),
        });
    }
    Ok(EvalOutcome {
        report: EvalReport::new(Task::Node, "micro_f1", scores),
        splits,
    })
}

/// Fit on L2 pair features of the training pairs, AUC on the test pairs.
fn pair_auc(
    h: &Matrix,
    train_pos: &[(usize, usize)],
    train_neg: &[(usize, usize)],
    test_pos: &[(usize, usize)],
    test_neg: &[(usize, usize)],
) -> Result<f64> {
    let train_pairs: Vec<_> = train_pos.iter().chain(train_neg).copied().collect();
    let y: Vec<usize> = (0..train_pairs.len()).map(|i| usize::from(i < train_pos.len())).collect();
    let x = pair_features(h, &train_pairs)?;
    let idx: Vec<usize> = (0..train_pairs.len()).collect();
    let model = train_logreg_ovr(&x, &y, &idx, LogRegHyper::default())?;
    let test_pairs: Vec<_> = test_pos.iter().chain(test_neg).copied().collect();
    let truth: Vec<bool> = (0..test_pairs.len()).map(|i| i < test_pos.len()).collect();
    let scores = model.positive_probability(&pair_features(h, &test_pairs)?)?;
    roc_auc(&scores, &truth)
}

/// Per repeat: hold out edges, retrain the embedding on the remaining graph,
/// then score held-out edges against sampled non-edges.
pub fn link_prediction_eval(
    ds: &Dataset,
    cfg: &MvgeConfig,
    spec: &SplitSpec,
    view: EmbeddingView,
) -> Result<EvalOutcome> {
    check_spec(spec, Task::Link)?;
    let mut scores = Vec::with_capacity(spec.repeats);
    let mut splits = Vec::with_capacity(spec.repeats);
    for r in 0..spec.repeats {
        let seed = rng::derive_seed(spec.seed, "link-split", r as u64);
        let split = link_split(&ds.graph, spec.train_fraction, &mut rng::stream(seed, "split", 0))?;
        let train_ds = ds.with_graph(split.train_graph.clone())?;
        let run_cfg = MvgeConfig {
            seed: rng::derive_seed(cfg.seed, "link-repeat", r as u64),
            ..cfg.clone()
        };
        let out = train(&train_ds, &run_cfg)?;
        let h = out.embeddings.view(view);
        scores.push(pair_auc(h, &split.train_pos, &split.train_neg, &split.test_pos, &split.test_neg)?);
        splits.push(SplitManifest {
            repeat: r,
            seed,
            train_nodes: Vec::new(),
            test_nodes: Vec::new(),
            test_pos: split.test_pos,
            test_neg: split.test_neg,
        });
    }
    Ok(EvalOutcome {
        report: EvalReport::new(Task::Link, "roc_auc", scores),
        splits,
    })
}

/// Same-class pair prediction on fixed embeddings; `num_pairs` positives and
/// as many negatives per repeat.
pub fn pairwise_eval(h: &Matrix, labels: &Labels, num_pairs: usize, spec: &SplitSpec) -> Result<EvalOutcome> {
    check_spec(spec, Task::Pair)?;
    if labels.len() != h.rows() {
        return Err(Error::shape(
            "pairwise_eval",
            format!("{} labels for {} embedding rows", labels.len(), h.rows()),
        ));
    }
    let mut scores = Vec::with_capacity(spec.repeats);
    let mut splits = Vec::with_capacity(spec.repeats);
    for r in 0..spec.repeats {
        let seed = rng::derive_seed(spec.seed, "pair-split", r as u64);
        let s = pair_split(labels, num_pairs, spec.train_fraction, &mut rng::stream(seed, "split", 0))?;
        scores.push(pair_auc(h, &s.train_pos, &s.train_neg, &s.test_pos, &s.test_neg)?);
        splits.push(SplitManifest {
            repeat: r,
            seed,
            train_nodes: Vec::new(),
            test_nodes: Vec::new(),
            test_pos: s.test_pos,
            test_neg: s.test_neg,
        });
    }
    Ok(EvalOutcome {
        report: EvalReport::new(Task::Pair, "roc_auc", scores),
        splits,
    })
}

/// One-hot encoding of labels, handy as an oracle embedding.
pub fn one_hot(labels: &Labels) -> Matrix {
    Matrix::from_fn(labels.len(), labels.num_classes(), |r, c| f64::from(u8::from(labels.get(r) == c)))
}
