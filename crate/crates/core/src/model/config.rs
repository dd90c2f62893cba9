use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{Aggr, WalkConfig};
use crate::error::{Error, Result};

/// How the ego and agg embeddings are merged into `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MergeFn {
    #[default]
    Concat,
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EgoEncoderKind {
    /// Two dense layers with a concat skip.
    #[default]
    Linear,
    /// Same layout as the agg encoder (ablation).
    Gcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AdjLossMode {
    /// `full` up to `full_adj_max_nodes` nodes, `sampled` above.
    #[default]
    Auto,
    Full,
    Sampled,
}

macro_rules! str_enum {
    ($t:ty, $what:literal, $($s:literal => $v:expr),+) => {
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    other => Err(Error::Config(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $v { return f.write_str($s); })+
                unreachable!()
            }
        }
    };
}

str_enum!(MergeFn, "merge function", "concat" => MergeFn::Concat, "sum" => MergeFn::Sum, "mean" => MergeFn::Mean);
str_enum!(EgoEncoderKind, "ego encoder", "linear" => EgoEncoderKind::Linear, "gcn" => EgoEncoderKind::Gcn);
str_enum!(AdjLossMode, "adjacency loss mode", "auto" => AdjLossMode::Auto, "full" => AdjLossMode::Full, "sampled" => AdjLossMode::Sampled);

/// Which pretext tasks are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TaskMask {
    pub ego: bool,
    pub agg: bool,
    pub adj: bool,
}

impl TaskMask {
    pub const ALL: TaskMask = TaskMask {
        ego: true,
        agg: true,
        adj: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.ego || self.agg || self.adj)
    }
}

impl Default for TaskMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl TryFrom<Vec<String>> for TaskMask {
    type Error = Error;
    fn try_from(items: Vec<String>) -> Result<Self> {
        let mut m = TaskMask {
            ego: false,
            agg: false,
            adj: false,
        };
        for t in items {
            match t.trim() {
                "ego" => m.ego = true,
                "agg" => m.agg = true,
                "adj" => m.adj = true,
                other => return Err(Error::Config(format!("unknown task '{other}'"))),
            }
        }
        Ok(m)
    }
}

impl From<TaskMask> for Vec<String> {
    fn from(m: TaskMask) -> Self {
        [("ego", m.ego), ("agg", m.agg), ("adj", m.adj)]
            .into_iter()
            .filter(|(_, on)| *on)
            .map(|(s, _)| s.to_string())
            .collect()
    }
}

impl FromStr for TaskMask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TaskMask::try_from(
            s.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>(),
        )
    }
}

impl fmt::Display for TaskMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Vec::<String>::from(*self).join(","))
    }
}

/// Every knob of a training run. Missing JSON keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvgeConfig {
    pub dim_ego: usize,
    pub dim_agg: usize,
    pub hidden_dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub walk_lengths: Vec<usize>,
    pub aggr: Aggr,
    pub merge: MergeFn,
    pub task_mask: TaskMask,
    pub ego_encoder: EgoEncoderKind,
    pub gcn_bias: bool,
    pub adj_loss_mode: AdjLossMode,
    /// Negatives drawn per positive pair in sampled adjacency mode.
    pub sample_ratio: f64,
    pub full_adj_max_nodes: usize,
}

impl Default for MvgeConfig {
    fn default() -> Self {
        Self {
            dim_ego: 64,
            dim_agg: 64,
            hidden_dim: 128,
            alpha: 0.5,
            beta: 0.8,
            epochs: 200,
            lr: 0.01,
            seed: 0,
            walk_lengths: vec![3, 5, 10],
            aggr: Aggr::Concat,
            merge: MergeFn::Concat,
            task_mask: TaskMask::ALL,
            ego_encoder: EgoEncoderKind::Linear,
            gcn_bias: false,
            adj_loss_mode: AdjLossMode::Auto,
            sample_ratio: 1.0,
            full_adj_max_nodes: 5000,
        }
    }
}

impl MvgeConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit(self.alpha, "alpha")?;
        unit(self.beta, "beta")?;
        if self.dim_ego == 0 || self.dim_agg == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("embedding and hidden dimensions must be positive".into()));
        }
        if matches!(self.merge, MergeFn::Sum | MergeFn::Mean) && self.dim_ego != self.dim_agg {
            return Err(Error::Config(format!(
                "{} merge needs dim_ego == dim_agg ({} vs {})",
                self.merge, self.dim_ego, self.dim_agg
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(self.sample_ratio > 0.0 && self.sample_ratio.is_finite()) {
            return Err(Error::Config("sample_ratio must be positive".into()));
        }
        if self.task_mask.is_empty() {
            return Err(Error::Config("task mask selects no task".into()));
        }
        self.walk_config().validate()
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            lengths: self.walk_lengths.clone(),
            aggr: self.aggr,
            seed: self.seed,
        }
    }

    /// Width of the merged embedding `H`.
    pub fn embedding_dim(&self) -> usize {
        match self.merge {
            MergeFn::Concat => self.dim_ego + self.dim_agg,
            MergeFn::Sum | MergeFn::Mean => self.dim_ego,
        }
    }

    /// Whether the full `N x N` adjacency loss is used for a graph of `n` nodes.
    pub fn uses_full_adjacency(&self, n: usize) -> bool {
        match self.adj_loss_mode {
            AdjLossMode::Full => true,
            AdjLossMode::Sampled => false,
            AdjLossMode::Auto => n <= self.full_adj_max_nodes,
        }
    }
}
