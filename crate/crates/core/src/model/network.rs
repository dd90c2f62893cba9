//! Encoders, decoders and the combined objective with hand-written backward
//! passes. Parameters live in one flat list so the optimizer and the
//! gradient checker can treat them uniformly.

use std::borrow::Borrow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{EgoEncoderKind, MergeFn, MvgeConfig, TaskMask};
use super::loss::{adjacency_loss_and_grad, loss_weights, total_loss, AdjacencyMode, KlTarget};
use crate::augment::ViewPair;
use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::numerics::layers::{
    concat_cols, concat_cols_backward, matmul_backward, relu, relu_backward, spmm, spmm_backward,
};
use crate::numerics::{glorot_uniform, matmul, matmul_tn, Matrix, ParamTensor};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BranchKind {
    /// `h1 = relu(X W1 + b1)`, `out = [X, h1] Wout + bout`
    Mlp,
    /// `g1 = relu(S X W1)`, `g2 = relu(S g1 W2)`, `out = [X, g2] Wout + bout`
    Gcn,
}

/// Indices of one branch's parameters in the flat list.
#[derive(Debug, Clone)]
struct Branch {
    kind: BranchKind,
    w1: usize,
    b1: Option<usize>,
    w2: Option<usize>,
    b2: Option<usize>,
    w_out: usize,
    b_out: usize,
    dec_w: usize,
    dec_b: usize,
}

struct BranchCache {
    pre1: Matrix,
    act1: Matrix,
    pre2: Option<Matrix>,
    cat: Matrix,
    out: Matrix,
}

fn p<M: Borrow<Matrix>>(params: &[M], i: usize) -> &Matrix {
    params[i].borrow()
}

impl Branch {
    #[allow(clippy::too_many_arguments)]
    fn build(
        prefix: &'static [&'static str; 8],
        kind: BranchKind,
        gcn_bias: bool,
        input: usize,
        hidden: usize,
        out: usize,
        params: &mut Vec<ParamTensor>,
        r: &mut impl Rng,
    ) -> Self {
        let mut push = |name: &'static str, m: Matrix| {
            params.push(ParamTensor::new(name, m));
            params.len() - 1
        };
        let w1 = push(prefix[0], glorot_uniform(input, hidden, r));
        let (b1, w2, b2) = match kind {
            BranchKind::Mlp => (Some(push(prefix[1], Matrix::zeros(1, hidden))), None, None),
            BranchKind::Gcn => {
                let b1 = gcn_bias.then(|| push(prefix[1], Matrix::zeros(1, hidden)));
                let w2 = push(prefix[2], glorot_uniform(hidden, hidden, r));
                let b2 = gcn_bias.then(|| push(prefix[3], Matrix::zeros(1, hidden)));
                (b1, Some(w2), b2)
            }
        };
        let w_out = push(prefix[4], glorot_uniform(input + hidden, out, r));
        let b_out = push(prefix[5], Matrix::zeros(1, out));
        let dec_w = push(prefix[6], glorot_uniform(out, input, r));
        let dec_b = push(prefix[7], Matrix::zeros(1, input));
        Self {
            kind,
            w1,
            b1,
            w2,
            b2,
            w_out,
            b_out,
            dec_w,
            dec_b,
        }
    }

    fn encode<M: Borrow<Matrix>>(&self, params: &[M], x: &Matrix, s: &NormalizedAdjacency) -> Result<BranchCache> {
        let w1 = p(params, self.w1);
        if x.cols() != w1.rows() {
            return Err(Error::shape(
                "encode",
                format!("input has {} columns, encoder expects {}", x.cols(), w1.rows()),
            ));
        }
        let add_bias = |m: &mut Matrix, b: Option<usize>| -> Result<()> {
            if let Some(b) = b {
                m.add_row_broadcast(p(params, b))?;
            }
            Ok(())
        };
        let (pre1, act1, pre2, hidden) = match self.kind {
            BranchKind::Mlp => {
                let mut pre1 = matmul(x, w1)?;
                add_bias(&mut pre1, self.b1)?;
                let act1 = relu(&pre1);
                let hidden = act1.clone();
                (pre1, act1, None, hidden)
            }
            BranchKind::Gcn => {
                let mut pre1 = spmm(s, &matmul(x, w1)?)?;
                add_bias(&mut pre1, self.b1)?;
                let act1 = relu(&pre1);
                let w2 = p(params, self.w2.expect("gcn branch has w2"));
                let mut pre2 = spmm(s, &matmul(&act1, w2)?)?;
                add_bias(&mut pre2, self.b2)?;
                let hidden = relu(&pre2);
                (pre1, act1, Some(pre2), hidden)
            }
        };
        let cat = concat_cols(x, &hidden)?;
        let mut out = matmul(&cat, p(params, self.w_out))?;
        out.add_row_broadcast(p(params, self.b_out))?;
        Ok(BranchCache {
            pre1,
            act1,
            pre2,
            cat,
            out,
        })
    }

    /// Accumulate parameter gradients for `dL/d(out)`.
    fn encode_backward<M: Borrow<Matrix>>(
        &self,
        params: &[M],
        cache: &BranchCache,
        x: &Matrix,
        s: &NormalizedAdjacency,
        d_out: &Matrix,
        grads: &mut [Matrix],
    ) -> Result<()> {
        grads[self.b_out].add_assign(&d_out.col_sums())?;
        let (d_cat, d_wout) = matmul_backward(&cache.cat, p(params, self.w_out), d_out)?;
        grads[self.w_out].add_assign(&d_wout)?;
        let (_, d_hidden) = concat_cols_backward(&d_cat, x.cols());
        let d_pre1 = match self.kind {
            BranchKind::Mlp => relu_backward(&cache.pre1, &d_hidden),
            BranchKind::Gcn => {
                let pre2 = cache.pre2.as_ref().expect("gcn cache has pre2");
                let d_pre2 = relu_backward(pre2, &d_hidden);
                if let Some(b2) = self.b2 {
                    grads[b2].add_assign(&d_pre2.col_sums())?;
                }
                let w2 = self.w2.expect("gcn branch has w2");
                let d_prop = spmm_backward(s, &d_pre2)?;
                let (d_act1, d_w2) = matmul_backward(&cache.act1, p(params, w2), &d_prop)?;
                grads[w2].add_assign(&d_w2)?;
                relu_backward(&cache.pre1, &d_act1)
            }
        };
        if let Some(b1) = self.b1 {
            grads[b1].add_assign(&d_pre1.col_sums())?;
        }
        let d_lin = match self.kind {
            BranchKind::Mlp => d_pre1,
            BranchKind::Gcn => spmm_backward(s, &d_pre1)?,
        };
        grads[self.w1].add_assign(&matmul_tn(x, &d_lin)?)?;
        Ok(())
    }

    fn decode<M: Borrow<Matrix>>(&self, params: &[M], h: &Matrix) -> Result<Matrix> {
        let mut z = matmul(h, p(params, self.dec_w))?;
        z.add_row_broadcast(p(params, self.dec_b))?;
        Ok(z)
    }

    /// Accumulate decoder gradients and return `dL/dh`.
    fn decode_backward<M: Borrow<Matrix>>(
        &self,
        params: &[M],
        h: &Matrix,
        dz: &Matrix,
        grads: &mut [Matrix],
    ) -> Result<Matrix> {
        grads[self.dec_b].add_assign(&dz.col_sums())?;
        let (dh, dw) = matmul_backward(h, p(params, self.dec_w), dz)?;
        grads[self.dec_w].add_assign(&dw)?;
        Ok(dh)
    }
}

const EGO_NAMES: [&str; 8] = [
    "ego.w1", "ego.b1", "ego.w2", "ego.b2", "ego.w_out", "ego.b_out", "ego.dec_w", "ego.dec_b",
];
const AGG_NAMES: [&str; 8] = [
    "agg.w1", "agg.b1", "agg.w2", "agg.b2", "agg.w_out", "agg.b_out", "agg.dec_w", "agg.dec_b",
];

/// Ego and agg embeddings and their merge `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub h_ego: Matrix,
    pub h_agg: Matrix,
    pub h: Matrix,
}

impl EmbeddingSet {
    pub fn new(h_ego: Matrix, h_agg: Matrix, merge: MergeFn) -> Result<Self> {
        let h = merge_embeddings(&h_ego, &h_agg, merge)?;
        Ok(Self { h_ego, h_agg, h })
    }

    pub fn view(&self, which: EmbeddingView) -> &Matrix {
        match which {
            EmbeddingView::Merged => &self.h,
            EmbeddingView::Ego => &self.h_ego,
            EmbeddingView::Agg => &self.h_agg,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h_ego.is_finite() && self.h_agg.is_finite() && self.h.is_finite()
    }
}

/// Which embedding a downstream task reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingView {
    #[default]
    Merged,
    Ego,
    Agg,
}

impl std::str::FromStr for EmbeddingView {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merged" => Ok(Self::Merged),
            "ego" => Ok(Self::Ego),
            "agg" => Ok(Self::Agg),
            other => Err(Error::Config(format!("unknown embedding view '{other}'"))),
        }
    }
}

impl std::fmt::Display for EmbeddingView {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Merged => "merged",
            Self::Ego => "ego",
            Self::Agg => "agg",
        })
    }
}

pub fn merge_embeddings(h_ego: &Matrix, h_agg: &Matrix, merge: MergeFn) -> Result<Matrix> {
    match merge {
        MergeFn::Concat => concat_cols(h_ego, h_agg),
        MergeFn::Sum | MergeFn::Mean => {
            if h_ego.shape() != h_agg.shape() {
                return Err(Error::shape(
                    "merge_embeddings",
                    format!("{merge} needs equal shapes, got {:?} and {:?}", h_ego.shape(), h_agg.shape()),
                ));
            }
            let mut h = h_ego.clone();
            h.add_assign(h_agg)?;
            if merge == MergeFn::Mean {
                h.scale(0.5);
            }
            Ok(h)
        }
    }
}

fn merge_backward(dh: &Matrix, dim_ego: usize, merge: MergeFn) -> (Matrix, Matrix) {
    match merge {
        MergeFn::Concat => concat_cols_backward(dh, dim_ego),
        MergeFn::Sum => (dh.clone(), dh.clone()),
        MergeFn::Mean => {
            let half = dh.map(|v| 0.5 * v);
            (half.clone(), half)
        }
    }
}

/// Parameters of both branches and their decoders. The adjacency decoder
/// has no parameters.
#[derive(Debug, Clone)]
pub struct MvgeModel {
    ego: Branch,
    agg: Branch,
    merge: MergeFn,
    params: Vec<ParamTensor>,
}

impl MvgeModel {
    /// Glorot-uniform weights and zero biases drawn from the config seed.
    pub fn new(cfg: &MvgeConfig, ego_features: usize, agg_features: usize) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::stream(cfg.seed, "init", 0);
        let mut params = Vec::new();
        let ego_kind = match cfg.ego_encoder {
            EgoEncoderKind::Linear => BranchKind::Mlp,
            EgoEncoderKind::Gcn => BranchKind::Gcn,
        };
        let ego = Branch::build(
            &EGO_NAMES,
            ego_kind,
            cfg.gcn_bias,
            ego_features,
            cfg.hidden_dim,
            cfg.dim_ego,
            &mut params,
            &mut r,
        );
        let agg = Branch::build(
            &AGG_NAMES,
            BranchKind::Gcn,
            cfg.gcn_bias,
            agg_features,
            cfg.hidden_dim,
            cfg.dim_agg,
            &mut params,
            &mut r,
        );
        Ok(Self {
            ego,
            agg,
            merge: cfg.merge,
            params,
        })
    }

    pub fn params(&self) -> &[ParamTensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.params
    }

    pub fn param_values(&self) -> Vec<Matrix> {
        self.params.iter().map(|t| t.value.clone()).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|t| t.value.as_slice().len()).sum()
    }

    pub fn dim_ego(&self) -> usize {
        self.params[self.ego.w_out].value.cols()
    }

    /// Forward pass with the current parameters.
    pub fn embed(&self, views: &ViewPair, s: &NormalizedAdjacency) -> Result<EmbeddingSet> {
        self.embed_with(&self.params.iter().map(|t| &t.value).collect::<Vec<_>>(), views, s)
    }

    fn embed_with<M: Borrow<Matrix>>(
        &self,
        params: &[M],
        views: &ViewPair,
        s: &NormalizedAdjacency,
    ) -> Result<EmbeddingSet> {
        let ego = self.ego.encode(params, &views.x_ego, s)?;
        let agg = self.agg.encode(params, &views.x_agg, s)?;
        EmbeddingSet::new(ego.out, agg.out, self.merge)
    }
}

/// Individual task losses and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub l_ego: f64,
    pub l_agg: f64,
    pub l_s: f64,
    pub l_total: f64,
}

impl LossParts {
    pub fn is_finite(&self) -> bool {
        self.l_ego.is_finite() && self.l_agg.is_finite() && self.l_s.is_finite() && self.l_total.is_finite()
    }
}

pub struct Evaluation {
    pub losses: LossParts,
    /// One gradient per parameter, in parameter order.
    pub grads: Option<Vec<Matrix>>,
    pub embeddings: EmbeddingSet,
}

/// The combined objective bound to one graph and its two views.
pub struct Objective<'a> {
    graph: &'a Graph,
    views: &'a ViewPair,
    s: NormalizedAdjacency,
    ego_target: KlTarget,
    agg_target: KlTarget,
    alpha: f64,
    beta: f64,
    mask: TaskMask,
}

impl<'a> Objective<'a> {
    pub fn new(graph: &'a Graph, views: &'a ViewPair, cfg: &MvgeConfig) -> Result<Self> {
        let n = graph.num_nodes();
        if views.x_ego.rows() != n || views.x_agg.rows() != n {
            return Err(Error::shape(
                "objective",
                format!(
                    "{n} nodes but views have {} and {} rows",
                    views.x_ego.rows(),
                    views.x_agg.rows()
                ),
            ));
        }
        Ok(Self {
            graph,
            views,
            s: NormalizedAdjacency::new(graph),
            ego_target: KlTarget::new(&views.x_ego),
            agg_target: KlTarget::new(&views.x_agg),
            alpha: cfg.alpha,
            beta: cfg.beta,
            mask: cfg.task_mask,
        })
    }

    pub fn propagation(&self) -> &NormalizedAdjacency {
        &self.s
    }

    /// Losses, optionally gradients, and the embeddings at `params`.
    pub fn evaluate<M: Borrow<Matrix>>(
        &self,
        model: &MvgeModel,
        params: &[M],
        mode: AdjacencyMode<'_>,
        with_grad: bool,
    ) -> Result<Evaluation> {
        let (x_ego, x_agg) = (&self.views.x_ego, &self.views.x_agg);
        let ego = model.ego.encode(params, x_ego, &self.s)?;
        let agg = model.agg.encode(params, x_agg, &self.s)?;
        let h = merge_embeddings(&ego.out, &agg.out, model.merge)?;
        let (w_ego, w_agg, w_s) = loss_weights(self.alpha, self.beta, self.mask);

        let mut grads: Option<Vec<Matrix>> = with_grad.then(|| {
            params
                .iter()
                .map(|m| Matrix::zeros(m.borrow().rows(), m.borrow().cols()))
                .collect()
        });
        let mut d_ego = Matrix::zeros(ego.out.rows(), ego.out.cols());
        let mut d_agg = Matrix::zeros(agg.out.rows(), agg.out.cols());
        let mut losses = LossParts::default();

        for (on, branch, cache, target, weight, d_view, slot) in [
            (self.mask.ego, &model.ego, &ego, &self.ego_target, w_ego, &mut d_ego, &mut losses.l_ego),
            (self.mask.agg, &model.agg, &agg, &self.agg_target, w_agg, &mut d_agg, &mut losses.l_agg),
        ] {
            if !on {
                continue;
            }
            let z = branch.decode(params, &cache.out)?;
            match grads.as_mut() {
                Some(g) => {
                    let (l, mut dz) = target.loss_and_grad(&z)?;
                    *slot = l;
                    dz.scale(weight);
                    let dh = branch.decode_backward(params, &cache.out, &dz, g)?;
                    d_view.add_assign(&dh)?;
                }
                None => *slot = target.loss(&z)?,
            }
        }

        if self.mask.adj {
            let (l, dh) = adjacency_loss_and_grad(&h, self.graph, mode, with_grad)?;
            losses.l_s = l;
            if let Some(mut dh) = dh {
                dh.scale(w_s);
                let (de, da) = merge_backward(&dh, ego.out.cols(), model.merge);
                d_ego.add_assign(&de)?;
                d_agg.add_assign(&da)?;
            }
        }
        losses.l_total = total_loss(losses.l_ego, losses.l_agg, losses.l_s, self.alpha, self.beta, self.mask);

        if let Some(g) = grads.as_mut() {
            model.ego.encode_backward(params, &ego, x_ego, &self.s, &d_ego, g)?;
            model.agg.encode_backward(params, &agg, x_agg, &self.s, &d_agg, g)?;
        }
        Ok(Evaluation {
            losses,
            grads,
            embeddings: EmbeddingSet {
                h_ego: ego.out,
                h_agg: agg.out,
                h,
            },
        })
    }

    pub fn embed<M: Borrow<Matrix>>(&self, model: &MvgeModel, params: &[M]) -> Result<EmbeddingSet> {
        model.embed_with(params, self.views, &self.s)
    }
}
