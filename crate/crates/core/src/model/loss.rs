//! Reconstruction objectives: row-softmax KL for features, binary
//! cross-entropy of the inner-product decoder for the adjacency, and their
//! weighted combination.

use rand::Rng;

use super::config::TaskMask;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::layers::{log_softmax_rows, sigmoid_scalar, softplus};
use crate::numerics::{matmul, matmul_nt, Matrix};

/// Fixed target distribution `p = softmax_rows(X)`.
#[derive(Debug, Clone)]
pub struct KlTarget {
    p: Matrix,
    log_p: Matrix,
}

impl KlTarget {
    pub fn new(x: &Matrix) -> Self {
        let log_p = log_softmax_rows(x);
        let p = log_p.map(f64::exp);
        Self { p, log_p }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.p.shape()
    }

    /// `Σ_k Σ_j p_kj (log p_kj - log q_kj)` with `q = softmax_rows(z)`.
    pub fn loss(&self, z: &Matrix) -> Result<f64> {
        self.check(z)?;
        let log_q = log_softmax_rows(z);
        Ok(kl_sum(&self.p, &self.log_p, &log_q))
    }

    /// Loss and `dL/dZ = q - p` (gradient flows through `q` only).
    pub fn loss_and_grad(&self, z: &Matrix) -> Result<(f64, Matrix)> {
        self.check(z)?;
        let log_q = log_softmax_rows(z);
        let loss = kl_sum(&self.p, &self.log_p, &log_q);
        let mut grad = log_q.map(f64::exp);
        grad.axpy(-1.0, &self.p)?;
        Ok((loss, grad))
    }

    fn check(&self, z: &Matrix) -> Result<()> {
        if z.shape() != self.p.shape() {
            return Err(Error::shape(
                "kl_feature_loss",
                format!("target {:?} vs reconstruction {:?}", self.p.shape(), z.shape()),
            ));
        }
        Ok(())
    }
}

fn kl_sum(p: &Matrix, log_p: &Matrix, log_q: &Matrix) -> f64 {
    p.as_slice()
        .iter()
        .zip(log_p.as_slice())
        .zip(log_q.as_slice())
        .map(|((&p, &lp), &lq)| if p > 0.0 { p * (lp - lq) } else { 0.0 })
        .sum()
}

/// KL divergence between the row softmaxes of targets `x` and reconstructions `z`.
pub fn kl_feature_loss(x: &Matrix, z: &Matrix) -> Result<f64> {
    KlTarget::new(x).loss(z)
}

/// Pairs scored by the sampled adjacency loss: `(i, j, target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub pairs: Vec<(usize, usize, f64)>,
}

impl PairSample {
    /// Every directed edge as a positive plus `ratio` times as many uniformly
    /// drawn non-edges (`i != j`) as negatives.
    pub fn draw(g: &Graph, ratio: f64, rng: &mut impl Rng) -> Self {
        let n = g.num_nodes();
        let mut pairs: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|u| g.neighbors(u).iter().map(move |&v| (u, v, 1.0)))
            .collect();
        let wanted = ((pairs.len() as f64 * ratio).round() as usize).max(1);
        let non_edges = (n * n.saturating_sub(1)).saturating_sub(g.num_directed_entries());
        if non_edges > 0 {
            let mut drawn = 0;
            while drawn < wanted {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i != j && !g.has_edge(i, j) {
                    pairs.push((i, j, 0.0));
                    drawn += 1;
                }
            }
        }
        Self { pairs }
    }
}

/// Which form of the adjacency reconstruction loss to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum AdjacencyMode<'a> {
    /// Mean BCE over all `N²` entries, diagonal targets 0.
    Full,
    /// Mean BCE over the given pairs.
    Sampled(&'a PairSample),
}

const ROW_BLOCK: usize = 256;

/// `Â = sigmoid(H Hᵀ)` scored against the adjacency. Returns the loss and,
/// when `with_grad`, `dL/dH`.
pub fn adjacency_loss_and_grad(
    h: &Matrix,
    g: &Graph,
    mode: AdjacencyMode<'_>,
    with_grad: bool,
) -> Result<(f64, Option<Matrix>)> {
    let n = g.num_nodes();
    if h.rows() != n {
        return Err(Error::shape(
            "adjacency_loss",
            format!("{} embedding rows for {n} nodes", h.rows()),
        ));
    }
    if n == 0 {
        return Ok((0.0, with_grad.then(|| Matrix::zeros(0, h.cols()))));
    }
    match mode {
        AdjacencyMode::Full => {
            let scale = 1.0 / (n as f64 * n as f64);
            let mut loss = 0.0;
            let mut dh = with_grad.then(|| Matrix::zeros(n, h.cols()));
            for start in (0..n).step_by(ROW_BLOCK) {
                let end = (start + ROW_BLOCK).min(n);
                let mut logits = matmul_nt(h.row_block(start, end), h)?;
                for (bi, i) in (start..end).enumerate() {
                    let row = logits.row_mut(bi);
                    let mut acc = 0.0;
                    for m in row.iter_mut() {
                        acc += softplus(*m);
                        if with_grad {
                            *m = sigmoid_scalar(*m);
                        }
                    }
                    for &j in g.neighbors(i) {
                        let hij: f64 = h.row(i).iter().zip(h.row(j)).map(|(a, b)| a * b).sum();
                        acc -= hij;
                        if with_grad {
                            row[j] -= 1.0;
                        }
                    }
                    loss += acc;
                }
                if let Some(dh) = dh.as_mut() {
                    // G is symmetric, so dL/dH = (G + Gᵀ) H = 2 G H
                    let block = matmul(&logits, h)?;
                    for (bi, i) in (start..end).enumerate() {
                        dh.row_mut(i)
                            .iter_mut()
                            .zip(block.row(bi))
                            .for_each(|(d, b)| *d = 2.0 * scale * b);
                    }
                }
            }
            Ok((loss * scale, dh))
        }
        AdjacencyMode::Sampled(sample) => {
            if sample.pairs.is_empty() {
                return Ok((0.0, with_grad.then(|| Matrix::zeros(n, h.cols()))));
            }
            let scale = 1.0 / sample.pairs.len() as f64;
            let mut loss = 0.0;
            let mut dh = with_grad.then(|| Matrix::zeros(n, h.cols()));
            for &(i, j, a) in &sample.pairs {
                let m: f64 = h.row(i).iter().zip(h.row(j)).map(|(x, y)| x * y).sum();
                loss += softplus(m) - a * m;
                if let Some(dh) = dh.as_mut() {
                    let gm = (sigmoid_scalar(m) - a) * scale;
                    let (hi, hj) = (h.row(i).to_vec(), h.row(j).to_vec());
                    dh.row_mut(i).iter_mut().zip(&hj).for_each(|(d, x)| *d += gm * x);
                    dh.row_mut(j).iter_mut().zip(&hi).for_each(|(d, x)| *d += gm * x);
                }
            }
            Ok((loss * scale, dh))
        }
    }
}

pub fn adjacency_loss(h: &Matrix, g: &Graph, mode: AdjacencyMode<'_>) -> Result<f64> {
    Ok(adjacency_loss_and_grad(h, g, mode, false)?.0)
}

/// Coefficients of `(l_ego, l_agg, l_s)` in the combined objective; masked
/// tasks get 0.
pub fn loss_weights(alpha: f64, beta: f64, mask: TaskMask) -> (f64, f64, f64) {
    let on = |b: bool| if b { 1.0 } else { 0.0 };
    (
        beta * alpha * on(mask.ego),
        beta * (1.0 - alpha) * on(mask.agg),
        (1.0 - beta) * on(mask.adj),
    )
}

/// `β(α l_ego + (1 - α) l_agg) + (1 - β) l_s` over the active tasks.
pub fn total_loss(l_ego: f64, l_agg: f64, l_s: f64, alpha: f64, beta: f64, mask: TaskMask) -> f64 {
    let (we, wa, ws) = loss_weights(alpha, beta, mask);
    we * l_ego + wa * l_agg + ws * l_s
}
