//! Layer primitives and their backward rules.

use super::matrix::{matmul_nt, matmul_tn, Matrix};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

/// Gradients of `C = A * B` given `dC`: returns `(dA, dB) = (dC Bᵀ, Aᵀ dC)`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, dc: &Matrix) -> Result<(Matrix, Matrix)> {
    Ok((matmul_nt(dc, b)?, matmul_tn(a, dc)?))
}

/// `Y[v] = Σ_u w(v, u) X[u]`.
pub fn spmm(s: &NormalizedAdjacency, x: &Matrix) -> Result<Matrix> {
    if s.num_nodes() != x.rows() {
        return Err(Error::shape(
            "spmm",
            format!("operator over {} nodes, input has {} rows", s.num_nodes(), x.rows()),
        ));
    }
    let mut y = Matrix::zeros(x.rows(), x.cols());
    for v in 0..s.num_nodes() {
        let out = y.row_mut(v);
        for (u, w) in s.row(v) {
            out.iter_mut().zip(x.row(u)).for_each(|(o, xu)| *o += w * xu);
        }
    }
    Ok(y)
}

/// The operator is symmetric, so `dX = Sᵀ dY = S dY`.
pub fn spmm_backward(s: &NormalizedAdjacency, dy: &Matrix) -> Result<Matrix> {
    spmm(s, dy)
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gate `dy` by the sign of the pre-activation; the subgradient at 0 is 0.
pub fn relu_backward(pre: &Matrix, dy: &Matrix) -> Matrix {
    debug_assert_eq!(pre.shape(), dy.shape());
    let data = pre
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::from_vec(pre.rows(), pre.cols(), data).expect("shape preserved")
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// `dX = dY * s * (1 - s)` where `s = sigmoid(X)` is the forward output.
pub fn sigmoid_backward(out: &Matrix, dy: &Matrix) -> Matrix {
    let data = out
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    Matrix::from_vec(out.rows(), out.cols(), data).expect("shape preserved")
}

/// Row-wise log-softmax with max subtraction.
pub fn log_softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Backward of row softmax: `dX_r = s_r ⊙ (dY_r - <dY_r, s_r>)`.
pub fn softmax_rows_backward(out: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(out.rows(), out.cols());
    for r in 0..out.rows() {
        let s = out.row(r);
        let g = dy.row(r);
        let dot: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
        dx.row_mut(r)
            .iter_mut()
            .zip(s.iter().zip(g))
            .for_each(|(d, (&si, &gi))| *d = si * (gi - dot));
    }
    dx
}

/// `[A | B]`
pub fn concat_cols(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "concat_cols",
            format!("{} rows vs {} rows", a.rows(), b.rows()),
        ));
    }
    let cols = a.cols() + b.cols();
    let mut data = Vec::with_capacity(a.rows() * cols);
    for r in 0..a.rows() {
        data.extend_from_slice(a.row(r));
        data.extend_from_slice(b.row(r));
    }
    Matrix::from_vec(a.rows(), cols, data)
}

/// Backward of `concat_cols`: split `dY` at column `left_cols`.
pub fn concat_cols_backward(dy: &Matrix, left_cols: usize) -> (Matrix, Matrix) {
    (dy.col_range(0, left_cols), dy.col_range(left_cols, dy.cols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};
    use crate::numerics::gradcheck::{central_difference, GradCheck};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, "layers-test", 0);
        Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap());
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let s = softmax_rows(&Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap());
        for (got, want) in s.as_slice().iter().zip([0.0900, 0.2447, 0.6652]) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
        let ls = log_softmax_rows(&Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap());
        for (l, p) in ls.as_slice().iter().zip(s.as_slice()) {
            assert!((l.exp() - p).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_and_softplus() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!(sigmoid_scalar(-800.0) >= 0.0 && sigmoid_scalar(800.0) <= 1.0);
    }

    #[test]
    fn spmm_single_edge() {
        let (g, _) = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let s = normalized_adjacency(&g);
        let y = spmm(&s, &Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn spmm_identity_operator() {
        let s = normalized_adjacency(&Graph::empty(3));
        let x = random(3, 4, 1);
        assert_eq!(spmm(&s, &x).unwrap(), x);
        assert!(spmm(&s, &random(2, 4, 1)).is_err());
    }

    #[test]
    fn concat_split() {
        let a = random(3, 2, 2);
        let b = random(3, 4, 3);
        let c = concat_cols(&a, &b).unwrap();
        assert_eq!(c.shape(), (3, 6));
        let (da, db) = concat_cols_backward(&c, 2);
        assert_eq!((da, db), (a, b));
        assert!(concat_cols(&random(2, 2, 1), &random(3, 2, 1)).is_err());
    }

    #[test]
    fn matmul_sum_gradient_is_ones_times_bt() {
        let a = random(3, 4, 4);
        let b = random(4, 2, 5);
        let ones = Matrix::filled(3, 2, 1.0);
        let (da, db) = matmul_backward(&a, &b, &ones).unwrap();
        let expect_da = crate::numerics::matmul_nt(&ones, &b).unwrap();
        assert_eq!(da, expect_da);
        let numeric = central_difference(&a, 1e-6, |x| x.matmul(&b).unwrap().sum());
        for (x, y) in numeric.as_slice().iter().zip(da.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
        let numeric_b = central_difference(&b, 1e-6, |x| a.matmul(x).unwrap().sum());
        for (x, y) in numeric_b.as_slice().iter().zip(db.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    // Every layer's analytic gradient against central differences, using a
    // random linear functional <W, f(X)> as the scalar loss.
    fn check_layer(
        x: &Matrix,
        forward: impl Fn(&Matrix) -> Matrix,
        backward: impl Fn(&Matrix, &Matrix) -> Matrix,
        seed: u64,
    ) {
        let y = forward(x);
        let w = random(y.rows(), y.cols(), seed);
        let analytic = backward(x, &w);
        let loss = |m: &[Matrix]| {
            let out = forward(&m[0]);
            out.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let report = GradCheck::new(1e-6, 1e-6)
            .check(&[x.clone()], &[analytic], loss)
            .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_error);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn layer_gradients(seed in 0u64..1000) {
            let x = random(4, 5, seed);
            check_layer(&x, relu, |x, g| relu_backward(x, g), seed + 1);
            check_layer(&x, sigmoid, |x, g| sigmoid_backward(&sigmoid(x), g), seed + 2);
            check_layer(&x, softmax_rows, |x, g| softmax_rows_backward(&softmax_rows(x), g), seed + 3);
            let (g, _) = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)]).unwrap();
            let s = normalized_adjacency(&g);
            check_layer(&x, |m| spmm(&s, m).unwrap(), |_, g| spmm_backward(&s, g).unwrap(), seed + 4);
            let other = random(4, 3, seed + 5);
            check_layer(
                &x,
                |m| concat_cols(m, &other).unwrap(),
                |_, g| concat_cols_backward(g, 5).0,
                seed + 6,
            );
        }

        #[test]
        fn softmax_rows_are_distributions(seed in 0u64..1000, scale in 0.1f64..50.0) {
            let mut x = random(6, 7, seed);
            x.scale(scale);
            let s = softmax_rows(&x);
            for r in 0..s.rows() {
                let total: f64 = s.row(r).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(s.row(r).iter().all(|&p| p > 0.0));
            }
        }
    }
}
