//! Dense linear algebra, layer primitives with hand-written backward rules,
//! gradient checking and Adam.

mod adam;
pub mod gradcheck;
pub mod layers;
mod matrix;

pub use adam::{AdamConfig, AdamState, ParamTensor};
pub use gradcheck::{relative_error, GradCheck, GradCheckReport};
pub use matrix::{matmul, matmul_nt, matmul_tn, MatView, Matrix};

use rand::Rng;

/// Glorot-uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit))
}

/// Population standard deviation of each column.
pub fn column_std(m: &Matrix) -> Vec<f64> {
    let n = m.rows() as f64;
    let means: Vec<f64> = m.col_sums().as_slice().iter().map(|s| s / n).collect();
    let mut var = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for ((v, x), mu) in var.iter_mut().zip(m.row(r)).zip(&means) {
            *v += (x - mu) * (x - mu);
        }
    }
    var.into_iter().map(|v| (v / n).sqrt()).collect()
}
