//! One-vs-rest logistic regression on standardized features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::layers::sigmoid_scalar;
use crate::numerics::{matmul, matmul_tn, AdamConfig, AdamState, Matrix, ParamTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegHyper {
    pub lr: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogRegHyper {
    fn default() -> Self {
        Self {
            lr: 0.1,
            iterations: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// Class ids seen in training, ascending. Column `k` of the scores belongs to `classes[k]`.
    pub classes: Vec<usize>,
    /// `d x K` (or `d x 1` for two classes, scoring `classes[1]`).
    pub weights: Matrix,
    pub bias: Matrix,
    mean: Vec<f64>,
    scale: Vec<f64>,
    pub hyper: LogRegHyper,
}

fn standardizer(x: &Matrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = x.cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for &r in rows {
        mean.iter_mut().zip(x.row(r)).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; d];
    for &r in rows {
        var.iter_mut()
            .zip(x.row(r))
            .zip(&mean)
            .for_each(|((s, v), m)| *s += (v - m) * (v - m) / n);
    }
    let scale = var
        .into_iter()
        .map(|v| if v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

impl LogRegModel {
    fn standardize(&self, x: &Matrix, rows: Option<&[usize]>) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::shape(
                "logreg",
                format!("{} feature columns, model has {}", x.cols(), self.mean.len()),
            ));
        }
        let idx: Vec<usize> = rows.map_or_else(|| (0..x.rows()).collect(), <[usize]>::to_vec);
        let mut out = x.select_rows(&idx);
        for r in 0..out.rows() {
            out.row_mut(r)
                .iter_mut()
                .zip(self.mean.iter().zip(&self.scale))
                .for_each(|(v, (m, s))| *v = (*v - m) * s);
        }
        Ok(out)
    }

    /// Raw decision values, one column per trained classifier.
    pub fn decision_function(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.standardize(x, None)?;
        let mut s = matmul(&z, &self.weights)?;
        s.add_row_broadcast(&self.bias)?;
        Ok(s)
    }

    /// Probability of `classes[1]` for a binary model.
    pub fn positive_probability(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.classes.len() != 2 {
            return Err(Error::Validation(format!(
                "positive-class probability needs a binary model, have {} classes",
                self.classes.len()
            )));
        }
        Ok(self.decision_function(x)?.as_slice().iter().map(|&v| sigmoid_scalar(v)).collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if self.classes.len() == 1 {
            return Ok(vec![self.classes[0]; x.rows()]);
        }
        let s = self.decision_function(x)?;
        Ok((0..s.rows())
            .map(|r| {
                if self.classes.len() == 2 {
                    self.classes[usize::from(s.get(r, 0) > 0.0)]
                } else {
                    let row = s.row(r);
                    let best = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
                    self.classes[best]
                }
            })
            .collect())
    }
}

/// Fit one binary classifier per class on `train_idx`. A single training
/// class gives a constant predictor; two classes share one classifier.
pub fn train_logreg_ovr(
    features: &Matrix,
    labels: &[usize],
    train_idx: &[usize],
    hyper: LogRegHyper,
) -> Result<LogRegModel> {
    if labels.len() != features.rows() {
        return Err(Error::shape(
            "train_logreg_ovr",
            format!("{} labels for {} rows", labels.len(), features.rows()),
        ));
    }
    if train_idx.is_empty() {
        return Err(Error::Validation("empty training set".into()));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("classifier features".into()));
    }
    let mut classes: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    let (mean, scale) = standardizer(features, train_idx);
    let d = features.cols();
    let k = match classes.len() {
        1 => 0,
        2 => 1,
        c => c,
    };
    let mut model = LogRegModel {
        classes,
        weights: Matrix::zeros(d, k),
        bias: Matrix::zeros(1, k),
        mean,
        scale,
        hyper,
    };
    if k == 0 {
        return Ok(model);
    }
    let x = model.standardize(features, Some(train_idx))?;
    let n = x.rows() as f64;
    let targets = Matrix::from_fn(x.rows(), k, |r, c| {
        let class = if k == 1 { model.classes[1] } else { model.classes[c] };
        f64::from(u8::from(labels[train_idx[r]] == class))
    });
    let mut w = ParamTensor::new("w", Matrix::zeros(d, k));
    let mut b = ParamTensor::new("b", Matrix::zeros(1, k));
    let mut adam = AdamState::new(AdamConfig {
        lr: hyper.lr,
        ..AdamConfig::default()
    });
    for _ in 0..hyper.iterations {
        let mut s = matmul(&x, &w.value)?;
        s.add_row_broadcast(&b.value)?;
        // d(mean BCE)/ds = (sigmoid(s) - y) / n
        let mut ds = s.map(sigmoid_scalar);
        ds.axpy(-1.0, &targets)?;
        ds.scale(1.0 / n);
        let mut gw = matmul_tn(&x, &ds)?;
        gw.axpy(hyper.l2, &w.value)?;
        w.accumulate(&gw)?;
        b.accumulate(&ds.col_sums())?;
        adam.step(&mut [&mut w, &mut b])?;
    }
    model.weights = w.value;
    model.bias = b.value;
    if !model.weights.is_finite() {
        return Err(Error::NonFinite("classifier weights".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::accuracy;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn separable_two_class() {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![0.1, 0.3],
            vec![2.0, 2.0],
            vec![2.2, 1.9],
            vec![1.8, 2.1],
        ])
        .unwrap();
        let y = vec![0, 0, 0, 1, 1, 1];
        let idx: Vec<usize> = (0..6).collect();
        let m = train_logreg_ovr(&x, &y, &idx, LogRegHyper::default()).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
        let p = m.positive_probability(&x).unwrap();
        assert!(p[0] < 0.5 && p[5] > 0.5);
    }

    #[test]
    fn constant_features_predict_majority() {
        let x = Matrix::filled(7, 3, 1.5);
        let y = vec![2, 2, 2, 2, 0, 1, 1];
        let idx: Vec<usize> = (0..7).collect();
        let m = train_logreg_ovr(&x, &y, &idx, LogRegHyper::default()).unwrap();
        assert!(m.predict(&x).unwrap().iter().all(|&p| p == 2));
    }

    #[test]
    fn single_class_is_constant() {
        let x = Matrix::from_fn(4, 2, |r, c| (r + c) as f64);
        let m = train_logreg_ovr(&x, &[3, 3, 1, 1], &[0, 1], LogRegHyper::default()).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![3; 4]);
    }

    #[test]
    fn gaussian_blobs() {
        let mut r = rng::stream(4, "blobs", 0);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let n = 300;
        let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let x = Matrix::from_fn(n, 2, |i, c| {
            let z: f64 = StandardNormal.sample(&mut r);
            centers[y[i]][c] + z
        });
        let train: Vec<usize> = (0..n).filter(|i| i % 10 < 3).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % 10 >= 3).collect();
        let m = train_logreg_ovr(&x, &y, &train, LogRegHyper::default()).unwrap();
        let pred = m.predict(&x.select_rows(&test)).unwrap();
        let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        assert!(accuracy(&pred, &truth) > 0.95);
    }
}
