//! Central finite-difference gradient checking.

use rand::seq::index::sample;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Entries sampled per parameter matrix; `None` checks every entry.
    pub samples_per_param: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Index of the parameter holding the worst entry.
    pub worst_param: Option<usize>,
    pub checked: usize,
    /// Entries skipped because the loss has a kink there (one-sided slopes disagree).
    pub skipped_kinks: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

impl GradCheck {
    pub fn new(epsilon: f64, tolerance: f64) -> Self {
        Self {
            epsilon,
            tolerance,
            samples_per_param: None,
            seed: 0,
        }
    }

    pub fn with_samples(mut self, per_param: usize, seed: u64) -> Self {
        self.samples_per_param = Some(per_param);
        self.seed = seed;
        self
    }

    /// Compare `analytic[i]` with central differences of `loss` around `params`.
    pub fn check<F>(&self, params: &[Matrix], analytic: &[Matrix], mut loss: F) -> Result<GradCheckReport>
    where
        F: FnMut(&[Matrix]) -> f64,
    {
        if params.len() != analytic.len()
            || params.iter().zip(analytic).any(|(p, a)| p.shape() != a.shape())
        {
            return Err(Error::shape("grad_check", "parameters and gradients disagree"));
        }
        let mut work = params.to_vec();
        let finite = |v: f64, what: &str| -> Result<f64> {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("loss is {v} at {what}")))
            }
        };
        let f0 = finite(loss(&work), "the base point")?;
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            worst_param: None,
            checked: 0,
            skipped_kinks: 0,
            tolerance: self.tolerance,
        };
        let eps = self.epsilon;
        for p in 0..work.len() {
            let len = work[p].as_slice().len();
            let entries: Vec<usize> = match self.samples_per_param {
                Some(k) if k < len => {
                    let mut r = rng::stream(self.seed, "gradcheck", p as u64);
                    let mut idx = sample(&mut r, len, k).into_vec();
                    idx.sort_unstable();
                    idx
                }
                _ => (0..len).collect(),
            };
            for i in entries {
                let orig = work[p].as_slice()[i];
                work[p].as_mut_slice()[i] = orig + eps;
                let plus = finite(loss(&work), "a perturbed point")?;
                work[p].as_mut_slice()[i] = orig - eps;
                let minus = finite(loss(&work), "a perturbed point")?;
                work[p].as_mut_slice()[i] = orig;

                let forward = (plus - f0) / eps;
                let backward = (f0 - minus) / eps;
                let numeric = (plus - minus) / (2.0 * eps);
                if (forward - backward).abs() > 1e-2 * (forward.abs() + backward.abs()) + 1e-4 {
                    report.skipped_kinks += 1;
                    continue;
                }
                let err = relative_error(analytic[p].as_slice()[i], numeric);
                report.checked += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst_param = Some(p);
                }
            }
        }
        Ok(report)
    }
}

/// Full central-difference gradient of a scalar function of one matrix.
pub fn central_difference(x: &Matrix, eps: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut work = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.as_slice().len() {
        let orig = work.as_slice()[i];
        work.as_mut_slice()[i] = orig + eps;
        let plus = f(&work);
        work.as_mut_slice()[i] = orig - eps;
        let minus = f(&work);
        work.as_mut_slice()[i] = orig;
        grad.as_mut_slice()[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}
