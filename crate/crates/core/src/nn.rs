//! Shared dense-numerics layer: activations, momentum SGD, regularizers,
//! dropout and batch normalization.
//!
//! All math is done in `f64`; checkpoints downcast to `f32` on disk.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Row-major dense matrix of 64-bit reals.
pub type Mat = Array2<f64>;
pub type Vec1 = Array1<f64>;

/// Numerically stable elementwise sigmoid.
pub fn sigmoid(m: &Mat) -> Mat {
    m.mapv(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max-shift; each output row sums to 1.
pub fn softmax_rows(m: &Mat) -> Mat {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|z| z / sum);
    }
    out
}

/// Stable `log(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Per-parameter velocity buffers for momentum SGD.
#[derive(Debug, Clone)]
pub struct OptState {
    pub velocities: std::vec::Vec<Mat>,
}

impl OptState {
    pub fn zeros_like(params: &[&Mat]) -> Self {
        OptState {
            velocities: params.iter().map(|p| Mat::zeros(p.raw_dim())).collect(),
        }
    }
}

/// One momentum step: `v <- momentum*v - lr*g; theta <- theta + v`.
pub fn sgd_momentum_step(
    params: &mut [&mut Mat],
    grads: &[&Mat],
    state: &mut OptState,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocities.len() {
        return Err(Error::ShapeMismatch("parameter/gradient/velocity counts differ".into()));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocities) {
        if p.raw_dim() != g.raw_dim() || p.raw_dim() != v.raw_dim() {
            return Err(Error::ShapeMismatch(format!(
                "param {:?} vs grad {:?} vs velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
        v.zip_mut_with(*g, |vi, &gi| *vi = momentum * *vi - lr * gi);
        p.zip_mut_with(v, |pi, &vi| *pi += vi);
    }
    Ok(())
}

/// Regularization coefficients shared by all models.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RegConfig {
    pub l1_coeff: f64,
    pub l2_coeff: f64,
    /// Lee sparsity target activation.
    pub lee_target: f64,
    pub lee_coeff: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig { l1_coeff: 1e-4, l2_coeff: 1e-4, lee_target: 0.05, lee_coeff: 1e-3 }
    }
}

impl RegConfig {
    pub fn none() -> Self {
        RegConfig { l1_coeff: 0.0, l2_coeff: 0.0, lee_target: 0.05, lee_coeff: 0.0 }
    }

    /// L1+L2 penalty value for one weight matrix.
    pub fn weight_penalty(&self, w: &Mat) -> f64 {
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        let l2: f64 = w.iter().map(|x| x * x).sum();
        self.l1_coeff * l1 + self.l2_coeff * l2
    }

    /// Adds the L1+L2 penalty gradient for `w` into `grad`.
    pub fn add_weight_grad(&self, w: &Mat, grad: &mut Mat) {
        if self.l1_coeff == 0.0 && self.l2_coeff == 0.0 {
            return;
        }
        grad.zip_mut_with(w, |g, &wi| {
            *g += self.l1_coeff * wi.signum() + 2.0 * self.l2_coeff * wi;
        });
    }
}

/// Lee sparsity penalty over a batch of activations (rows = samples).
///
/// `penalty = sum_j (rho - mean_batch acts_j)^2`, with its gradient with
/// respect to every activation entry.
pub fn lee_sparsity(acts: &Mat, rho: f64) -> (f64, Mat) {
    let batch = acts.nrows() as f64;
    let means = acts.mean_axis(Axis(0)).expect("nonempty batch");
    let penalty: f64 = means.iter().map(|&m| (rho - m) * (rho - m)).sum();
    let mut grad = Mat::zeros(acts.raw_dim());
    for mut row in grad.rows_mut() {
        row.zip_mut_with(&means, |g, &m| *g = 2.0 * (m - rho) / batch);
    }
    (penalty, grad)
}

/// Inverted dropout mask: entries are `0` with probability `p_drop`, else
/// `1/(1-p_drop)`, so expectations are preserved and inference needs no
/// rescaling.
pub fn dropout_mask(rows: usize, cols: usize, p_drop: f64, rng: &mut Rng) -> Mat {
    assert!((0.0..1.0).contains(&p_drop));
    let keep_scale = 1.0 / (1.0 - p_drop);
    Mat::from_shape_fn((rows, cols), |_| {
        if rng.next_f64() < p_drop {
            0.0
        } else {
            keep_scale
        }
    })
}

pub const BATCHNORM_EPS: f64 = 1e-5;

/// Learned scale/shift plus running statistics for one batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Vec1,
    pub beta: Vec1,
    pub running_mean: Vec1,
    pub running_var: Vec1,
    /// Exponential-average momentum for the running statistics.
    pub momentum: f64,
}

/// Saved forward intermediates needed by the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub normalized: Mat,
    pub inv_std: Vec1,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Vec1::ones(features),
            beta: Vec1::zeros(features),
            running_mean: Vec1::zeros(features),
            running_var: Vec1::ones(features),
            momentum: 0.9,
        }
    }

    pub fn forward(&mut self, x: &Mat, training: bool) -> Result<(Mat, Option<BnCache>)> {
        if x.ncols() != self.gamma.len() {
            return Err(Error::ShapeMismatch(format!(
                "batchnorm expects {} features, got {}",
                self.gamma.len(),
                x.ncols()
            )));
        }
        if training {
            if x.nrows() < 2 {
                return Err(Error::InvalidArgument(
                    "batch normalization needs a batch of at least 2 in training mode".into(),
                ));
            }
            let mean = x.mean_axis(Axis(0)).unwrap();
            // Biased (population) variance, as in the original formulation.
            let mut var = Vec1::zeros(x.ncols());
            for row in x.rows() {
                for (j, (&xi, &mj)) in row.iter().zip(&mean).enumerate() {
                    var[j] += (xi - mj) * (xi - mj);
                }
            }
            var.mapv_inplace(|v| v / x.nrows() as f64);
            let inv_std = var.mapv(|v| 1.0 / (v + BATCHNORM_EPS).sqrt());
            let mut normalized = x.clone();
            for mut row in normalized.rows_mut() {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = (*r - mean[j]) * inv_std[j];
                }
            }
            let mut out = normalized.clone();
            for mut row in out.rows_mut() {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = self.gamma[j] * *r + self.beta[j];
                }
            }
            let m = self.momentum;
            self.running_mean.zip_mut_with(&mean, |r, &b| *r = m * *r + (1.0 - m) * b);
            self.running_var.zip_mut_with(&var, |r, &b| *r = m * *r + (1.0 - m) * b);
            Ok((out, Some(BnCache { normalized, inv_std })))
        } else {
            let inv_std = self.running_var.mapv(|v| 1.0 / (v + BATCHNORM_EPS).sqrt());
            let mut out = x.clone();
            for mut row in out.rows_mut() {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = self.gamma[j] * (*r - self.running_mean[j]) * inv_std[j] + self.beta[j];
                }
            }
            Ok((out, None))
        }
    }

    /// Returns `(dx, dgamma, dbeta)` for a training-mode forward pass.
    pub fn backward(&self, cache: &BnCache, dout: &Mat) -> (Mat, Vec1, Vec1) {
        let b = dout.nrows() as f64;
        let dbeta = dout.sum_axis(Axis(0));
        let dgamma = (dout * &cache.normalized).sum_axis(Axis(0));
        // dxhat = dout * gamma
        let mut dxhat = dout.clone();
        for mut row in dxhat.rows_mut() {
            row.zip_mut_with(&self.gamma, |d, &g| *d *= g);
        }
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &cache.normalized).sum_axis(Axis(0));
        let mut dx = Mat::zeros(dout.raw_dim());
        for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = cache.inv_std[j] / b
                    * (b * dxhat[(i, j)]
                        - sum_dxhat[j]
                        - cache.normalized[(i, j)] * sum_dxhat_xhat[j]);
            }
        }
        (dx, dgamma, dbeta)
    }
}

/// Asserts all entries finite; used after training updates.
pub fn check_finite(m: &Mat, context: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}
