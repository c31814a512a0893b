//! Layer primitives: dense affine maps, batch normalization, and the logistic sigmoid.
//!
//! Each layer exposes a batched forward pass that records what its backward pass
//! needs, plus backward passes to its parameters and to its input.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::matrix::Matrix;

/// Fully connected layer `y = W x + b`.
///
/// Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl DenseLayer {
    /// Uniform init in `±sqrt(6 / (in_dim + out_dim))`, zero bias.
    pub fn new_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    /// Builds a layer from explicit parameters. Returns `None` when the shapes disagree.
    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Option<Self> {
        (weights.len() == in_dim * out_dim && bias.len() == out_dim).then_some(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = Matrix::zeros(x.rows(), self.out_dim);
        for (b, xr) in x.iter_rows().enumerate() {
            let yr = y.row_mut(b);
            for (o, (yo, wr)) in yr.iter_mut().zip(self.weights.chunks_exact(self.in_dim)).enumerate() {
                *yo = self.bias[o] + dot(wr, xr);
            }
        }
        y
    }

    /// Returns `(dW, db)`.
    pub(crate) fn backward_params(&self, x: &Matrix, g: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.out_dim];
        for (xr, gr) in x.iter_rows().zip(g.iter_rows()) {
            for (o, &go) in gr.iter().enumerate() {
                db[o] += go;
                let row = &mut dw[o * self.in_dim..(o + 1) * self.in_dim];
                for (d, &xi) in row.iter_mut().zip(xr) {
                    *d += go * xi;
                }
            }
        }
        (dw, db)
    }

    pub(crate) fn backward_input(&self, g: &Matrix) -> Matrix {
        let mut dx = Matrix::zeros(g.rows(), self.in_dim);
        for (b, gr) in g.iter_rows().enumerate() {
            let dxr = dx.row_mut(b);
            for (&go, wr) in gr.iter().zip(self.weights.chunks_exact(self.in_dim)) {
                for (d, &w) in dxr.iter_mut().zip(wr) {
                    *d += go * w;
                }
            }
        }
        dx
    }
}

/// Per-feature batch normalization with learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub(crate) gamma: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) running_mean: Vec<f64>,
    pub(crate) running_var: Vec<f64>,
    epsilon: f64,
    momentum: f64,
}

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

impl BatchNormLayer {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    /// Builds a layer from explicit parameters and statistics.
    ///
    /// Returns `None` if the vectors disagree in length, any running variance is
    /// negative, `epsilon <= 0`, or `momentum` is outside `(0, 1)`.
    pub fn from_parts(
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        epsilon: f64,
        momentum: f64,
    ) -> Option<Self> {
        let dim = gamma.len();
        let ok = beta.len() == dim
            && running_mean.len() == dim
            && running_var.len() == dim
            && running_var.iter().all(|&v| v >= 0.0)
            && epsilon > 0.0
            && momentum > 0.0
            && momentum < 1.0;
        ok.then_some(Self {
            gamma,
            beta,
            running_mean,
            running_var,
            epsilon,
            momentum,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// Normalizes with batch statistics. Returns `(y, xhat, inv_std, batch_mean, batch_var)`.
    ///
    /// The caller decides whether to fold the batch statistics into the running ones.
    pub(crate) fn forward_batch_stats(&self, x: &Matrix) -> (Matrix, Matrix, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = x.rows() as f64;
        let dim = self.dim();
        let mut mean = vec![0.0; dim];
        for r in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in x.iter_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let (y, xhat) = self.affine(x, &mean, &inv_std);
        (y, xhat, inv_std, mean, var)
    }

    pub(crate) fn update_running(&mut self, mean: &[f64], var: &[f64], batch: usize) {
        // running variance tracks the unbiased estimate
        let unbias = if batch > 1 {
            batch as f64 / (batch as f64 - 1.0)
        } else {
            1.0
        };
        let m = self.momentum;
        for j in 0..self.dim() {
            self.running_mean[j] = (1.0 - m) * self.running_mean[j] + m * mean[j];
            self.running_var[j] = (1.0 - m) * self.running_var[j] + m * var[j] * unbias;
        }
    }

    /// Normalizes with the running statistics. Returns `(y, xhat, inv_std)`.
    pub(crate) fn forward_running(&self, x: &Matrix) -> (Matrix, Matrix, Vec<f64>) {
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|&v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let (y, xhat) = self.affine(x, &self.running_mean, &inv_std);
        (y, xhat, inv_std)
    }

    fn affine(&self, x: &Matrix, mean: &[f64], inv_std: &[f64]) -> (Matrix, Matrix) {
        let mut xhat = Matrix::zeros(x.rows(), x.cols());
        let mut y = Matrix::zeros(x.rows(), x.cols());
        for b in 0..x.rows() {
            for j in 0..x.cols() {
                let h = (x.get(b, j) - mean[j]) * inv_std[j];
                xhat.set(b, j, h);
                y.set(b, j, self.gamma[j] * h + self.beta[j]);
            }
        }
        (y, xhat)
    }

    /// Returns `(dgamma, dbeta)`; identical for both modes.
    pub(crate) fn backward_params(&self, xhat: &Matrix, g: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let mut dgamma = vec![0.0; self.dim()];
        let mut dbeta = vec![0.0; self.dim()];
        for (hr, gr) in xhat.iter_rows().zip(g.iter_rows()) {
            for j in 0..self.dim() {
                dgamma[j] += gr[j] * hr[j];
                dbeta[j] += gr[j];
            }
        }
        (dgamma, dbeta)
    }

    /// Input gradient when the batch statistics depend on the input.
    pub(crate) fn backward_input_batch(&self, xhat: &Matrix, inv_std: &[f64], g: &Matrix) -> Matrix {
        let n = g.rows() as f64;
        let dim = self.dim();
        let mut sum_dh = vec![0.0; dim];
        let mut sum_dh_h = vec![0.0; dim];
        for (hr, gr) in xhat.iter_rows().zip(g.iter_rows()) {
            for j in 0..dim {
                let dh = gr[j] * self.gamma[j];
                sum_dh[j] += dh;
                sum_dh_h[j] += dh * hr[j];
            }
        }
        let mut dx = Matrix::zeros(g.rows(), dim);
        for b in 0..g.rows() {
            for j in 0..dim {
                let dh = g.get(b, j) * self.gamma[j];
                let v = inv_std[j] / n * (n * dh - sum_dh[j] - xhat.get(b, j) * sum_dh_h[j]);
                dx.set(b, j, v);
            }
        }
        dx
    }

    /// Input gradient with the statistics held constant.
    pub(crate) fn backward_input_running(&self, inv_std: &[f64], g: &Matrix) -> Matrix {
        let mut dx = Matrix::zeros(g.rows(), self.dim());
        for b in 0..g.rows() {
            for j in 0..self.dim() {
                dx.set(b, j, g.get(b, j) * self.gamma[j] * inv_std[j]);
            }
        }
        dx
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
