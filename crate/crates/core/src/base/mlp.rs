//! Three-layer perceptron: `Linear -> BatchNorm -> ReLU -> Dropout` twice,
//! then a linear softmax head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    add_row_bias, column_sums, cross_entropy, softmax_rows, uniform_init, Classifier,
    ForwardMode, Features,
};
use crate::linalg::{matmul, transpose_mul};
use crate::matrix::ScoreMatrix;

const BN_EPS: f64 = 1e-5;

// parameter slots
const W1: usize = 0;
const B1: usize = 1;
const G1: usize = 2;
const BETA1: usize = 3;
const W2: usize = 4;
const B2: usize = 5;
const G2: usize = 6;
const BETA2: usize = 7;
const W3: usize = 8;
const B3: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    params: Vec<ScoreMatrix>,
    dropout: f64,
    // Normalization statistics used at inference: mean and variance of the
    // last training batch for each hidden layer.
    stats: [(Vec<f64>, Vec<f64>); 2],
}

/// Cached values of one hidden block for the backward pass.
struct HiddenCache {
    normalized: ScoreMatrix,
    inv_std: Vec<f64>,
    activated: ScoreMatrix,
    mask: Option<ScoreMatrix>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, classes: usize, dropout: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&dropout), "dropout must lie in [0, 1)");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ones = |n| ScoreMatrix::from_vec(1, n, vec![1.0; n]).expect("shape");
        let params = vec![
            uniform_init(inputs, hidden, inputs, &mut rng),
            uniform_init(1, hidden, inputs, &mut rng),
            ones(hidden),
            ScoreMatrix::zeros(1, hidden),
            uniform_init(hidden, hidden, hidden, &mut rng),
            uniform_init(1, hidden, hidden, &mut rng),
            ones(hidden),
            ScoreMatrix::zeros(1, hidden),
            uniform_init(hidden, classes, hidden, &mut rng),
            uniform_init(1, classes, hidden, &mut rng),
        ];
        let fresh = || (vec![0.0; hidden], vec![1.0; hidden]);
        Self {
            params,
            dropout,
            stats: [fresh(), fresh()],
        }
    }

    pub fn hidden(&self) -> usize {
        self.params[W1].cols()
    }

    /// BN + ReLU (+ dropout) on pre-activations `z` of hidden block `layer`.
    fn hidden_block(
        &mut self,
        mut z: ScoreMatrix,
        layer: usize,
        mode: ForwardMode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> HiddenCache {
        let (gamma, beta) = if layer == 0 { (G1, BETA1) } else { (G2, BETA2) };
        let (m, h) = z.shape();
        let (mean, var) = if mode.batch_statistics {
            let mut mean = vec![0.0; h];
            for i in 0..m {
                mean.iter_mut().zip(z.row(i)).for_each(|(a, &v)| *a += v);
            }
            mean.iter_mut().for_each(|a| *a /= m as f64);
            let mut var = vec![0.0; h];
            for i in 0..m {
                for ((a, &v), &mu) in var.iter_mut().zip(z.row(i)).zip(&mean) {
                    *a += (v - mu) * (v - mu);
                }
            }
            var.iter_mut().for_each(|a| *a /= m as f64);
            self.stats[layer] = (mean.clone(), var.clone());
            (mean, var)
        } else {
            self.stats[layer].clone()
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        for i in 0..m {
            for ((v, &mu), &s) in z.row_mut(i).iter_mut().zip(&mean).zip(&inv_std) {
                *v = (*v - mu) * s;
            }
        }
        let normalized = z;
        let mut activated = normalized.clone();
        let g = self.params[gamma].row(0);
        let b = self.params[beta].row(0);
        for i in 0..m {
            for ((v, &g), &b) in activated.row_mut(i).iter_mut().zip(g).zip(b) {
                *v = (g * *v + b).max(0.0);
            }
        }
        let mask = match rng {
            Some(rng) if mode.dropout && self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                let data = (0..m * h)
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let mask = ScoreMatrix::from_vec(m, h, data).expect("shape");
                for (a, &k) in activated.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *a *= k;
                }
                Some(mask)
            }
            _ => None,
        };
        HiddenCache {
            normalized,
            inv_std,
            activated,
            mask,
        }
    }

    /// Gradient through dropout, ReLU and BN of block `layer`. `upstream`
    /// is the gradient w.r.t. the block output. Returns gradients w.r.t. the
    /// pre-activations, gamma and beta.
    fn hidden_backward(
        &self,
        layer: usize,
        cache: &HiddenCache,
        mut upstream: ScoreMatrix,
        mode: ForwardMode,
    ) -> (ScoreMatrix, ScoreMatrix, ScoreMatrix) {
        let (gamma, beta) = if layer == 0 { (G1, BETA1) } else { (G2, BETA2) };
        let (m, h) = upstream.shape();
        if let Some(mask) = &cache.mask {
            for (u, &k) in upstream.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *u *= k;
            }
        }
        // ReLU: pass where gamma * xhat + beta > 0
        let g = self.params[gamma].row(0);
        let b = self.params[beta].row(0);
        for i in 0..m {
            let xr = cache.normalized.row(i);
            for (j, u) in upstream.row_mut(i).iter_mut().enumerate() {
                if g[j] * xr[j] + b[j] <= 0.0 {
                    *u = 0.0;
                }
            }
        }
        let dy = upstream;
        let mut dgamma = ScoreMatrix::zeros(1, h);
        for i in 0..m {
            for ((a, &d), &x) in dgamma
                .row_mut(0)
                .iter_mut()
                .zip(dy.row(i))
                .zip(cache.normalized.row(i))
            {
                *a += d * x;
            }
        }
        let dbeta = column_sums(&dy);

        let mut dz = ScoreMatrix::zeros(m, h);
        if mode.batch_statistics {
            // dx = inv_std / m * (m dxhat - sum dxhat - xhat * sum(dxhat xhat))
            let mut sum_dxhat = vec![0.0; h];
            let mut sum_dxhat_xhat = vec![0.0; h];
            for i in 0..m {
                for j in 0..h {
                    let dxhat = dy.get(i, j) * g[j];
                    sum_dxhat[j] += dxhat;
                    sum_dxhat_xhat[j] += dxhat * cache.normalized.get(i, j);
                }
            }
            let mf = m as f64;
            for i in 0..m {
                for j in 0..h {
                    let dxhat = dy.get(i, j) * g[j];
                    let xhat = cache.normalized.get(i, j);
                    dz.set(
                        i,
                        j,
                        cache.inv_std[j] / mf
                            * (mf * dxhat - sum_dxhat[j] - xhat * sum_dxhat_xhat[j]),
                    );
                }
            }
        } else {
            for i in 0..m {
                for j in 0..h {
                    dz.set(i, j, dy.get(i, j) * g[j] * cache.inv_std[j]);
                }
            }
        }
        (dz, dgamma, dbeta)
    }

    fn forward_inference(&self, x: &Features, rows: &[usize]) -> ScoreMatrix {
        let mut z1 = x.par_rows_mul(rows, &self.params[W1]);
        add_row_bias(&mut z1, &self.params[B1]);
        let a1 = self.normalize_inference(z1, 0);
        let mut z2 = matmul(&a1, &self.params[W2]);
        add_row_bias(&mut z2, &self.params[B2]);
        let a2 = self.normalize_inference(z2, 1);
        let mut z3 = matmul(&a2, &self.params[W3]);
        add_row_bias(&mut z3, &self.params[B3]);
        softmax_rows(&mut z3);
        z3
    }

    fn normalize_inference(&self, mut z: ScoreMatrix, layer: usize) -> ScoreMatrix {
        let (gamma, beta) = if layer == 0 { (G1, BETA1) } else { (G2, BETA2) };
        let (mean, var) = &self.stats[layer];
        let g = self.params[gamma].row(0);
        let b = self.params[beta].row(0);
        for i in 0..z.rows() {
            for (j, v) in z.row_mut(i).iter_mut().enumerate() {
                let xhat = (*v - mean[j]) / (var[j] + BN_EPS).sqrt();
                *v = (g[j] * xhat + b[j]).max(0.0);
            }
        }
        z
    }
}

impl Classifier for Mlp {
    fn params(&self) -> &[ScoreMatrix] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [ScoreMatrix] {
        &mut self.params
    }

    fn decays(&self) -> Vec<bool> {
        (0..self.params.len())
            .map(|k| matches!(k, W1 | W2 | W3))
            .collect()
    }

    fn loss_and_grad(
        &mut self,
        x: &Features,
        rows: &[usize],
        targets: &[usize],
        mode: ForwardMode,
        rng: &mut ChaCha8Rng,
    ) -> (f64, Vec<ScoreMatrix>) {
        let mut z1 = x.rows_mul(rows, &self.params[W1]);
        add_row_bias(&mut z1, &self.params[B1]);
        let c1 = self.hidden_block(z1, 0, mode, Some(rng));
        let mut z2 = matmul(&c1.activated, &self.params[W2]);
        add_row_bias(&mut z2, &self.params[B2]);
        let c2 = self.hidden_block(z2, 1, mode, Some(rng));
        let mut p = matmul(&c2.activated, &self.params[W3]);
        add_row_bias(&mut p, &self.params[B3]);
        softmax_rows(&mut p);
        let (loss, dz3) = cross_entropy(&p, targets);

        let dw3 = transpose_mul(&c2.activated, &dz3);
        let db3 = column_sums(&dz3);
        let da2 = matmul_transposed(&dz3, &self.params[W3]);
        let (dz2, dg2, dbeta2) = self.hidden_backward(1, &c2, da2, mode);
        let dw2 = transpose_mul(&c1.activated, &dz2);
        let db2 = column_sums(&dz2);
        let da1 = matmul_transposed(&dz2, &self.params[W2]);
        let (dz1, dg1, dbeta1) = self.hidden_backward(0, &c1, da1, mode);
        let dw1 = x.rows_t_mul(rows, &dz1);
        let db1 = column_sums(&dz1);

        (
            loss,
            vec![dw1, db1, dg1, dbeta1, dw2, db2, dg2, dbeta2, dw3, db3],
        )
    }

    fn predict(&self, x: &Features, rows: &[usize]) -> ScoreMatrix {
        self.forward_inference(x, rows)
    }
}

/// `A W^T` for `A (m x q)` and `W (p x q)`.
fn matmul_transposed(a: &ScoreMatrix, w: &ScoreMatrix) -> ScoreMatrix {
    let mut out = ScoreMatrix::zeros(a.rows(), w.rows());
    for i in 0..a.rows() {
        let ar = a.row(i);
        for (k, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = ar.iter().zip(w.row(k)).map(|(x, y)| x * y).sum();
        }
    }
    out
}
