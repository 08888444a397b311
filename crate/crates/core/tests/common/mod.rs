//! Shared fixtures and loop-literal dense oracles for the integration tests.
#![allow(dead_code)]

use nlcs_core::{Graph, LabelMatrix, MixingFunction, ScoreMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi edge list with optional random weights in [0.5, 2).
pub fn random_edges(n: usize, p: f64, weighted: bool, seed: u64) -> Vec<(usize, usize, f64)> {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                let w = if weighted { r.random_range(0.5..2.0) } else { 1.0 };
                edges.push((i, j, w));
            }
        }
    }
    edges
}

pub fn graph_of(n: usize, edges: &[(usize, usize, f64)]) -> Graph {
    Graph::from_edges(edges, Some(n)).expect("valid edges")
}

/// Adjacency as a plain dense matrix, built straight from an edge list.
pub struct DenseGraph {
    pub n: usize,
    pub w: Vec<Vec<f64>>,
}

impl DenseGraph {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut w = vec![vec![0.0; n]; n];
        for &(i, j, x) in edges {
            if i != j {
                w[i][j] += x;
                w[j][i] += x;
            }
        }
        Self { n, w }
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.w.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn normalized(&self) -> Vec<Vec<f64>> {
        let d = self.degrees();
        let mut s = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                if self.w[i][j] != 0.0 {
                    s[i][j] = self.w[i][j] / (d[i] * d[j]).sqrt();
                }
            }
        }
        s
    }

    /// Every `i < j < k` with all three edges present.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                for k in j + 1..self.n {
                    if self.w[i][j] != 0.0 && self.w[j][k] != 0.0 && self.w[i][k] != 0.0 {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    /// Order-3 tensor with the geometric mean of edge weights on all six
    /// permutations of each triangle.
    pub fn tensor(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(self.n);
        for [i, j, k] in self.triangles() {
            let tau = (self.w[i][j] * self.w[j][k] * self.w[i][k]).cbrt();
            for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                t.set(a, b, c, tau);
            }
        }
        t
    }

    pub fn clustering(&self) -> Vec<f64> {
        let tri = self.triangles();
        (0..self.n)
            .map(|v| {
                let deg = (0..self.n).filter(|&u| self.w[v][u] != 0.0).count();
                if deg < 2 {
                    return 0.0;
                }
                let t = tri.iter().filter(|t| t.contains(&v)).count();
                2.0 * t as f64 / (deg * (deg - 1)) as f64
            })
            .collect()
    }
}

pub struct DenseTensor {
    pub n: usize,
    a: Vec<f64>,
}

fn inv_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x.sqrt()
    } else {
        0.0
    }
}

fn mix(sigma: MixingFunction, a: f64, b: f64) -> f64 {
    match sigma {
        MixingFunction::ArithmeticMean => (a + b) / 2.0,
        MixingFunction::Maximum => a.max(b),
        MixingFunction::Minimum => a.min(b),
        MixingFunction::GeometricMean => (a.abs() * b.abs()).sqrt(),
        MixingFunction::Harmonic => {
            if a + b == 0.0 {
                0.0
            } else {
                2.0 * a * b / (a + b)
            }
        }
    }
}

impl DenseTensor {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n * n] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.a[(i * self.n + j) * self.n + k]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.a[(i * n + j) * n + k] = v;
    }

    pub fn hyperdegree(&self, i: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                s += self.get(i, j, k);
            }
        }
        s
    }

    pub fn codegree(&self, i: usize, j: usize) -> f64 {
        (0..self.n).map(|k| self.get(k, i, j)).sum()
    }

    /// `out_i = sum_jk A_ijk sigma(f_j, f_k)`
    pub fn tensor_map(&self, f: &[f64], sigma: MixingFunction) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..self.n {
                for k in 0..self.n {
                    let a = self.get(i, j, k);
                    if a != 0.0 {
                        *o += a * mix(sigma, f[j], f[k]);
                    }
                }
            }
        }
        out
    }

    pub fn nonlinear_map(&self, f: &[f64], sigma: MixingFunction) -> Vec<f64> {
        let d: Vec<f64> = (0..self.n).map(|i| inv_sqrt(self.hyperdegree(i))).collect();
        let scaled: Vec<f64> = f.iter().zip(&d).map(|(x, s)| x * s).collect();
        self.tensor_map(&scaled, sigma)
            .iter()
            .zip(&d)
            .map(|(x, s)| x * s)
            .collect()
    }

    pub fn phi(&self, f: &[f64], sigma: MixingFunction) -> f64 {
        let d: Vec<f64> = (0..self.n).map(|i| inv_sqrt(self.hyperdegree(i))).collect();
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let b = self.codegree(i, j);
                if b != 0.0 {
                    let v = mix(sigma, f[i] * d[i], f[j] * d[j]);
                    s += b * v * v;
                }
            }
        }
        0.5 * s.sqrt()
    }
}

pub fn to_rows(m: &ScoreMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> ScoreMatrix {
    ScoreMatrix::from_rows(rows).expect("rectangular")
}

pub fn columns(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = m.first().map_or(0, |r| r.len());
    (0..c).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

pub fn from_columns(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.first().map_or(0, |c| c.len());
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            let mut out = vec![0.0; c];
            for (k, &x) in row.iter().enumerate() {
                for (o, &y) in out.iter_mut().zip(&b[k]) {
                    *o += x * y;
                }
            }
            out
        })
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `a Smap(F) + b S F + (1 - a - b) T`, column by column.
pub fn spread(
    s: &[Vec<f64>],
    t: &DenseTensor,
    f: &[Vec<f64>],
    teleport: &[Vec<f64>],
    sigma: MixingFunction,
    alpha: f64,
    beta: f64,
) -> Vec<Vec<f64>> {
    let sf = matmul(s, f);
    let higher = from_columns(
        &columns(f)
            .iter()
            .map(|c| t.nonlinear_map(c, sigma))
            .collect::<Vec<_>>(),
    );
    (0..f.len())
        .map(|i| {
            (0..f[i].len())
                .map(|j| {
                    alpha * higher[i][j] + beta * sf[i][j] + (1.0 - alpha - beta) * teleport[i][j]
                })
                .collect()
        })
        .collect()
}

fn divide_columns(g: &mut [Vec<f64>], phis: &[f64]) {
    for row in g.iter_mut() {
        for (v, &p) in row.iter_mut().zip(phis) {
            if p > 0.0 {
                *v /= p;
            }
        }
    }
}

fn column_phis(t: &DenseTensor, g: &[Vec<f64>], sigma: MixingFunction) -> Vec<f64> {
    columns(g).iter().map(|c| t.phi(c, sigma)).collect()
}

pub fn nhols(
    s: &[Vec<f64>],
    t: &DenseTensor,
    y: &[Vec<f64>],
    sigma: MixingFunction,
    alpha: f64,
    beta: f64,
    iterations: usize,
) -> Vec<Vec<f64>> {
    let mut f = y.to_vec();
    for _ in 0..iterations {
        let mut g = spread(s, t, &f, y, sigma, alpha, beta);
        let phis = column_phis(t, &g, sigma);
        divide_columns(&mut g, &phis);
        f = g;
    }
    f
}

pub fn residual(
    s: &[Vec<f64>],
    t: &DenseTensor,
    e0: &[Vec<f64>],
    teleport: &[Vec<f64>],
    sigma: MixingFunction,
    alpha: f64,
    beta: f64,
    iterations: usize,
) -> Vec<Vec<f64>> {
    let mut e = e0.to_vec();
    for _ in 0..iterations {
        e = spread(s, t, &e, teleport, sigma, alpha, beta);
    }
    e
}

/// Smoothing from `g0`, normalizing each step by phi of the previous iterate.
pub fn smooth(
    s: &[Vec<f64>],
    t: &DenseTensor,
    g0: &[Vec<f64>],
    teleport: &[Vec<f64>],
    sigma: MixingFunction,
    alpha: f64,
    beta: f64,
    iterations: usize,
) -> Vec<Vec<f64>> {
    let mut g = g0.to_vec();
    for _ in 0..iterations {
        let phis = column_phis(t, &g, sigma);
        let mut next = spread(s, t, &g, teleport, sigma, alpha, beta);
        divide_columns(&mut next, &phis);
        g = next;
    }
    g
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> ScoreMatrix {
    let mut r = rng(seed);
    let data = (0..rows * cols).map(|_| r.random_range(lo..hi)).collect();
    ScoreMatrix::from_vec(rows, cols, data).expect("shape")
}

/// Row-stochastic random scores.
pub fn random_scores(rows: usize, cols: usize, seed: u64) -> ScoreMatrix {
    let mut m = random_matrix(rows, cols, 0.01, 1.0, seed);
    for i in 0..rows {
        let s: f64 = m.row(i).iter().sum();
        m.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    m
}

/// Random labels in `0..classes` and a labeled subset of about `frac` of
/// the nodes (at least one).
pub fn random_labels(n: usize, classes: usize, frac: f64, seed: u64) -> (Vec<usize>, LabelMatrix) {
    let mut r = rng(seed);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
    let mut labeled: Vec<usize> = (0..n).filter(|_| r.random::<f64>() < frac).collect();
    if labeled.is_empty() {
        labeled.push(0);
    }
    let y = LabelMatrix::new(&labels, classes, &labeled).expect("labels");
    (labels, y)
}

/// Planted-partition graph: nodes split evenly into `classes` blocks, with
/// edge probability `p_in` inside a block and `p_out` across.
pub fn planted(
    n: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (Vec<(usize, usize, f64)>, Vec<usize>) {
    let mut r = rng(seed);
    let labels: Vec<usize> = (0..n).map(|i| i * classes / n).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    (edges, labels)
}

/// Largest relative error between analytic and central-difference
/// gradients of the mean cross-entropy, over every parameter entry.
///
/// The denominator is `max(|analytic|, |numeric|, floor)` so entries that
/// are zero up to rounding do not dominate.
pub fn gradient_check<C: nlcs_core::base::Classifier>(
    model: &C,
    x: &nlcs_core::base::Features,
    rows: &[usize],
    targets: &[usize],
    mode: nlcs_core::base::ForwardMode,
    h: f64,
    floor: f64,
) -> f64 {
    let loss = |m: &C| {
        let mut m = m.clone();
        m.loss_and_grad(x, rows, targets, mode, &mut rng(0)).0
    };
    let (_, grads) = model.clone().loss_and_grad(x, rows, targets, mode, &mut rng(0));
    let mut worst = 0.0f64;
    for (p, g) in grads.iter().enumerate() {
        for e in 0..g.as_slice().len() {
            let mut up = model.clone();
            up.params_mut()[p].as_mut_slice()[e] += h;
            let mut down = model.clone();
            down.params_mut()[p].as_mut_slice()[e] -= h;
            let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
            let analytic = g.as_slice()[e];
            let scale = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// Planted-partition dataset whose dense features are a noisy one-hot of
/// the class followed by pure-noise columns.
pub fn planted_dataset(
    n: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    noise: f64,
    seed: u64,
) -> nlcs_core::data::Dataset {
    let (edges, labels) = planted(n, classes, p_in, p_out, seed);
    let graph = graph_of(n, &edges);
    let mut r = rng(seed ^ 0xFEA7);
    let cols = classes + 4;
    let mut x = ScoreMatrix::zeros(n, cols);
    for i in 0..n {
        for j in 0..cols {
            let signal = if j == labels[i] { 1.0 } else { 0.0 };
            x.set(i, j, signal + noise * r.random_range(-1.0..1.0));
        }
    }
    nlcs_core::data::Dataset {
        name: "planted".into(),
        graph,
        features: Some(nlcs_core::base::Features::Dense(x)),
        labels,
        classes,
    }
}
