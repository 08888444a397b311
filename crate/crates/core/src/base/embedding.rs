use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::linalg::{dot, orthonormalize, symmetric_eigen};
use crate::matrix::ScoreMatrix;

const OVERSAMPLE: usize = 8;
const RITZ_EVERY: usize = 10;
const TOLERANCE: f64 = 1e-6;
const MAX_SWEEPS: usize = 1000;

/// Leading eigenvectors of the normalized adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n x d`, orthonormal columns.
    pub vectors: ScoreMatrix,
    /// Eigenvalues of `S`, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Largest `|S q - theta q|` over the returned pairs.
    pub residual: f64,
}

impl SpectralEmbedding {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Coordinates scaled by `sqrt(n)` so entries are O(1), as model input.
    pub fn features(&self) -> ScoreMatrix {
        let mut m = self.vectors.clone();
        m.scale((m.rows() as f64).sqrt());
        m
    }
}

/// `max(2c, 32)`, capped at `n - 1`.
pub fn default_embedding_dim(classes: usize, nodes: usize) -> usize {
    (2 * classes).max(32).min(nodes.saturating_sub(1))
}

/// Top-`d` eigenpairs of `S` by algebraic value.
///
/// Block power iteration on `(S + I) / 2`, whose spectrum lies in `[0, 1]`
/// with the same ordering, with a Rayleigh-Ritz step every few sweeps.
/// A run that hits the sweep limit returns its last iterate with
/// `converged = false`.
pub fn spectral_embedding(s: &NormalizedAdjacency, d: usize, seed: u64) -> Result<SpectralEmbedding> {
    let n = s.num_nodes();
    if d == 0 || d >= n {
        return Err(Error::param("embedding_dim", format!("must lie in [1, {n}), got {d}")));
    }
    let k = (d + OVERSAMPLE).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut q);

    let mut sweeps = 0;
    let mut ritz = ritz_step(s, &mut q);
    let mut residual = f64::INFINITY;
    while sweeps < MAX_SWEEPS {
        for _ in 0..RITZ_EVERY {
            q = shifted_apply(s, &q);
            orthonormalize(&mut q);
            sweeps += 1;
        }
        ritz = ritz_step(s, &mut q);
        residual = ritz_residual(s, &q[..d], &ritz[..d]);
        if residual < TOLERANCE {
            break;
        }
    }
    let converged = residual < TOLERANCE;
    if !converged {
        log::warn!("spectral embedding stopped after {sweeps} sweeps, residual {residual:.3e}");
    }

    let mut vectors = ScoreMatrix::zeros(n, d);
    for (j, col) in q.iter_mut().take(d).enumerate() {
        if let Some(&first) = col.iter().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
            }
        }
        vectors.set_column(j, col);
    }
    Ok(SpectralEmbedding {
        vectors,
        eigenvalues: ritz[..d].to_vec(),
        converged,
        sweeps,
        residual,
    })
}

fn to_matrix(cols: &[Vec<f64>]) -> ScoreMatrix {
    let n = cols[0].len();
    let mut m = ScoreMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

fn apply_s(s: &NormalizedAdjacency, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let out = s.apply(&to_matrix(cols));
    (0..cols.len()).map(|j| out.column(j)).collect()
}

/// `(S + I) / 2` applied to every column.
fn shifted_apply(s: &NormalizedAdjacency, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = apply_s(s, cols);
    for (o, c) in out.iter_mut().zip(cols) {
        o.iter_mut().zip(c).for_each(|(o, &c)| *o = 0.5 * (*o + c));
    }
    out
}

/// Rotates `q` onto the Ritz vectors of `S` in span(q); returns the Ritz
/// values in non-increasing order.
fn ritz_step(s: &NormalizedAdjacency, q: &mut Vec<Vec<f64>>) -> Vec<f64> {
    let k = q.len();
    let sq = apply_s(s, q);
    let mut h = ScoreMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = dot(&q[a], &sq[b]);
            h.set(a, b, v);
            h.set(b, a, v);
        }
    }
    let eig = symmetric_eigen(&h);
    let n = q[0].len();
    let rotated: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut col = vec![0.0; n];
            for (a, qa) in q.iter().enumerate() {
                let c = eig.vectors.get(a, j);
                if c != 0.0 {
                    col.iter_mut().zip(qa).for_each(|(o, &x)| *o += c * x);
                }
            }
            col
        })
        .collect();
    *q = rotated;
    eig.values
}

fn ritz_residual(s: &NormalizedAdjacency, q: &[Vec<f64>], theta: &[f64]) -> f64 {
    let sq = apply_s(s, q);
    sq.iter()
        .zip(q)
        .zip(theta)
        .map(|((sv, v), &t)| {
            sv.iter()
                .zip(v)
                .map(|(a, b)| (a - t * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn two_triangles_have_double_unit_eigenvalue() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], None).unwrap();
        let s = NormalizedAdjacency::new(&g);
        let emb = spectral_embedding(&s, 2, 7).unwrap();
        assert!(emb.converged);
        assert!((emb.eigenvalues[0] - 1.0).abs() < 1e-8);
        assert!((emb.eigenvalues[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dimension_checked() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], None).unwrap();
        let s = NormalizedAdjacency::new(&g);
        assert!(spectral_embedding(&s, 3, 0).is_err());
        assert!(spectral_embedding(&s, 0, 0).is_err());
    }

    #[test]
    fn default_dim() {
        assert_eq!(default_embedding_dim(7, 2708), 32);
        assert_eq!(default_embedding_dim(20, 2708), 40);
        assert_eq!(default_embedding_dim(7, 10), 9);
    }
}
