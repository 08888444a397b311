//! Small dense linear-algebra kernels: a cyclic Jacobi eigensolver for
//! symmetric matrices and column orthonormalization.

use crate::matrix::ScoreMatrix;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in non-increasing order.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, aligned with `values`.
    pub vectors: ScoreMatrix,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
///
/// `a` is a row-major `n x n` symmetric matrix.
pub fn symmetric_eigen(a: &ScoreMatrix) -> SymmetricEigen {
    let n = a.rows();
    assert_eq!(n, a.cols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = ScoreMatrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let scale: f64 = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m.get(p, q) * m.get(p, q))
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = ScoreMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    SymmetricEigen { values, vectors }
}

/// Orthonormalizes a set of column vectors in place with two passes of
/// modified Gram-Schmidt. Columns that collapse numerically are replaced by
/// zeros; returns how many did.
pub fn orthonormalize(columns: &mut [Vec<f64>]) -> usize {
    let mut collapsed = 0;
    for j in 0..columns.len() {
        let (done, rest) = columns.split_at_mut(j);
        let col = &mut rest[0];
        let original = dot(col, col).sqrt();
        for _pass in 0..2 {
            for prev in done.iter() {
                let d = dot(prev, col);
                if d != 0.0 {
                    col.iter_mut().zip(prev).for_each(|(c, &p)| *c -= d * p);
                }
            }
        }
        let norm = dot(col, col).sqrt();
        if norm == 0.0 || norm <= 1e-12 * original {
            col.iter_mut().for_each(|c| *c = 0.0);
            collapsed += 1;
        } else {
            col.iter_mut().for_each(|c| *c /= norm);
        }
    }
    collapsed
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `A^T B` for row-major `A (n x p)` and `B (n x q)`.
pub fn transpose_mul(a: &ScoreMatrix, b: &ScoreMatrix) -> ScoreMatrix {
    assert_eq!(a.rows(), b.rows());
    let (p, q) = (a.cols(), b.cols());
    let mut out = ScoreMatrix::zeros(p, q);
    for i in 0..a.rows() {
        let ar = a.row(i);
        let br = b.row(i);
        for (k, &x) in ar.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out.row_mut(k).iter_mut().zip(br) {
                *o += x * y;
            }
        }
    }
    out
}

/// `A B` for row-major `A (n x p)` and `B (p x q)`.
pub fn matmul(a: &ScoreMatrix, b: &ScoreMatrix) -> ScoreMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = ScoreMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for (k, &x) in a.row(i).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out.row_mut(i).iter_mut().zip(b.row(k)) {
                *o += x * y;
            }
        }
    }
    out
}
