use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;

/// Row-sparse feature matrix (CSR, column ids ascending per row).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    /// `rows[i]` lists the `(column, value)` entries of row `i`.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                if c >= cols {
                    return Err(Error::ShapeMismatch {
                        context: "sparse features",
                        expected: format!("column < {cols}"),
                        actual: format!("column {c} in row {i}"),
                    });
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }
}

/// Node features, dense or sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(ScoreMatrix),
    Sparse(SparseRows),
}

impl Features {
    pub fn rows(&self) -> usize {
        match self {
            Features::Dense(m) => m.rows(),
            Features::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Features::Dense(m) => m.cols(),
            Features::Sparse(s) => s.cols(),
        }
    }

    fn accumulate_row(&self, i: usize, w: &ScoreMatrix, out: &mut [f64]) {
        match self {
            Features::Dense(m) => {
                for (k, &x) in m.row(i).iter().enumerate() {
                    if x != 0.0 {
                        out.iter_mut().zip(w.row(k)).for_each(|(o, &y)| *o += x * y);
                    }
                }
            }
            Features::Sparse(s) => {
                for (k, x) in s.row(i) {
                    out.iter_mut().zip(w.row(k)).for_each(|(o, &y)| *o += x * y);
                }
            }
        }
    }

    /// `X[rows] W`.
    pub fn rows_mul(&self, rows: &[usize], w: &ScoreMatrix) -> ScoreMatrix {
        let mut out = ScoreMatrix::zeros(rows.len(), w.cols());
        for (r, &i) in rows.iter().enumerate() {
            self.accumulate_row(i, w, out.row_mut(r));
        }
        out
    }

    /// [`rows_mul`](Self::rows_mul) fanned out over threads, one row per task.
    pub fn par_rows_mul(&self, rows: &[usize], w: &ScoreMatrix) -> ScoreMatrix {
        let h = w.cols();
        let mut out = ScoreMatrix::zeros(rows.len(), h);
        if h == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(h)
            .zip(rows.par_iter())
            .for_each(|(acc, &i)| self.accumulate_row(i, w, acc));
        out
    }

    /// `X[rows]^T G`.
    pub fn rows_t_mul(&self, rows: &[usize], g: &ScoreMatrix) -> ScoreMatrix {
        let mut out = ScoreMatrix::zeros(self.cols(), g.cols());
        for (r, &i) in rows.iter().enumerate() {
            let gr = g.row(r);
            match self {
                Features::Dense(m) => {
                    for (k, &x) in m.row(i).iter().enumerate() {
                        if x != 0.0 {
                            out.row_mut(k).iter_mut().zip(gr).for_each(|(o, &y)| *o += x * y);
                        }
                    }
                }
                Features::Sparse(s) => {
                    for (k, x) in s.row(i) {
                        out.row_mut(k).iter_mut().zip(gr).for_each(|(o, &y)| *o += x * y);
                    }
                }
            }
        }
        out
    }
}
