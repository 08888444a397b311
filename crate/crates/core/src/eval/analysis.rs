use serde::{Deserialize, Serialize};

use super::{score_accuracy, Workbench};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::{argmax, ScoreMatrix};

/// Equal-width bins `[0, w), [w, 2w), ..., [(m-1)w, mw]` with an inclusive
/// last edge, plus an overflow bin `(mw, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub width: f64,
    pub count: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            width: 0.1,
            count: 6,
        }
    }
}

impl BinSpec {
    fn upper(&self) -> f64 {
        self.width * self.count as f64
    }

    /// Bin of a coefficient; `count` is the overflow bin.
    pub fn index(&self, c: f64) -> usize {
        let top = self.upper();
        if c > top + 1e-12 {
            return self.count;
        }
        // small slack so that e.g. 0.3 lands in [0.3, 0.4) despite 0.3/0.1 < 3
        let k = (c / self.width + 1e-9).floor();
        (k.max(0.0) as usize).min(self.count - 1)
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        if bin == self.count {
            (self.upper(), 1.0)
        } else {
            (bin as f64 * self.width, (bin + 1) as f64 * self.width)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub stage: String,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub accuracy: Option<f64>,
}

/// Accuracy of each stage's predictions within clustering-coefficient bins
/// over `nodes`. Every node falls in exactly one bin, so the populations of
/// one stage sum to `nodes.len()`.
pub fn coefficient_binned_accuracy(
    coefficients: &[f64],
    nodes: &[usize],
    truth: &[usize],
    stages: &[(&str, &[usize])],
    bins: BinSpec,
) -> Result<Vec<BinRow>> {
    if bins.count == 0 || !(bins.width > 0.0) {
        return Err(Error::param("bins", "need at least one bin of positive width"));
    }
    let mut rows = Vec::new();
    for &(stage, predicted) in stages {
        let mut counts = vec![0usize; bins.count + 1];
        let mut hits = vec![0usize; bins.count + 1];
        for &i in nodes {
            let b = bins.index(coefficients[i]);
            counts[b] += 1;
            if predicted[i] == truth[i] {
                hits[b] += 1;
            }
        }
        for b in 0..=bins.count {
            let (lower, upper) = bins.edges(b);
            rows.push(BinRow {
                stage: stage.to_owned(),
                lower,
                upper,
                count: counts[b],
                accuracy: (counts[b] > 0).then(|| hits[b] as f64 / counts[b] as f64),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub stage: String,
    pub node: usize,
    pub label: usize,
    pub margin: f64,
}

/// `score[first] - score[second]` for every node in `nodes` whose true
/// label is `first` or `second`, per stage.
pub fn margin_rows(
    stages: &[(&str, &ScoreMatrix)],
    nodes: &[usize],
    truth: &[usize],
    pair: (usize, usize),
) -> Result<Vec<MarginRow>> {
    let (a, b) = pair;
    for &(_, m) in stages {
        if m.cols() < 2 {
            return Err(Error::param("classes", "margins need at least two classes"));
        }
        if a >= m.cols() || b >= m.cols() || a == b {
            return Err(Error::param("pair", format!("invalid class pair ({a}, {b})")));
        }
    }
    let mut rows = Vec::new();
    for &(stage, m) in stages {
        for &i in nodes {
            if truth[i] == a || truth[i] == b {
                rows.push(MarginRow {
                    stage: stage.to_owned(),
                    node: i,
                    label: truth[i],
                    margin: m.get(i, a) - m.get(i, b),
                });
            }
        }
    }
    Ok(rows)
}

/// Principal component projection of a score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `c x components`, orthonormal columns, first nonzero entry positive.
    pub directions: ScoreMatrix,
    /// Covariance eigenvalues (`n - 1` normalization), non-increasing.
    pub explained_variance: Vec<f64>,
    /// `n x components` coordinates of the centered rows.
    pub projections: ScoreMatrix,
    pub mean: Vec<f64>,
}

/// Centers the columns of `m` and projects onto the top principal
/// directions of the covariance matrix.
pub fn pca(m: &ScoreMatrix, components: usize) -> Result<Pca> {
    let (n, c) = m.shape();
    if components == 0 || components > c {
        return Err(Error::param(
            "components",
            format!("must lie in [1, {c}], got {components}"),
        ));
    }
    if n < 2 {
        return Err(Error::ZeroVariance);
    }
    let mean: Vec<f64> = (0..c)
        .map(|j| (0..n).map(|i| m.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut centered = m.clone();
    for i in 0..n {
        for (v, mu) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    let mut cov = ScoreMatrix::zeros(c, c);
    for i in 0..n {
        let r = centered.row(i);
        for a in 0..c {
            for b in a..c {
                let v = cov.get(a, b) + r[a] * r[b];
                cov.set(a, b, v);
            }
        }
    }
    for a in 0..c {
        for b in a..c {
            let v = cov.get(a, b) / (n - 1) as f64;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    let total: f64 = (0..c).map(|a| cov.get(a, a)).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let eig = symmetric_eigen(&cov);
    let mut directions = ScoreMatrix::zeros(c, components);
    for j in 0..components {
        let mut col = eig.vectors.column(j);
        if let Some(&first) = col.iter().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                col.iter_mut().for_each(|v| *v = -*v);
            }
        }
        directions.set_column(j, &col);
    }
    let projections = crate::linalg::matmul(&centered, &directions);
    Ok(Pca {
        directions,
        explained_variance: eig.values[..components]
            .iter()
            .map(|v| v.max(0.0))
            .collect(),
        projections,
        mean,
    })
}

/// Test accuracies at one training checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub epoch: usize,
    pub base: f64,
    pub correction: f64,
    pub nlcs: f64,
    pub cs: f64,
}

/// Trains the base model for one seed and, every `every` epochs, applies
/// linear and nonlinear correct-and-smooth to that checkpoint.
pub fn timeline_eval(bench: &Workbench<'_>, master_seed: u64, every: usize) -> Result<Vec<TimelineRow>> {
    if every == 0 {
        return Err(Error::param("every", "must be >= 1"));
    }
    let split = bench.split(master_seed)?;
    let labels = bench.label_matrix(&split)?;
    let truth = &bench.dataset.labels;
    let mut rows = Vec::new();
    let mut first_error = None;
    let mut sink = |epoch: usize, scores: ScoreMatrix| {
        if first_error.is_some() {
            return;
        }
        let row = (|| -> Result<TimelineRow> {
            let nlcs = bench.nlcs(&scores, &labels)?;
            let cs = bench.correct_and_smooth(&scores, &labels)?;
            Ok(TimelineRow {
                epoch,
                base: score_accuracy(&scores, truth, &split.test)?,
                correction: score_accuracy(&nlcs.corrected, truth, &split.test)?,
                nlcs: score_accuracy(&nlcs.smoothed, truth, &split.test)?,
                cs: score_accuracy(&cs.smoothed, truth, &split.test)?,
            })
        })();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => first_error = Some(e),
        }
    };
    bench.base_prediction(&split, master_seed, Some((every, &mut sink)))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// Argmax label of every row.
pub fn predicted_labels(m: &ScoreMatrix) -> Vec<usize> {
    (0..m.rows()).map(|i| argmax(m.row(i))).collect()
}
