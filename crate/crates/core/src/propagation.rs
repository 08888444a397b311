//! Label spreading operators.
//!
//! Linear label propagation `F <- a S F + (1 - a) Y` and the nonlinear
//! higher-order spreading iteration built on the triangle hypergraph:
//!
//! ```text
//! G = a * Smap(F) + b * S F + (1 - a - b) * Y,    F <- G / phi(G)
//! Smap(f) = D_H^-1/2 * T_sigma(D_H^-1/2 f)
//! T_sigma(f)_i = sum_jk A_ijk sigma(f_j, f_k)
//! phi(f) = 1/2 * sqrt(sum_ij B_ij sigma(f_i / sqrt(d_i), f_j / sqrt(d_j))^2)
//! ```
//!
//! All kernels are node-parallel with a fixed per-node summation order, so
//! results are bit-identical for any rayon thread count.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{inv_sqrt, NormalizedAdjacency, TriangleSet};
use crate::matrix::{argmax, ScoreMatrix};

/// Default number of spreading iterations.
pub const DEFAULT_ITERATIONS: usize = 50;

/// One-hot training labels plus the labeled/unlabeled partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    y: ScoreMatrix,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl LabelMatrix {
    /// `labels[i]` is the class of node `i`; only rows listed in `labeled`
    /// are revealed.
    pub fn new(labels: &[usize], classes: usize, labeled: &[usize]) -> Result<Self> {
        let n = labels.len();
        let mut y = ScoreMatrix::zeros(n, classes);
        let mut is_labeled = vec![false; n];
        for &i in labeled {
            if i >= n {
                return Err(Error::NodeOutOfRange { id: i, n });
            }
            let class = labels[i];
            if class >= classes {
                return Err(Error::UnknownLabel {
                    label: class,
                    classes,
                });
            }
            if is_labeled[i] {
                return Err(Error::param("labeled", format!("node {i} listed twice")));
            }
            is_labeled[i] = true;
            y.set(i, class, 1.0);
        }
        let mut labeled: Vec<usize> = labeled.to_vec();
        labeled.sort_unstable();
        let unlabeled = (0..n).filter(|&i| !is_labeled[i]).collect();
        Ok(Self {
            y,
            labeled,
            unlabeled,
        })
    }

    pub fn matrix(&self) -> &ScoreMatrix {
        &self.y
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn num_nodes(&self) -> usize {
        self.y.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.y.cols()
    }
}

/// Symmetric mixing function `sigma: R^2 -> R` applied entrywise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingFunction {
    #[default]
    #[serde(alias = "mean")]
    ArithmeticMean,
    #[serde(alias = "max")]
    Maximum,
    #[serde(alias = "min")]
    Minimum,
    /// `sqrt(|a| |b|)`
    #[serde(alias = "geometric")]
    GeometricMean,
    /// `2ab / (a + b)`, undefined when `a + b = 0`.
    Harmonic,
}

impl MixingFunction {
    pub const ALL: [MixingFunction; 5] = [
        MixingFunction::ArithmeticMean,
        MixingFunction::Maximum,
        MixingFunction::Minimum,
        MixingFunction::GeometricMean,
        MixingFunction::Harmonic,
    ];

    /// `None` where the function is undefined.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> Option<f64> {
        match self {
            MixingFunction::ArithmeticMean => Some(0.5 * (a + b)),
            MixingFunction::Maximum => Some(a.max(b)),
            MixingFunction::Minimum => Some(a.min(b)),
            MixingFunction::GeometricMean => Some((a.abs() * b.abs()).sqrt()),
            MixingFunction::Harmonic => {
                let s = a + b;
                if s == 0.0 {
                    None
                } else {
                    Some(2.0 * a * b / s)
                }
            }
        }
    }

    /// Like [`apply`](Self::apply) with undefined points mapped to 0.
    #[inline]
    pub fn apply_or_zero(self, a: f64, b: f64) -> f64 {
        self.apply(a, b).unwrap_or(0.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            MixingFunction::ArithmeticMean => "mean",
            MixingFunction::Maximum => "max",
            MixingFunction::Minimum => "min",
            MixingFunction::GeometricMean => "geometric",
            MixingFunction::Harmonic => "harmonic",
        }
    }
}

impl fmt::Display for MixingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MixingFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "arithmetic-mean" => Ok(Self::ArithmeticMean),
            "max" | "maximum" => Ok(Self::Maximum),
            "min" | "minimum" => Ok(Self::Minimum),
            "geometric" | "geometric-mean" => Ok(Self::GeometricMean),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(Error::param(
                "sigma",
                format!("unknown mixing function `{other}` (mean|max|min|geometric|harmonic)"),
            )),
        }
    }
}

/// How the phi normalization is lifted from vectors to matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiMode {
    /// Each class column divided by its own phi.
    #[default]
    PerColumn,
    /// One phi for the whole matrix, `sqrt(sum_c phi_c^2)`.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    alpha: f64,
    beta: f64,
    iterations: usize,
    tolerance: Option<f64>,
    phi: PhiMode,
}

impl PropagationParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be >= 0, got {alpha}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::param("beta", format!("must be >= 0, got {beta}")));
        }
        if alpha + beta >= 1.0 {
            return Err(Error::param(
                "alpha+beta",
                format!("alpha+beta must be < 1, got {}", alpha + beta),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            iterations: DEFAULT_ITERATIONS,
            tolerance: None,
            phi: PhiMode::PerColumn,
        })
    }

    /// Linear propagation has no higher-order weight.
    pub fn linear(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0)
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    /// Stop once the max-abs change of an update falls below `tol`.
    pub fn with_tolerance(mut self, tol: Option<f64>) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_phi(mut self, phi: PhiMode) -> Self {
        self.phi = phi;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn tolerance(&self) -> Option<f64> {
        self.tolerance
    }

    pub fn phi(&self) -> PhiMode {
        self.phi
    }
}

/// Standard label propagation, `F <- alpha S F + (1 - alpha) Y` from `F = Y`.
///
/// Only `alpha` is used.
pub fn lp_iterate(
    s: &NormalizedAdjacency,
    labels: &LabelMatrix,
    params: &PropagationParams,
) -> Result<ScoreMatrix> {
    let y = labels.matrix();
    let alpha = params.alpha();
    let mut f = y.clone();
    for iteration in 0..params.iterations() {
        let mut next = s.apply(&f);
        next.scale(alpha);
        next.add_scaled(1.0 - alpha, y);
        check_finite(&next, "label propagation", iteration)?;
        let done = converged(&f, &next, params.tolerance());
        f = next;
        if done {
            break;
        }
    }
    Ok(f)
}

/// Tensor mapping `out_i = sum_jk A_ijk sigma(f_j, f_k)`, column by column.
pub fn tensor_map(tri: &TriangleSet, f: &ScoreMatrix, sigma: MixingFunction) -> ScoreMatrix {
    tensor_map_counted(tri, f, sigma).0
}

/// [`tensor_map`] plus the number of entries where `sigma` was undefined
/// and 0 was used instead.
pub fn tensor_map_counted(
    tri: &TriangleSet,
    f: &ScoreMatrix,
    sigma: MixingFunction,
) -> (ScoreMatrix, usize) {
    let c = f.cols();
    let mut out = ScoreMatrix::zeros(f.rows(), c);
    let undefined = AtomicUsize::new(0);
    if c == 0 {
        return (out, 0);
    }
    out.as_mut_slice()
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(i, acc)| {
            let mut missed = 0;
            for &t in tri.incident(i) {
                let (j, k, tau) = tri.others(t, i);
                // (j, k) and (k, j) both appear in the tensor slice
                let w = 2.0 * tau;
                for ((a, &fj), &fk) in acc.iter_mut().zip(f.row(j)).zip(f.row(k)) {
                    match sigma.apply(fj, fk) {
                        Some(v) => *a += w * v,
                        None => missed += 1,
                    }
                }
            }
            if missed > 0 {
                undefined.fetch_add(missed, Ordering::Relaxed);
            }
        });
    let undefined = undefined.into_inner();
    if undefined > 0 {
        log::debug!("mixing function undefined at {undefined} entries, used 0");
    }
    (out, undefined)
}

/// `Smap(f) = D_H^-1/2 T_sigma(D_H^-1/2 f)`; rows with zero hyperdegree are 0.
pub fn nonlinear_map(tri: &TriangleSet, f: &ScoreMatrix, sigma: MixingFunction) -> ScoreMatrix {
    let scale: Vec<f64> = tri.hyperdegrees().iter().map(|&d| inv_sqrt(d)).collect();
    let mut scaled = f.clone();
    scale_rows(&mut scaled, &scale);
    let mut out = tensor_map(tri, &scaled, sigma);
    scale_rows(&mut out, &scale);
    out
}

/// `phi(f) = 1/2 sqrt(sum_ij B_ij sigma(f_i/sqrt(d_i), f_j/sqrt(d_j))^2)`.
///
/// Zero on triangle-free graphs.
pub fn phi_norm(tri: &TriangleSet, f: &[f64], sigma: MixingFunction) -> f64 {
    let inv: Vec<f64> = tri.hyperdegrees().iter().map(|&d| inv_sqrt(d)).collect();
    let per_node: Vec<f64> = (0..tri.num_nodes())
        .into_par_iter()
        .map(|i| {
            let fi = f[i] * inv[i];
            tri.codegree_row(i)
                .map(|(j, b)| {
                    let v = sigma.apply_or_zero(fi, f[j] * inv[j]);
                    b * v * v
                })
                .sum::<f64>()
        })
        .collect();
    0.5 * per_node.iter().sum::<f64>().sqrt()
}

/// phi of every column of `f`.
pub fn phi_columns(tri: &TriangleSet, f: &ScoreMatrix, sigma: MixingFunction) -> Vec<f64> {
    (0..f.cols())
        .map(|j| phi_norm(tri, &f.column(j), sigma))
        .collect()
}

/// Divides `g` by its phi norm per the chosen mode. Zero norms are skipped.
pub(crate) fn normalize_by_phi(
    g: &mut ScoreMatrix,
    phis: &[f64],
    mode: PhiMode,
) {
    match mode {
        PhiMode::PerColumn => {
            for i in 0..g.rows() {
                for (v, &p) in g.row_mut(i).iter_mut().zip(phis) {
                    if p > 0.0 {
                        *v /= p;
                    }
                }
            }
        }
        PhiMode::Global => {
            let p = phis.iter().map(|p| p * p).sum::<f64>().sqrt();
            if p > 0.0 {
                g.scale(1.0 / p);
            }
        }
    }
}

/// One affine spreading step `a Smap(F) + b S F + (1 - a - b) T`.
///
/// The higher-order term is skipped entirely when `a = 0`, so the linear
/// special case is computed exactly as linear propagation would.
pub(crate) fn spread_step(
    s: &NormalizedAdjacency,
    tri: &TriangleSet,
    f: &ScoreMatrix,
    teleport: &ScoreMatrix,
    sigma: MixingFunction,
    alpha: f64,
    beta: f64,
) -> ScoreMatrix {
    let mut next = s.apply(f);
    next.scale(beta);
    if alpha != 0.0 {
        let higher = nonlinear_map(tri, f, sigma);
        next.add_scaled(alpha, &higher);
    }
    next.add_scaled(1.0 - alpha - beta, teleport);
    next
}

pub(crate) fn require_triangles(tri: &TriangleSet, alpha: f64) -> Result<()> {
    if alpha > 0.0 && tri.is_empty() {
        Err(Error::NoTriangles { alpha })
    } else {
        Ok(())
    }
}

/// Nonlinear higher-order label spreading from `F = Y`:
/// `G = a Smap(F) + b S F + (1 - a - b) Y`, then `F = G / phi(G)`.
pub fn nhols_iterate(
    s: &NormalizedAdjacency,
    tri: &TriangleSet,
    labels: &LabelMatrix,
    sigma: MixingFunction,
    params: &PropagationParams,
) -> Result<ScoreMatrix> {
    require_triangles(tri, params.alpha())?;
    let y = labels.matrix();
    let mut f = y.clone();
    for iteration in 0..params.iterations() {
        let mut g = spread_step(s, tri, &f, y, sigma, params.alpha(), params.beta());
        let phis = phi_columns(tri, &g, sigma);
        normalize_by_phi(&mut g, &phis, params.phi());
        check_finite(&g, "nonlinear spreading", iteration)?;
        let done = converged(&f, &g, params.tolerance());
        f = g;
        if done {
            break;
        }
    }
    Ok(f)
}

/// Argmax class of each row in `nodes`, lowest class on ties.
pub fn predict_argmax(f: &ScoreMatrix, nodes: &[usize]) -> Vec<usize> {
    nodes.iter().map(|&i| argmax(f.row(i))).collect()
}

pub(crate) fn scale_rows(m: &mut ScoreMatrix, factors: &[f64]) {
    for (i, &s) in factors.iter().enumerate() {
        m.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
}

pub(crate) fn check_finite(m: &ScoreMatrix, stage: &'static str, iteration: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { stage, iteration })
    }
}

pub(crate) fn converged(prev: &ScoreMatrix, next: &ScoreMatrix, tol: Option<f64>) -> bool {
    tol.is_some_and(|tol| prev.max_abs_diff(next) < tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, TriangleWeight};

    fn k3() -> (NormalizedAdjacency, TriangleSet) {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (0, 2)], None).unwrap();
        (
            NormalizedAdjacency::new(&g),
            TriangleSet::enumerate(&g, TriangleWeight::Unit),
        )
    }

    fn ones(n: usize, c: usize) -> ScoreMatrix {
        ScoreMatrix::from_vec(n, c, vec![1.0; n * c]).unwrap()
    }

    #[test]
    fn mixing_identities() {
        for sigma in [
            MixingFunction::ArithmeticMean,
            MixingFunction::Maximum,
            MixingFunction::Minimum,
        ] {
            assert_eq!(sigma.apply(0.7, 0.7), Some(0.7));
            assert_eq!(sigma.apply(0.2, -3.0), sigma.apply(-3.0, 0.2));
        }
        assert_eq!(MixingFunction::Harmonic.apply(1.0, -1.0), None);
        assert_eq!(MixingFunction::Harmonic.apply(0.0, 0.0), None);
        assert_eq!(MixingFunction::GeometricMean.apply(-4.0, 1.0), Some(2.0));
    }

    #[test]
    fn params_domain() {
        assert!(PropagationParams::new(0.5, 0.5).is_err());
        assert!(PropagationParams::new(-0.1, 0.2).is_err());
        assert!(PropagationParams::new(0.6, 0.3).is_ok());
        let err = PropagationParams::new(0.5, 0.5).unwrap_err().to_string();
        assert!(err.contains("alpha+beta must be < 1"), "{err}");
    }

    #[test]
    fn lp_with_zero_alpha_returns_labels() {
        let (s, _) = k3();
        let labels = LabelMatrix::new(&[0, 1, 0], 2, &[0, 1]).unwrap();
        let params = PropagationParams::linear(0.0).unwrap().with_iterations(7);
        assert_eq!(&lp_iterate(&s, &labels, &params).unwrap(), labels.matrix());
    }

    #[test]
    fn tensor_map_zero_and_k3() {
        let (_, tri) = k3();
        let zero = ScoreMatrix::zeros(3, 2);
        assert_eq!(tensor_map(&tri, &zero, MixingFunction::ArithmeticMean), zero);
        let out = tensor_map(&tri, &ones(3, 1), MixingFunction::ArithmeticMean);
        assert_eq!(out.as_slice(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn harmonic_fallback_counted() {
        let (_, tri) = k3();
        let f = ScoreMatrix::zeros(3, 1);
        let (out, undefined) = tensor_map_counted(&tri, &f, MixingFunction::Harmonic);
        assert_eq!(out.as_slice(), &[0.0; 3]);
        assert_eq!(undefined, 3);
    }

    #[test]
    fn nonlinear_map_k3_is_identity_on_ones() {
        let (_, tri) = k3();
        let out = nonlinear_map(&tri, &ones(3, 1), MixingFunction::ArithmeticMean);
        for &v in out.as_slice() {
            assert!((v - 1.0).abs() < 1e-15, "{v}");
        }
    }

    #[test]
    fn zero_hyperdegree_rows_vanish() {
        // triangle 0-1-2 plus a pendant node 3
        let g = Graph::from_edges(&[(0, 1), (1, 2), (0, 2), (2, 3)], None).unwrap();
        let tri = TriangleSet::enumerate(&g, TriangleWeight::Unit);
        let f = ScoreMatrix::from_rows(&[[1.0], [2.0], [3.0], [100.0]]).unwrap();
        let out = nonlinear_map(&tri, &f, MixingFunction::Maximum);
        assert_eq!(out.get(3, 0), 0.0);
    }

    #[test]
    fn phi_examples() {
        let (_, tri) = k3();
        assert_eq!(phi_norm(&tri, &[0.0; 3], MixingFunction::ArithmeticMean), 0.0);
        let p = phi_norm(&tri, &[1.0; 3], MixingFunction::ArithmeticMean);
        assert!((p - 0.5 * 3f64.sqrt()).abs() < 1e-12, "{p}");

        let path = Graph::from_edges(&[(0, 1), (1, 2)], None).unwrap();
        let tri = TriangleSet::enumerate(&path, TriangleWeight::Unit);
        assert_eq!(phi_norm(&tri, &[1.0, -2.0, 3.0], MixingFunction::Maximum), 0.0);
    }

    #[test]
    fn nhols_zero_weights_normalizes_labels() {
        let (s, tri) = k3();
        let labels = LabelMatrix::new(&[0, 1, 1], 2, &[0, 1]).unwrap();
        let params = PropagationParams::new(0.0, 0.0).unwrap().with_iterations(5);
        let f = nhols_iterate(&s, &tri, &labels, MixingFunction::ArithmeticMean, &params).unwrap();
        let phis = phi_columns(&tri, labels.matrix(), MixingFunction::ArithmeticMean);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(f.get(i, j), labels.matrix().get(i, j) / phis[j]);
            }
        }
        assert_eq!(predict_argmax(&f, labels.labeled()), vec![0, 1]);
    }

    #[test]
    fn nhols_rejects_triangle_free_graph() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], None).unwrap();
        let s = NormalizedAdjacency::new(&g);
        let tri = TriangleSet::enumerate(&g, TriangleWeight::Unit);
        let labels = LabelMatrix::new(&[0, 1, 1], 2, &[0, 1]).unwrap();
        let params = PropagationParams::new(0.5, 0.2).unwrap();
        let err = nhols_iterate(&s, &tri, &labels, MixingFunction::ArithmeticMean, &params);
        assert!(matches!(err, Err(Error::NoTriangles { .. })));
    }

    #[test]
    fn early_stop_halts_iteration() {
        let (s, _) = k3();
        let labels = LabelMatrix::new(&[0, 1, 1], 2, &[0, 1]).unwrap();
        let params = PropagationParams::linear(0.5)
            .unwrap()
            .with_iterations(10_000)
            .with_tolerance(Some(1e-8));
        let f = lp_iterate(&s, &labels, &params).unwrap();
        assert!(f.is_finite());
    }

    #[test]
    fn argmax_examples() {
        let f = ScoreMatrix::from_rows(&[vec![0.2, 0.5, 0.3], vec![0.5, 0.5, 0.0]]).unwrap();
        assert_eq!(predict_argmax(&f, &[0, 1]), vec![1, 0]);
    }

    #[test]
    fn label_matrix_rows() {
        let labels = LabelMatrix::new(&[2, 0, 1, 1], 3, &[0, 2]).unwrap();
        assert_eq!(labels.matrix().row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(labels.matrix().row(1), &[0.0; 3]);
        assert_eq!(labels.unlabeled(), &[1, 3]);
        assert!(LabelMatrix::new(&[0, 5], 2, &[1]).is_err());
    }
}
