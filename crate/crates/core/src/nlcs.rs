//! Residual correction and smoothing on top of a base prediction.
//!
//! The nonlinear pipeline:
//!
//! 1. residuals on labeled rows, zero elsewhere;
//! 2. residual spreading `E <- a Smap(E) + b S E + (1 - a - b) T`;
//! 3. Autoscale: `lambda` is the mean L1 norm of the labeled residuals;
//! 4. correction `X'_i = X_i + lambda * E_i / |E_i|_1` for unlabeled rows;
//! 5. smoothing from `G_L = Y_L, G_U = X'_U` with
//!    `G <- (a Smap(G) + b S G + (1 - a - b) T) / phi(G)`.
//!
//! The linear baseline runs the same stages with the triangle term removed
//! and no phi normalization.
//!
//! Residuals are stored as truth minus prediction, `E_L = Y_L - X_L`, so
//! that adding the propagated residual moves a prediction towards the
//! labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NormalizedAdjacency, TriangleSet};
use crate::matrix::ScoreMatrix;
use crate::propagation::{
    check_finite, converged, normalize_by_phi, phi_columns, require_triangles, spread_step,
    LabelMatrix, MixingFunction, PropagationParams,
};

/// Where a base prediction came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionSource {
    PlainLinear,
    Mlp,
    File(String),
}

/// Class scores from a graph-agnostic model.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePrediction {
    pub scores: ScoreMatrix,
    pub source: PredictionSource,
}

impl BasePrediction {
    pub fn new(scores: ScoreMatrix, source: PredictionSource) -> Self {
        Self { scores, source }
    }

    /// Checks the softmax contract: entries in [0, 1], rows summing to 1.
    pub fn is_distribution(&self, tol: f64) -> bool {
        (0..self.scores.rows()).all(|i| {
            let row = self.scores.row(i);
            row.iter().all(|&v| (0.0..=1.0).contains(&v))
                && (row.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }
}

/// What the residual or smoothing recurrence teleports back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Teleport {
    /// The recurrence's own starting point (`E0` or `G0`).
    #[serde(alias = "error", alias = "residual")]
    Initial,
    /// The one-hot label matrix `Y`.
    #[serde(alias = "y")]
    Labels,
}

impl std::str::FromStr for Teleport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" | "initial" | "residual" => Ok(Teleport::Initial),
            "labels" | "y" => Ok(Teleport::Labels),
            other => Err(Error::param(
                "teleport",
                format!("unknown teleport `{other}` (error|labels)"),
            )),
        }
    }
}

impl std::fmt::Display for Teleport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Teleport::Initial => "initial",
            Teleport::Labels => "labels",
        })
    }
}

/// Initial residual matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualState {
    residuals: ScoreMatrix,
}

impl ResidualState {
    pub fn matrix(&self) -> &ScoreMatrix {
        &self.residuals
    }
}

/// `E_L = Y_L - X_L`, `E_U = 0`.
pub fn error_init(x: &ScoreMatrix, labels: &LabelMatrix) -> Result<ResidualState> {
    let y = labels.matrix();
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            context: "error_init",
            expected: format!("{:?}", y.shape()),
            actual: format!("{:?}", x.shape()),
        });
    }
    let mut residuals = ScoreMatrix::zeros(x.rows(), x.cols());
    for &i in labels.labeled() {
        for ((e, &yv), &xv) in residuals.row_mut(i).iter_mut().zip(y.row(i)).zip(x.row(i)) {
            *e = yv - xv;
        }
    }
    Ok(ResidualState { residuals })
}

/// Spreads the residuals for `params.iterations()` steps without
/// normalization.
pub fn residual_propagate(
    s: &NormalizedAdjacency,
    tri: &TriangleSet,
    initial: &ResidualState,
    labels: &LabelMatrix,
    sigma: MixingFunction,
    params: &PropagationParams,
    teleport: Teleport,
) -> Result<ScoreMatrix> {
    require_triangles(tri, params.alpha())?;
    let e0 = initial.matrix();
    let target = match teleport {
        Teleport::Initial => e0,
        Teleport::Labels => labels.matrix(),
    };
    let mut e = e0.clone();
    for iteration in 0..params.iterations() {
        let next = spread_step(s, tri, &e, target, sigma, params.alpha(), params.beta());
        check_finite(&next, "residual propagation", iteration)?;
        let done = converged(&e, &next, params.tolerance());
        e = next;
        if done {
            break;
        }
    }
    Ok(e)
}

/// Mean L1 norm of the labeled residual rows.
pub fn autoscale_lambda(initial: &ResidualState, labeled: &[usize]) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let total: f64 = labeled
        .iter()
        .map(|&i| initial.matrix().row(i).iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    Ok(total / labeled.len() as f64)
}

/// `X'_i = X_i + lambda * E_i / |E_i|_1` for each `i` in `unlabeled`.
///
/// Rows whose propagated residual is exactly zero are left as they are.
pub fn correct(
    x: &ScoreMatrix,
    propagated: &ScoreMatrix,
    lambda: f64,
    unlabeled: &[usize],
) -> ScoreMatrix {
    let mut out = x.clone();
    for &i in unlabeled {
        let e = propagated.row(i);
        let norm: f64 = e.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            continue;
        }
        let scale = lambda / norm;
        for (o, &ev) in out.row_mut(i).iter_mut().zip(e) {
            *o += scale * ev;
        }
    }
    out
}

/// Smoothing start: true labels on labeled rows, corrected scores elsewhere.
pub fn smoothing_init(corrected: &ScoreMatrix, labels: &LabelMatrix) -> ScoreMatrix {
    let mut g = corrected.clone();
    for &i in labels.labeled() {
        g.row_mut(i).copy_from_slice(labels.matrix().row(i));
    }
    g
}

/// Nonlinear smoothing `G <- (a Smap(G) + b S G + (1 - a - b) T) / phi(G)`.
pub fn smooth(
    corrected: &ScoreMatrix,
    labels: &LabelMatrix,
    s: &NormalizedAdjacency,
    tri: &TriangleSet,
    sigma: MixingFunction,
    params: &PropagationParams,
    teleport: Teleport,
) -> Result<ScoreMatrix> {
    require_triangles(tri, params.alpha())?;
    let g0 = smoothing_init(corrected, labels);
    let target = match teleport {
        Teleport::Labels => labels.matrix(),
        Teleport::Initial => &g0,
    };
    let mut g = g0.clone();
    for iteration in 0..params.iterations() {
        let phis = phi_columns(tri, &g, sigma);
        let mut next = spread_step(s, tri, &g, target, sigma, params.alpha(), params.beta());
        normalize_by_phi(&mut next, &phis, params.phi());
        check_finite(&next, "smoothing", iteration)?;
        let done = converged(&g, &next, params.tolerance());
        g = next;
        if done {
            break;
        }
    }
    Ok(g)
}

/// Intermediate and final matrices of a correct-and-smooth run.
#[derive(Debug, Clone, PartialEq)]
pub struct Stages {
    pub lambda: f64,
    pub propagated: ScoreMatrix,
    pub corrected: ScoreMatrix,
    pub smoothed: ScoreMatrix,
}

/// Configuration of the nonlinear correct-and-smooth pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlcsConfig {
    pub correction: PropagationParams,
    pub smoothing: PropagationParams,
    pub sigma: MixingFunction,
    pub residual_teleport: Teleport,
    pub smoothing_teleport: Teleport,
}

impl NlcsConfig {
    pub fn new(correction: PropagationParams, smoothing: PropagationParams) -> Self {
        Self {
            correction,
            smoothing,
            sigma: MixingFunction::default(),
            residual_teleport: Teleport::Initial,
            smoothing_teleport: Teleport::Labels,
        }
    }

    pub fn run(
        &self,
        x: &ScoreMatrix,
        labels: &LabelMatrix,
        s: &NormalizedAdjacency,
        tri: &TriangleSet,
    ) -> Result<Stages> {
        let e0 = error_init(x, labels)?;
        let propagated = residual_propagate(
            s,
            tri,
            &e0,
            labels,
            self.sigma,
            &self.correction,
            self.residual_teleport,
        )?;
        let lambda = autoscale_lambda(&e0, labels.labeled())?;
        let corrected = correct(x, &propagated, lambda, labels.unlabeled());
        let smoothed = smooth(
            &corrected,
            labels,
            s,
            tri,
            self.sigma,
            &self.smoothing,
            self.smoothing_teleport,
        )?;
        Ok(Stages {
            lambda,
            propagated,
            corrected,
            smoothed,
        })
    }
}

/// Parameters of the linear correct-and-smooth baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCsParams {
    pub correction_alpha: f64,
    pub smoothing_alpha: f64,
    pub iterations: usize,
}

impl LinearCsParams {
    pub fn new(correction_alpha: f64, smoothing_alpha: f64) -> Result<Self> {
        for (field, a) in [
            ("correction_alpha", correction_alpha),
            ("smoothing_alpha", smoothing_alpha),
        ] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::param(field, format!("must lie in (0, 1), got {a}")));
            }
        }
        Ok(Self {
            correction_alpha,
            smoothing_alpha,
            iterations: crate::propagation::DEFAULT_ITERATIONS,
        })
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

/// Linear correct-and-smooth: `E <- a S E + (1 - a) E0`, Autoscale,
/// correction, then `G <- a S G + (1 - a) G0`.
pub fn linear_correct_and_smooth(
    x: &ScoreMatrix,
    labels: &LabelMatrix,
    s: &NormalizedAdjacency,
    params: &LinearCsParams,
) -> Result<Stages> {
    // The linear stages are the alpha = 0 case of the spreading step, so an
    // empty triangle set is all that is needed.
    let no_triangles = TriangleSet::empty(s.num_nodes());
    let e0 = error_init(x, labels)?;
    let correction = PropagationParams::new(0.0, params.correction_alpha)?
        .with_iterations(params.iterations);
    let propagated = residual_propagate(
        s,
        &no_triangles,
        &e0,
        labels,
        MixingFunction::ArithmeticMean,
        &correction,
        Teleport::Initial,
    )?;
    let lambda = autoscale_lambda(&e0, labels.labeled())?;
    let corrected = correct(x, &propagated, lambda, labels.unlabeled());

    let g0 = smoothing_init(&corrected, labels);
    let mut g = g0.clone();
    let a = params.smoothing_alpha;
    for iteration in 0..params.iterations {
        let mut next = s.apply(&g);
        next.scale(a);
        next.add_scaled(1.0 - a, &g0);
        check_finite(&next, "linear smoothing", iteration)?;
        g = next;
    }
    Ok(Stages {
        lambda,
        propagated,
        corrected,
        smoothed: g,
    })
}
