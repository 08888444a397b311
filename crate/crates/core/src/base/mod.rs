//! Graph-agnostic base predictors.
//!
//! Two models, both trained full-batch on the labeled rows with manual
//! backpropagation:
//!
//! * [`LinearSoftmax`] on a spectral embedding of the normalized adjacency
//!   (the "plain linear" model);
//! * [`Mlp`], three linear layers with batch normalization, ReLU and
//!   dropout on node features.
//!
//! Training is single-threaded and fully determined by the seed; only
//! inference over many rows fans out across threads, row by row.

mod embedding;
mod features;
mod linear;
mod mlp;

pub use embedding::{default_embedding_dim, spectral_embedding, SpectralEmbedding};
pub use features::{Features, SparseRows};
pub use linear::LinearSoftmax;
pub use mlp::Mlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax, ScoreMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    GradientDescent,
    #[default]
    Adam,
}

/// Which checkpoint a training run returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSelection {
    /// Highest validation accuracy seen (earliest on ties).
    #[default]
    BestValidation,
    /// Parameters after the last epoch.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub optimizer: Optimizer,
    pub selection: ModelSelection,
    /// Validation accuracy is measured every this many epochs.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 0.01,
            weight_decay: 0.0,
            optimizer: Optimizer::Adam,
            selection: ModelSelection::BestValidation,
            eval_every: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::param("weight_decay", "must be >= 0"));
        }
        if self.eval_every == 0 {
            return Err(Error::param("eval_every", "must be >= 1"));
        }
        Ok(())
    }
}

/// Which parts of the forward pass behave as in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardMode {
    pub dropout: bool,
    /// Normalize with statistics of the current batch (and record them)
    /// instead of the stored ones.
    pub batch_statistics: bool,
}

impl ForwardMode {
    pub const TRAIN: ForwardMode = ForwardMode {
        dropout: true,
        batch_statistics: true,
    };
    pub const INFERENCE: ForwardMode = ForwardMode {
        dropout: false,
        batch_statistics: false,
    };
}

/// A differentiable softmax classifier over node features.
pub trait Classifier: Clone {
    fn params(&self) -> &[ScoreMatrix];
    fn params_mut(&mut self) -> &mut [ScoreMatrix];
    /// Whether each parameter receives weight decay.
    fn decays(&self) -> Vec<bool>;
    /// Mean cross-entropy over `rows` and its gradient.
    fn loss_and_grad(
        &mut self,
        x: &Features,
        rows: &[usize],
        targets: &[usize],
        mode: ForwardMode,
        rng: &mut ChaCha8Rng,
    ) -> (f64, Vec<ScoreMatrix>);
    /// Softmax scores for `rows` in inference mode.
    fn predict(&self, x: &Features, rows: &[usize]) -> ScoreMatrix;
}

/// Cross-entropy plus `weight_decay / 2 * |W|^2` on decayed parameters.
pub fn objective<C: Classifier>(
    model: &mut C,
    x: &Features,
    rows: &[usize],
    targets: &[usize],
    mode: ForwardMode,
    weight_decay: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<ScoreMatrix>) {
    let (mut loss, mut grads) = model.loss_and_grad(x, rows, targets, mode, rng);
    if weight_decay > 0.0 {
        for ((p, g), decays) in model.params().iter().zip(&mut grads).zip(model.decays()) {
            if decays {
                loss += 0.5 * weight_decay * p.as_slice().iter().map(|v| v * v).sum::<f64>();
                g.add_scaled(weight_decay, p);
            }
        }
    }
    (loss, grads)
}

/// Rows and labels used for fitting and checkpoint selection.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub features: &'a Features,
    /// Class of every node; only entries at `train` and `validation` are read.
    pub labels: &'a [usize],
    pub train: &'a [usize],
    pub validation: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_validation_accuracy: Option<f64>,
}

struct Adam {
    m: Vec<ScoreMatrix>,
    v: Vec<ScoreMatrix>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &[ScoreMatrix]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| ScoreMatrix::zeros(p.rows(), p.cols()))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [ScoreMatrix], grads: &[ScoreMatrix], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let it = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice());
            for (((p, &g), m), v) in it {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
            }
        }
    }
}

/// Fits `model` and returns the selected checkpoint.
///
/// `observer` sees the model after every epoch, before selection.
pub fn fit<C: Classifier>(
    mut model: C,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    mut observer: Option<&mut dyn FnMut(usize, &C)>,
) -> Result<(C, TrainReport)> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let targets: Vec<usize> = data.train.iter().map(|&i| data.labels[i]).collect();
    // dropout masks draw from their own stream so that init and masks are
    // independent of each other
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD20F_0A7C_5EED_0001);
    let mut adam = Adam::new(model.params());
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, C)> = None;

    for epoch in 1..=cfg.epochs {
        let (loss, grads) = objective(
            &mut model,
            data.features,
            data.train,
            &targets,
            ForwardMode::TRAIN,
            cfg.weight_decay,
            &mut rng,
        );
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
        match cfg.optimizer {
            Optimizer::Adam => adam.update(model.params_mut(), &grads, cfg.learning_rate),
            Optimizer::GradientDescent => {
                for (p, g) in model.params_mut().iter_mut().zip(&grads) {
                    p.add_scaled(-cfg.learning_rate, g);
                }
            }
        }

        let evaluate = cfg.selection == ModelSelection::BestValidation
            && !data.validation.is_empty()
            && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
        if evaluate {
            let acc = accuracy_on(&model, data.features, data.labels, data.validation);
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.clone()));
            }
        }
        if let Some(obs) = observer.as_mut() {
            obs(epoch, &model);
        }
    }

    let report_final = |losses| TrainReport {
        losses,
        best_epoch: cfg.epochs,
        best_validation_accuracy: None,
    };
    Ok(match best {
        Some((acc, epoch, m)) => (
            m,
            TrainReport {
                losses,
                best_epoch: epoch,
                best_validation_accuracy: Some(acc),
            },
        ),
        None => (model, report_final(losses)),
    })
}

/// Fraction of `rows` whose argmax prediction matches `labels`.
pub fn accuracy_on<C: Classifier>(
    model: &C,
    x: &Features,
    labels: &[usize],
    rows: &[usize],
) -> f64 {
    let scores = model.predict(x, rows);
    let hits = rows
        .iter()
        .enumerate()
        .filter(|&(r, &i)| argmax(scores.row(r)) == labels[i])
        .count();
    hits as f64 / rows.len() as f64
}

/// Row-wise softmax in place, shifted by the row max.
pub(crate) fn softmax_rows(m: &mut ScoreMatrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Mean cross-entropy of softmax `probs` and the gradient w.r.t. logits.
pub(crate) fn cross_entropy(probs: &ScoreMatrix, targets: &[usize]) -> (f64, ScoreMatrix) {
    let m = probs.rows() as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        loss -= probs.get(r, t).max(f64::MIN_POSITIVE).ln();
        let g = grad.row_mut(r);
        g[t] -= 1.0;
        g.iter_mut().for_each(|v| *v /= m);
    }
    (loss / m, grad)
}

/// PyTorch-style `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
pub(crate) fn uniform_init(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> ScoreMatrix {
    use rand::Rng;
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    ScoreMatrix::from_vec(rows, cols, data).expect("shape matches")
}

pub(crate) fn column_sums(m: &ScoreMatrix) -> ScoreMatrix {
    let mut out = ScoreMatrix::zeros(1, m.cols());
    for i in 0..m.rows() {
        for (o, &v) in out.row_mut(0).iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

pub(crate) fn add_row_bias(m: &mut ScoreMatrix, bias: &ScoreMatrix) {
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias.row(0)) {
            *v += b;
        }
    }
}
