//! Experiment harness: per-seed runs of every method, summaries over
//! seeds, grid search, and the analysis exports.

mod analysis;
mod grid;
mod output;

pub use analysis::{
    coefficient_binned_accuracy, margin_rows, pca, predicted_labels, timeline_eval, BinRow, BinSpec, MarginRow, Pca,
    TimelineRow,
};
pub use grid::{admissible_pairs, grid_search, GridCell, GridResult, GridTarget};
pub use output::{
    append_results, bins_csv, grid_csv, margins_csv, pca_csv, summary_csv, timeline_csv,
    write_text, RESULTS_HEADER,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{
    default_embedding_dim, fit, spectral_embedding, Classifier, Features, LinearSoftmax, Mlp,
    TrainConfig, TrainData,
};
use crate::data::{stratified_split, BaseModel, Dataset, ExperimentConfig, SeedStreams, SplitSpec};
use crate::error::{Error, Result};
use crate::graph::{NormalizedAdjacency, TriangleSet};
use crate::matrix::{argmax, ScoreMatrix};
use crate::nlcs::{linear_correct_and_smooth, Stages};
use crate::propagation::{lp_iterate, nhols_iterate, LabelMatrix};

/// Seed of the spectral embedding. It does not depend on the split, so one
/// embedding per dataset is shared by all seeds.
const EMBEDDING_SEED: u64 = 0x5EC7_0000;

/// Fraction of `mask` whose prediction matches the truth.
pub fn accuracy(predicted: &[usize], truth: &[usize], mask: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            context: "accuracy",
            expected: format!("{} predictions", truth.len()),
            actual: predicted.len().to_string(),
        });
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let hits = mask.iter().filter(|&&i| predicted[i] == truth[i]).count();
    Ok(hits as f64 / mask.len() as f64)
}

fn score_accuracy(scores: &ScoreMatrix, truth: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let hits = mask
        .iter()
        .filter(|&&i| argmax(scores.row(i)) == truth[i])
        .count();
    Ok(hits as f64 / mask.len() as f64)
}

/// Methods compared in the accuracy tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lp")]
    Lp,
    #[serde(rename = "nhols")]
    Nhols,
    #[serde(rename = "base")]
    Base,
    #[serde(rename = "base+cs")]
    BaseCs,
    #[serde(rename = "base+nlcs")]
    BaseNlcs,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lp,
        Method::Nhols,
        Method::Base,
        Method::BaseCs,
        Method::BaseNlcs,
    ];

    pub fn needs_base(self) -> bool {
        matches!(self, Method::Base | Method::BaseCs | Method::BaseNlcs)
    }

    /// Table label, e.g. `PL+NLCS`.
    pub fn tag(self, base: &BaseModel) -> String {
        let b = match base {
            BaseModel::Pl => "PL",
            BaseModel::Mlp => "MLP",
            BaseModel::File(_) => "FILE",
        };
        match self {
            Method::Lp => "LP".into(),
            Method::Nhols => "NHOLS".into(),
            Method::Base => b.into(),
            Method::BaseCs => format!("{b}+C&S"),
            Method::BaseNlcs => format!("{b}+NLCS"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Method::Lp),
            "nhols" => Ok(Method::Nhols),
            "base" => Ok(Method::Base),
            "base+cs" | "cs" => Ok(Method::BaseCs),
            "base+nlcs" | "nlcs" => Ok(Method::BaseNlcs),
            other => Err(Error::param(
                "method",
                format!("unknown method `{other}` (lp|nhols|base|base+cs|base+nlcs)"),
            )),
        }
    }
}

/// One (method, seed) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub dataset: String,
    pub k: f64,
    pub seed: u64,
    /// Test accuracy of the final prediction.
    pub accuracy: f64,
    pub validation_accuracy: f64,
    pub base_accuracy: Option<f64>,
    pub correction_accuracy: Option<f64>,
    pub smoothing_accuracy: Option<f64>,
    /// Not part of [`csv_row`](Self::csv_row), which stays reproducible.
    pub wall_time_ms: f64,
}

impl RunResult {
    /// Row matching [`RESULTS_HEADER`].
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.dataset,
            self.k,
            self.seed,
            self.accuracy,
            self.validation_accuracy,
            opt(self.base_accuracy),
            opt(self.correction_accuracy),
            opt(self.smoothing_accuracy)
        )
    }
}

/// Mean and sample standard deviation of one method's test accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub mean: f64,
    /// `n - 1` estimator; 0 for a single run.
    pub std: f64,
}

/// Groups results by method, in order of first appearance.
pub fn summarize(results: &[RunResult]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in results {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|m| {
            let acc: Vec<f64> = results
                .iter()
                .filter(|r| r.method == m)
                .map(|r| r.accuracy)
                .collect();
            let (mean, std) = mean_std(&acc);
            MethodSummary {
                method: m.to_owned(),
                runs: acc.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Graph operators and base-model inputs shared by every seed.
pub struct Workbench<'a> {
    pub dataset: &'a Dataset,
    pub config: &'a ExperimentConfig,
    pub adjacency: NormalizedAdjacency,
    pub triangles: TriangleSet,
    base_features: Option<Features>,
    file_scores: Option<ScoreMatrix>,
}

impl<'a> Workbench<'a> {
    pub fn new(dataset: &'a Dataset, config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let adjacency = NormalizedAdjacency::new(&dataset.graph);
        let triangles = TriangleSet::enumerate(&dataset.graph, config.triangle_weight);
        let n = dataset.num_nodes();
        let mut base_features = None;
        let mut file_scores = None;
        match &config.base {
            BaseModel::Pl => {
                let d = config
                    .embedding_dim
                    .unwrap_or_else(|| default_embedding_dim(dataset.classes, n));
                let emb = spectral_embedding(&adjacency, d, EMBEDDING_SEED)?;
                log::info!(
                    "{}: spectral embedding d={d}, converged={}, sweeps={}, residual={:.2e}",
                    dataset.name,
                    emb.converged,
                    emb.sweeps,
                    emb.residual
                );
                base_features = Some(Features::Dense(emb.features()));
            }
            BaseModel::Mlp => {
                if dataset.features.is_none() {
                    return Err(Error::Config(format!(
                        "base `mlp` needs node features, but {} has none",
                        dataset.name
                    )));
                }
            }
            BaseModel::File(path) => {
                let scores = ScoreMatrix::read_from(path)?;
                if scores.shape() != (n, dataset.classes) {
                    return Err(Error::ShapeMismatch {
                        context: "base prediction file",
                        expected: format!("{n} x {}", dataset.classes),
                        actual: format!("{} x {}", scores.rows(), scores.cols()),
                    });
                }
                file_scores = Some(scores);
            }
        }
        Ok(Self {
            dataset,
            config,
            adjacency,
            triangles,
            base_features,
            file_scores,
        })
    }

    /// Input rows of the trainable base model.
    pub fn model_features(&self) -> Option<&Features> {
        self.base_features.as_ref().or(self.dataset.features.as_ref())
    }

    pub fn split(&self, master_seed: u64) -> Result<SplitSpec> {
        let streams = SeedStreams::new(master_seed);
        stratified_split(&self.dataset.labels, self.dataset.classes, self.config.k, streams.split)
    }

    pub fn label_matrix(&self, split: &SplitSpec) -> Result<LabelMatrix> {
        LabelMatrix::new(&self.dataset.labels, self.dataset.classes, &split.train)
    }

    fn train_config(&self, master_seed: u64) -> TrainConfig {
        TrainConfig {
            seed: SeedStreams::new(master_seed).init,
            ..self.config.train
        }
    }

    /// Trains (or loads) the base model and returns scores for all nodes.
    /// `checkpoint` sees the scores after every epoch that is a multiple
    /// of `every`.
    pub fn base_prediction(
        &self,
        split: &SplitSpec,
        master_seed: u64,
        every: Option<(usize, &mut dyn FnMut(usize, ScoreMatrix))>,
    ) -> Result<ScoreMatrix> {
        if let Some(scores) = &self.file_scores {
            return Ok(scores.clone());
        }
        let x = self.model_features().expect("checked in new");
        let tc = self.train_config(master_seed);
        let data = TrainData {
            features: x,
            labels: &self.dataset.labels,
            train: &split.train,
            validation: &split.validation,
        };
        let c = self.dataset.classes;
        match self.config.base {
            BaseModel::Pl => train_and_predict(LinearSoftmax::new(x.cols(), c, tc.seed), &data, &tc, every),
            BaseModel::Mlp => {
                let m = Mlp::new(x.cols(), self.config.mlp.hidden, c, self.config.mlp.dropout, tc.seed);
                train_and_predict(m, &data, &tc, every)
            }
            BaseModel::File(_) => unreachable!("file scores returned above"),
        }
    }

    /// Linear correct-and-smooth stages on `base`.
    pub fn correct_and_smooth(&self, base: &ScoreMatrix, labels: &LabelMatrix) -> Result<Stages> {
        linear_correct_and_smooth(base, labels, &self.adjacency, &self.config.linear_cs_params()?)
    }

    /// Nonlinear correct-and-smooth stages on `base`.
    pub fn nlcs(&self, base: &ScoreMatrix, labels: &LabelMatrix) -> Result<Stages> {
        self.config
            .nlcs_config()?
            .run(base, labels, &self.adjacency, &self.triangles)
    }

    /// Everything one master seed produces.
    pub fn run_seed(&self, master_seed: u64, methods: &[Method]) -> Result<SeedRun> {
        let split = self.split(master_seed)?;
        let labels = self.label_matrix(&split)?;
        let truth = &self.dataset.labels;
        let mut results = Vec::new();
        let mut record = |method: Method,
                          scores: &ScoreMatrix,
                          stages: Option<(&ScoreMatrix, &Stages)>,
                          started: Instant|
         -> Result<()> {
            let stage_acc = |m: &ScoreMatrix| score_accuracy(m, truth, &split.test);
            let (base_accuracy, correction_accuracy, smoothing_accuracy) = match stages {
                Some((b, s)) => (
                    Some(stage_acc(b)?),
                    Some(stage_acc(&s.corrected)?),
                    Some(stage_acc(&s.smoothed)?),
                ),
                None => (None, None, None),
            };
            results.push(RunResult {
                method: method.tag(&self.config.base),
                dataset: self.dataset.name.clone(),
                k: self.config.k,
                seed: master_seed,
                accuracy: score_accuracy(scores, truth, &split.test)?,
                validation_accuracy: score_accuracy(scores, truth, &split.validation)?,
                base_accuracy,
                correction_accuracy,
                smoothing_accuracy,
                wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            });
            Ok(())
        };

        let mut base = None;
        let mut cs = None;
        let mut nlcs = None;
        for &method in methods {
            let started = Instant::now();
            match method {
                Method::Lp => {
                    let f = lp_iterate(&self.adjacency, &labels, &self.config.lp_params()?)?;
                    record(method, &f, None, started)?;
                }
                Method::Nhols => {
                    let f = nhols_iterate(
                        &self.adjacency,
                        &self.triangles,
                        &labels,
                        self.config.sigma,
                        &self.config.nhols_params()?,
                    )?;
                    record(method, &f, None, started)?;
                }
                Method::Base | Method::BaseCs | Method::BaseNlcs => {
                    if base.is_none() {
                        base = Some(self.base_prediction(&split, master_seed, None)?);
                    }
                    let b = base.as_ref().expect("set above");
                    match method {
                        Method::Base => record(method, b, None, started)?,
                        Method::BaseCs => {
                            let s = self.correct_and_smooth(b, &labels)?;
                            record(method, &s.smoothed, Some((b, &s)), started)?;
                            cs = Some(s);
                        }
                        _ => {
                            let s = self.nlcs(b, &labels)?;
                            record(method, &s.smoothed, Some((b, &s)), started)?;
                            nlcs = Some(s);
                        }
                    }
                }
            }
        }
        Ok(SeedRun {
            seed: master_seed,
            split,
            results,
            base,
            cs,
            nlcs,
        })
    }
}

fn train_and_predict<C: Classifier>(
    model: C,
    data: &TrainData<'_>,
    tc: &TrainConfig,
    every: Option<(usize, &mut dyn FnMut(usize, ScoreMatrix))>,
) -> Result<ScoreMatrix> {
    let all: Vec<usize> = (0..data.features.rows()).collect();
    let (model, report) = match every {
        Some((every, sink)) => {
            let mut obs = |epoch: usize, m: &C| {
                if epoch % every == 0 {
                    sink(epoch, m.predict(data.features, &all));
                }
            };
            fit(model, data, tc, Some(&mut obs))?
        }
        None => fit(model, data, tc, None)?,
    };
    log::debug!(
        "base model: best epoch {}, validation accuracy {:?}",
        report.best_epoch,
        report.best_validation_accuracy
    );
    Ok(model.predict(data.features, &all))
}

/// Outputs of one master seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub split: SplitSpec,
    pub results: Vec<RunResult>,
    pub base: Option<ScoreMatrix>,
    pub cs: Option<Stages>,
    pub nlcs: Option<Stages>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<SeedRun>,
    pub failures: Vec<SeedFailure>,
}

impl ExperimentOutcome {
    pub fn results(&self) -> Vec<RunResult> {
        self.runs.iter().flat_map(|r| r.results.iter().cloned()).collect()
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        summarize(&self.results())
    }
}

/// Runs `methods` for every seed of the config, seeds in parallel. A seed
/// whose run fails is recorded and the others continue.
pub fn run_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
    methods: &[Method],
) -> Result<ExperimentOutcome> {
    let bench = Workbench::new(dataset, config)?;
    let outcomes: Vec<std::result::Result<SeedRun, SeedFailure>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            bench.run_seed(seed, methods).map_err(|e| {
                log::error!("seed {seed} failed: {e}");
                SeedFailure {
                    seed,
                    error: e.to_string(),
                }
            })
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(ExperimentOutcome { runs, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts() {
        let truth = [0, 1, 1, 0];
        assert_eq!(accuracy(&[0, 1, 1, 0], &truth, &[0, 1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 1, 1], &truth, &[0, 1, 2, 3]).unwrap(), 0.5);
        assert_eq!(accuracy(&[1, 1, 1, 1], &truth, &[1, 2]).unwrap(), 1.0);
        assert!(matches!(accuracy(&[0], &[0], &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
    }

    #[test]
    fn method_tags() {
        assert_eq!(Method::BaseNlcs.tag(&BaseModel::Pl), "PL+NLCS");
        assert_eq!(Method::BaseCs.tag(&BaseModel::Mlp), "MLP+C&S");
        assert_eq!("nlcs".parse::<Method>().unwrap(), Method::BaseNlcs);
    }
}
