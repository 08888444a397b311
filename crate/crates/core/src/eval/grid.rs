use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, score_accuracy, Workbench};
use crate::data::{Dataset, ExperimentConfig, SplitSpec, StageConfig};
use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;
use crate::propagation::{lp_iterate, nhols_iterate, LabelMatrix, PropagationParams};

/// Which parameters the grid varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridTarget {
    /// LP's alpha; only `beta = 0` cells are admissible.
    Lp,
    Nhols,
    /// One `(alpha, beta)` pair shared by correction and smoothing.
    Nlcs,
    /// Correction pair, smoothing held at its configured value.
    Correction,
    /// Smoothing pair, correction held at its configured value.
    Smoothing,
}

impl std::str::FromStr for GridTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(GridTarget::Lp),
            "nhols" => Ok(GridTarget::Nhols),
            "nlcs" => Ok(GridTarget::Nlcs),
            "correction" => Ok(GridTarget::Correction),
            "smoothing" => Ok(GridTarget::Smoothing),
            other => Err(Error::param(
                "target",
                format!("unknown grid target `{other}` (lp|nhols|nlcs|correction|smoothing)"),
            )),
        }
    }
}

/// Accuracies of one `(alpha, beta)` cell, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub validation: f64,
    pub test: f64,
    pub test_std: f64,
    /// Why the cell could not be evaluated, if it could not.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub target: GridTarget,
    /// Admissible cells, `alpha` then `beta` ascending.
    pub cells: Vec<GridCell>,
    /// Highest mean validation accuracy; ties go to the smaller alpha, then
    /// the smaller beta.
    pub best: Option<GridCell>,
}

struct SeedInputs {
    split: SplitSpec,
    labels: LabelMatrix,
    base: Option<ScoreMatrix>,
}

/// Pairs with `alpha + beta < 1` from the configured ranges.
pub fn admissible_pairs(alphas: &[f64], betas: &[f64], target: GridTarget) -> Vec<(f64, f64)> {
    let mut a: Vec<f64> = alphas.to_vec();
    let mut b: Vec<f64> = betas.to_vec();
    a.sort_by(f64::total_cmp);
    a.dedup();
    b.sort_by(f64::total_cmp);
    b.dedup();
    let mut out = Vec::new();
    for &alpha in &a {
        for &beta in &b {
            // slack keeps sums such as 0.3 + 0.7 on the excluded side
            if alpha + beta < 1.0 - 1e-9 && (target != GridTarget::Lp || beta == 0.0) {
                out.push((alpha, beta));
            }
        }
    }
    out
}

/// Evaluates every admissible pair of `config.grid` on every seed.
/// Selection uses validation accuracy only; test accuracy is reported.
pub fn grid_search(dataset: &Dataset, config: &ExperimentConfig, target: GridTarget) -> Result<GridResult> {
    let bench = Workbench::new(dataset, config)?;
    let needs_base = matches!(
        target,
        GridTarget::Nlcs | GridTarget::Correction | GridTarget::Smoothing
    );
    let inputs: Vec<SeedInputs> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let split = bench.split(seed)?;
            let labels = bench.label_matrix(&split)?;
            let base = if needs_base {
                Some(bench.base_prediction(&split, seed, None)?)
            } else {
                None
            };
            Ok(SeedInputs { split, labels, base })
        })
        .collect::<Result<_>>()?;

    let pairs = admissible_pairs(&config.grid.alphas, &config.grid.betas, target);
    let cells: Vec<GridCell> = pairs
        .par_iter()
        .map(|&(alpha, beta)| evaluate_cell(&bench, &inputs, target, alpha, beta))
        .collect();

    let mut best: Option<&GridCell> = None;
    for cell in cells.iter().filter(|c| c.error.is_none()) {
        if best.is_none_or(|b| cell.validation > b.validation) {
            best = Some(cell);
        }
    }
    let best = best.cloned();
    Ok(GridResult {
        target,
        cells,
        best,
    })
}

fn evaluate_cell(
    bench: &Workbench<'_>,
    inputs: &[SeedInputs],
    target: GridTarget,
    alpha: f64,
    beta: f64,
) -> GridCell {
    let cfg = bench.config;
    let truth = &bench.dataset.labels;
    let run = |seed: &SeedInputs| -> Result<(f64, f64)> {
        let stage = |s: &StageConfig| -> Result<PropagationParams> {
            Ok(PropagationParams::new(s.alpha, s.beta)?
                .with_iterations(cfg.t)
                .with_phi(cfg.phi))
        };
        let pair = StageConfig::new(alpha, beta);
        let scores = match target {
            GridTarget::Lp => lp_iterate(
                &bench.adjacency,
                &seed.labels,
                &PropagationParams::linear(alpha)?.with_iterations(cfg.t),
            )?,
            GridTarget::Nhols => nhols_iterate(
                &bench.adjacency,
                &bench.triangles,
                &seed.labels,
                cfg.sigma,
                &stage(&pair)?,
            )?,
            GridTarget::Nlcs | GridTarget::Correction | GridTarget::Smoothing => {
                let mut nlcs = cfg.nlcs_config()?;
                if target != GridTarget::Smoothing {
                    nlcs.correction = stage(&pair)?;
                }
                if target != GridTarget::Correction {
                    nlcs.smoothing = stage(&pair)?;
                }
                let base = seed.base.as_ref().expect("base computed for this target");
                nlcs.run(base, &seed.labels, &bench.adjacency, &bench.triangles)?
                    .smoothed
            }
        };
        Ok((
            score_accuracy(&scores, truth, &seed.split.validation)?,
            score_accuracy(&scores, truth, &seed.split.test)?,
        ))
    };
    match inputs.iter().map(run).collect::<Result<Vec<_>>>() {
        Ok(acc) => {
            let val: Vec<f64> = acc.iter().map(|a| a.0).collect();
            let test: Vec<f64> = acc.iter().map(|a| a.1).collect();
            let (test_mean, test_std) = mean_std(&test);
            GridCell {
                alpha,
                beta,
                validation: mean_std(&val).0,
                test: test_mean,
                test_std,
                error: None,
            }
        }
        Err(e) => GridCell {
            alpha,
            beta,
            validation: f64::NAN,
            test: f64::NAN,
            test_std: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}
