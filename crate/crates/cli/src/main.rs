use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nlcs_core::data::{convert_linqs, load_dataset, BaseModel, Dataset, ExperimentConfig};
use nlcs_core::eval::{
    self, append_results, coefficient_binned_accuracy, grid_search, margin_rows, pca,
    predicted_labels, run_experiment, timeline_eval, BinSpec, GridTarget, Method, Workbench,
};
use nlcs_core::graph::clustering_coefficients;
use nlcs_core::{MixingFunction, ScoreMatrix, Teleport};

#[derive(Parser)]
#[command(name = "nlcs", version, about = "Nonlinear correct-and-smooth experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method for every seed and report mean +- std.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of lp,nhols,base,base+cs,base+nlcs.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        /// Also write base scores and splits of every seed.
        #[arg(long)]
        export_predictions: bool,
    },
    /// Search the (alpha, beta) grid on validation accuracy.
    Grid {
        #[command(flatten)]
        common: Common,
        /// lp | nhols | nlcs | correction | smoothing
        #[arg(long, default_value = "nlcs")]
        target: GridTarget,
    },
    /// Test accuracy per clustering-coefficient bin.
    Bins {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.1)]
        bin_width: f64,
        #[arg(long, default_value_t = 6)]
        bin_count: usize,
    },
    /// Score margins between two classes for each pipeline stage.
    Margins {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Class pair, e.g. `0,1`.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        classes: Vec<usize>,
    },
    /// PCA projection of one stage's score matrix.
    Pca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// base | correction | nlcs | cs
        #[arg(long, default_value = "nlcs")]
        stage: String,
        #[arg(long, default_value_t = 2)]
        components: usize,
    },
    /// Apply correct-and-smooth to base-model checkpoints during training.
    Timeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        every: usize,
    },
    /// Convert a public release into the canonical dataset files.
    Convert {
        /// Only `linqs` (`.content` + `.cites`) is built in; see scripts/
        /// for the other formats.
        #[arg(long, default_value = "linqs")]
        format: String,
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config file plus flag overrides, shared by the experiment commands.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    k: Option<f64>,
    /// `0..10` or `0,3,7`.
    #[arg(long)]
    seeds: Option<String>,
    /// Alpha of NHOLS and of both nonlinear stages.
    #[arg(long)]
    alpha: Option<f64>,
    /// Beta of NHOLS and of both nonlinear stages.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lp_alpha: Option<f64>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    sigma: Option<MixingFunction>,
    /// pl | mlp | file:<path>
    #[arg(long)]
    base: Option<BaseModel>,
    /// Residual teleport: error | labels
    #[arg(long)]
    teleport: Option<Teleport>,
    /// Smoothing teleport: labels | initial
    #[arg(long)]
    smoothing_teleport: Option<Teleport>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range `{s}`");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
        .collect()
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), _) => ExperimentConfig::load(path)
                .with_context(|| format!("loading {}", path.display()))?,
            (None, Some(ds)) => ExperimentConfig::new(ds, self.k.unwrap_or(0.05)),
            (None, None) => bail!("either --config or --dataset is required"),
        };
        if let Some(ds) = &self.dataset {
            cfg.dataset = ds.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        for stage in [&mut cfg.nhols, &mut cfg.correction, &mut cfg.smoothing] {
            if let Some(a) = self.alpha {
                stage.alpha = a;
            }
            if let Some(b) = self.beta {
                stage.beta = b;
            }
        }
        if let Some(a) = self.lp_alpha {
            cfg.lp.alpha = a;
        }
        if let Some(t) = self.t {
            cfg.t = t;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        if let Some(b) = &self.base {
            cfg.base = b.clone();
        }
        if let Some(t) = self.teleport {
            cfg.correction.teleport = Some(t);
        }
        if let Some(t) = self.smoothing_teleport {
            cfg.smoothing.teleport = Some(t);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn prepare(&self) -> Result<(ExperimentConfig, Dataset)> {
        let cfg = self.config()?;
        let ds = load_dataset(&cfg.dataset)
            .with_context(|| format!("loading dataset {}", cfg.dataset.display()))?;
        log::info!(
            "{}: {} nodes, {} edges, {} classes",
            ds.name,
            ds.num_nodes(),
            ds.graph.num_edges(),
            ds.classes
        );
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok((cfg, ds))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    eval::write_text(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Base, correction and smoothing matrices of one seed.
struct StageMatrices {
    test: Vec<usize>,
    base: ScoreMatrix,
    correction: ScoreMatrix,
    nlcs: ScoreMatrix,
    cs: ScoreMatrix,
}

fn stages_for_seed(cfg: &ExperimentConfig, ds: &Dataset, seed: Option<u64>) -> Result<StageMatrices> {
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let bench = Workbench::new(ds, cfg)?;
    let run = bench.run_seed(seed, &[Method::BaseCs, Method::BaseNlcs])?;
    let nlcs = run.nlcs.expect("nlcs requested");
    Ok(StageMatrices {
        test: run.split.test,
        base: run.base.expect("base requested"),
        correction: nlcs.corrected,
        nlcs: nlcs.smoothed,
        cs: run.cs.expect("cs requested").smoothed,
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            common,
            methods,
            export_predictions,
        } => {
            let (cfg, ds) = common.prepare()?;
            let methods = if methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                methods
            };
            let outcome = run_experiment(&ds, &cfg, &methods)?;
            let out = &common.out;
            append_results(&out.join("results.csv"), &outcome.results())?;
            write(&out.join("config.json"), &cfg.to_json())?;
            let summary = outcome.summary();
            write(&out.join("summary.csv"), &eval::summary_csv(&summary))?;
            let mut timings = String::from("method,seed,wall_time_ms\n");
            for r in outcome.results() {
                timings.push_str(&format!("{},{},{:.3}\n", r.method, r.seed, r.wall_time_ms));
            }
            write(&out.join("timings.csv"), &timings)?;
            if export_predictions {
                for r in &outcome.runs {
                    if let Some(b) = &r.base {
                        b.write_to(&out.join(format!("base-seed{}.txt", r.seed)))?;
                    }
                    let split = out.join(format!("split-seed{}.json", r.seed));
                    eval::write_text(&split, &r.split.to_json())?;
                }
            }
            println!("{:<12} {:>5} {:>8} {:>7}", "method", "runs", "mean%", "std");
            for s in &summary {
                println!(
                    "{:<12} {:>5} {:>8.2} {:>7.2}",
                    s.method,
                    s.runs,
                    100.0 * s.mean,
                    100.0 * s.std
                );
            }
            for f in &outcome.failures {
                eprintln!("seed {} failed: {}", f.seed, f.error);
            }
            Ok(outcome.failures.is_empty())
        }
        Command::Grid { common, target } => {
            let (cfg, ds) = common.prepare()?;
            let grid = grid_search(&ds, &cfg, target)?;
            write(&common.out.join("grid.csv"), &eval::grid_csv(&grid))?;
            match &grid.best {
                Some(b) => println!(
                    "best alpha={} beta={}: validation {:.2}%, test {:.2}% +- {:.2}",
                    b.alpha,
                    b.beta,
                    100.0 * b.validation,
                    100.0 * b.test,
                    100.0 * b.test_std
                ),
                None => println!("no admissible cell could be evaluated"),
            }
            Ok(grid.cells.iter().all(|c| c.error.is_none()))
        }
        Command::Bins {
            common,
            seed,
            bin_width,
            bin_count,
        } => {
            let (cfg, ds) = common.prepare()?;
            let st = stages_for_seed(&cfg, &ds, seed)?;
            let tri = nlcs_core::TriangleSet::enumerate(&ds.graph, nlcs_core::TriangleWeight::Unit);
            let coeffs = clustering_coefficients(&ds.graph, &tri);
            let (b, c, n) = (
                predicted_labels(&st.base),
                predicted_labels(&st.cs),
                predicted_labels(&st.nlcs),
            );
            let stages: [(&str, &[usize]); 3] = [("base", &b), ("cs", &c), ("nlcs", &n)];
            let rows = coefficient_binned_accuracy(
                &coeffs,
                &st.test,
                &ds.labels,
                &stages,
                BinSpec {
                    width: bin_width,
                    count: bin_count,
                },
            )?;
            write(&common.out.join("bins.csv"), &eval::bins_csv(&rows))?;
            Ok(true)
        }
        Command::Margins {
            common,
            seed,
            classes,
        } => {
            let [a, b] = classes.as_slice() else {
                bail!("--classes takes exactly two class ids");
            };
            let (cfg, ds) = common.prepare()?;
            let st = stages_for_seed(&cfg, &ds, seed)?;
            let stages = [
                ("base", &st.base),
                ("correction", &st.correction),
                ("nlcs", &st.nlcs),
            ];
            let rows = margin_rows(&stages, &st.test, &ds.labels, (*a, *b))?;
            write(&common.out.join("margins.csv"), &eval::margins_csv(&rows))?;
            Ok(true)
        }
        Command::Pca {
            common,
            seed,
            stage,
            components,
        } => {
            let (cfg, ds) = common.prepare()?;
            let st = stages_for_seed(&cfg, &ds, seed)?;
            let m = match stage.as_str() {
                "base" => &st.base,
                "correction" => &st.correction,
                "nlcs" => &st.nlcs,
                "cs" => &st.cs,
                other => bail!("unknown stage `{other}` (base|correction|nlcs|cs)"),
            };
            let p = pca(m, components)?;
            write(
                &common.out.join(format!("pca-{stage}.csv")),
                &eval::pca_csv(&p, &ds.labels),
            )?;
            Ok(true)
        }
        Command::Timeline {
            common,
            seed,
            every,
        } => {
            let (cfg, ds) = common.prepare()?;
            let bench = Workbench::new(&ds, &cfg)?;
            let rows = timeline_eval(&bench, seed.unwrap_or(cfg.seeds[0]), every)?;
            write(&common.out.join("timeline.csv"), &eval::timeline_csv(&rows))?;
            Ok(true)
        }
        Command::Convert {
            format,
            content,
            cites,
            out,
        } => {
            if format != "linqs" {
                bail!("unsupported format `{format}`; see scripts/ for converters");
            }
            let s = convert_linqs(&content, &cites, &out)?;
            println!(
                "{} nodes, {} edges, {} classes, {} features, {} dangling citations skipped",
                s.nodes,
                s.edges_written,
                s.classes.len(),
                s.feature_dim,
                s.dangling_citations
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
