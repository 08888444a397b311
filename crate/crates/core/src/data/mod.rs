//! Datasets on disk, the stratified split, seeds and experiment configs.
//!
//! A dataset directory holds three plain-text files:
//!
//! * `edges.txt`: `i j [w]` per line, whitespace or tab separated;
//! * `labels.txt`: `node_id label_id` per line, one per node;
//! * `features.txt` (optional): `node_id v1 v2 ...` dense lines or
//!   `node_id dim:value ...` sparse lines.
//!
//! `#` starts a comment everywhere. Node ids are 0-based.

mod config;
mod convert;
mod split;

pub use config::{BaseModel, ExperimentConfig, GridConfig, LinearCsConfig, MlpConfig, StageConfig};
pub use convert::{convert_linqs, ConversionSummary};
pub use split::{derive_seed, stratified_split, SeedStreams, SplitSpec};

use std::fs;
use std::path::{Path, PathBuf};

use crate::base::{Features, SparseRows};
use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, Graph};
use crate::matrix::{strip_comment, ScoreMatrix};

pub const EDGES_FILE: &str = "edges.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const FEATURES_FILE: &str = "features.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Option<Features>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of nodes in each class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.classes];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Loads a dataset directory; the name is the directory's file name.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let labels_path = dir.join(LABELS_FILE);
    let (labels, classes) = read_labels(&labels_path)?;
    let n = labels.len();
    let edges = read_edges(&dir.join(EDGES_FILE))?;
    let graph = Graph::from_edges(&edges, Some(n))?;
    if graph.self_loops_dropped() > 0 {
        log::warn!("{}: dropped {} self-loops", dir.display(), graph.self_loops_dropped());
    }
    let features_path = dir.join(FEATURES_FILE);
    let features = if features_path.exists() {
        Some(read_features(&features_path, n)?)
    } else {
        None
    };
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    Ok(Dataset {
        name,
        graph,
        features,
        labels,
        classes,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_tok<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("`{tok}` is not a valid {what}")))
}

/// Reads an edge list. Lines are `i j` or `i j w`.
pub fn read_edges(path: &Path) -> Result<Vec<EdgeRecord>> {
    parse_edges(&read_text(path)?, path)
}

pub(crate) fn parse_edges(text: &str, path: &Path) -> Result<Vec<EdgeRecord>> {
    let mut edges = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let lineno = k + 1;
        let record = match toks.as_slice() {
            [u, v] => EdgeRecord::new(
                parse_tok(path, lineno, u, "node id")?,
                parse_tok(path, lineno, v, "node id")?,
            ),
            [u, v, w] => EdgeRecord::weighted(
                parse_tok(path, lineno, u, "node id")?,
                parse_tok(path, lineno, v, "node id")?,
                parse_tok(path, lineno, w, "weight")?,
            ),
            _ => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("expected `i j [w]`, found {} fields", toks.len()),
                ))
            }
        };
        edges.push(record);
    }
    Ok(edges)
}

/// Reads `node_id label_id` lines. Every node in `0..n` must appear exactly
/// once and label ids must cover `0..c` without gaps.
pub fn read_labels(path: &Path) -> Result<(Vec<usize>, usize)> {
    parse_labels(&read_text(path)?, path)
}

pub(crate) fn parse_labels(text: &str, path: &Path) -> Result<(Vec<usize>, usize)> {
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [node, label] = toks.as_slice() else {
            return Err(parse_err(path, k + 1, "expected `node_id label_id`"));
        };
        let node: usize = parse_tok(path, k + 1, node, "node id")?;
        let label: usize = parse_tok(path, k + 1, label, "label id")?;
        pairs.push((k + 1, node, label));
    }
    let n = pairs.iter().map(|&(_, v, _)| v + 1).max().unwrap_or(0);
    let mut labels = vec![usize::MAX; n];
    for &(line, node, label) in &pairs {
        if labels[node] != usize::MAX {
            return Err(parse_err(path, line, format!("node {node} labeled twice")));
        }
        labels[node] = label;
    }
    if let Some(missing) = labels.iter().position(|&l| l == usize::MAX) {
        return Err(parse_err(path, 0, format!("node {missing} has no label")));
    }
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut seen = vec![false; classes];
    labels.iter().for_each(|&l| seen[l] = true);
    if let Some(gap) = seen.iter().position(|&s| !s) {
        return Err(Error::UnknownLabel {
            label: gap,
            classes,
        });
    }
    Ok((labels, classes))
}

/// Reads a feature file for `n` nodes. Sparse format is chosen when any
/// value token contains `:`; its width is the largest dimension plus one.
pub fn read_features(path: &Path, n: usize) -> Result<Features> {
    parse_features(&read_text(path)?, path, n)
}

pub(crate) fn parse_features(text: &str, path: &Path, n: usize) -> Result<Features> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, strip_comment(l)))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.len() != n {
        return Err(Error::ShapeMismatch {
            context: "feature rows",
            expected: format!("{n} rows"),
            actual: format!("{} rows in {}", lines.len(), path.display()),
        });
    }
    let sparse = lines
        .iter()
        .any(|(_, l)| l.split_whitespace().skip(1).any(|t| t.contains(':')));
    let mut seen = vec![false; n];
    let mut node_of = |lineno: usize, tok: &str| -> Result<usize> {
        let node: usize = parse_tok(path, lineno, tok, "node id")?;
        if node >= n {
            return Err(parse_err(path, lineno, format!("node {node} out of range for {n} nodes")));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(parse_err(path, lineno, format!("node {node} appears twice")));
        }
        Ok(node)
    };

    if sparse {
        let mut rows = vec![Vec::new(); n];
        let mut width = 0;
        for &(lineno, line) in &lines {
            let mut toks = line.split_whitespace();
            let node = node_of(lineno, toks.next().unwrap_or_default())?;
            for tok in toks {
                let (dim, value) = tok
                    .split_once(':')
                    .ok_or_else(|| parse_err(path, lineno, format!("expected `dim:value`, found `{tok}`")))?;
                let dim: usize = parse_tok(path, lineno, dim, "dimension")?;
                let value: f64 = parse_tok(path, lineno, value, "number")?;
                width = width.max(dim + 1);
                rows[node].push((dim, value));
            }
        }
        Ok(Features::Sparse(SparseRows::from_rows(width, rows)?))
    } else {
        let mut width = None;
        let mut data = Vec::new();
        let mut order = Vec::with_capacity(n);
        for &(lineno, line) in &lines {
            let mut toks = line.split_whitespace();
            let node = node_of(lineno, toks.next().unwrap_or_default())?;
            let row = toks
                .map(|t| parse_tok::<f64>(path, lineno, t, "number"))
                .collect::<Result<Vec<_>>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("expected {w} values, found {}", row.len()),
                    ))
                }
                _ => {}
            }
            order.push((node, row));
        }
        order.sort_by_key(|(node, _)| *node);
        let width = width.unwrap_or(0);
        for (_, row) in order {
            data.extend(row);
        }
        Ok(Features::Dense(ScoreMatrix::from_vec(n, width, data)?))
    }
}

/// Writes labels in the canonical `node_id label_id` format.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let text: String = labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{i} {l}\n"))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Dataset directory from a config-relative path.
pub fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path.to_path_buf(),
    }
}
