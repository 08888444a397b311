//! Converter from the LINQS release format (`<name>.content` with
//! `id features... label` rows, `<name>.cites` with `cited citing` rows) to
//! the canonical dataset directory.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::strip_comment;

use super::{EDGES_FILE, FEATURES_FILE, LABELS_FILE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionSummary {
    pub nodes: usize,
    pub edges_written: usize,
    /// Citation rows naming a paper absent from the content file.
    pub dangling_citations: usize,
    pub classes: Vec<String>,
    pub feature_dim: usize,
}

/// Converts `content` and `cites` into `out/{edges,labels,features}.txt`
/// plus `classes.txt`. Nodes are numbered in content-file order and classes
/// in sorted name order; features are written in sparse form.
pub fn convert_linqs(content: &Path, cites: &Path, out: &Path) -> Result<ConversionSummary> {
    let content_text = fs::read_to_string(content).map_err(|e| Error::io(content, e))?;
    let cites_text = fs::read_to_string(cites).map_err(|e| Error::io(cites, e))?;

    let mut ids = HashMap::new();
    let mut rows = Vec::new();
    let mut feature_dim = None;
    for (k, line) in content_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(Error::Parse {
                path: content.to_path_buf(),
                line: k + 1,
                message: "expected `id features... label`".into(),
            });
        }
        let dim = toks.len() - 2;
        match feature_dim {
            None => feature_dim = Some(dim),
            Some(d) if d != dim => {
                return Err(Error::Parse {
                    path: content.to_path_buf(),
                    line: k + 1,
                    message: format!("expected {d} features, found {dim}"),
                })
            }
            _ => {}
        }
        if ids.insert(toks[0].to_owned(), rows.len()).is_some() {
            return Err(Error::Parse {
                path: content.to_path_buf(),
                line: k + 1,
                message: format!("paper `{}` listed twice", toks[0]),
            });
        }
        rows.push((toks[1..=dim].to_vec(), toks[dim + 1].to_owned()));
    }

    let classes: Vec<String> = rows
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_id: HashMap<&str, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let mut edges = BTreeSet::new();
    let mut dangling = 0;
    for line in cites_text.lines() {
        let line = strip_comment(line);
        let mut toks = line.split_whitespace();
        let (Some(a), Some(b)) = (toks.next(), toks.next()) else {
            continue;
        };
        match (ids.get(a), ids.get(b)) {
            (Some(&u), Some(&v)) if u != v => {
                edges.insert((u.min(v), u.max(v)));
            }
            (Some(_), Some(_)) => {}
            _ => dangling += 1,
        }
    }

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, text: String| {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    let mut text = String::new();
    for (u, v) in &edges {
        let _ = writeln!(text, "{u} {v}");
    }
    write(EDGES_FILE, text)?;
    let mut labels = String::new();
    let mut features = String::new();
    for (i, (values, label)) in rows.iter().enumerate() {
        let _ = writeln!(labels, "{i} {}", class_id[label.as_str()]);
        let _ = write!(features, "{i}");
        for (d, v) in values.iter().enumerate() {
            let value: f64 = v.parse().map_err(|_| Error::Parse {
                path: content.to_path_buf(),
                line: i + 1,
                message: format!("feature `{v}` is not a number"),
            })?;
            if value != 0.0 {
                let _ = write!(features, " {d}:{value}");
            }
        }
        features.push('\n');
    }
    write(LABELS_FILE, labels)?;
    write(FEATURES_FILE, features)?;
    let names: String = classes.iter().enumerate().map(|(i, c)| format!("{i} {c}\n")).collect();
    write("classes.txt", names)?;

    Ok(ConversionSummary {
        nodes: rows.len(),
        edges_written: edges.len(),
        dangling_citations: dangling,
        classes,
        feature_dim: feature_dim.unwrap_or(0),
    })
}
