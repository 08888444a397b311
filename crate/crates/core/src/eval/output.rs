//! CSV renderings with fixed headers. Numbers use Rust's shortest
//! round-trip formatting so identical values give identical bytes.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::Path;

use super::{BinRow, GridResult, MarginRow, MethodSummary, Pca, RunResult, TimelineRow};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str = "method,dataset,k,seed,accuracy,validation_accuracy,base_accuracy,correction_accuracy,smoothing_accuracy";

/// Appends result rows to `path`, writing the header first if the file is
/// new or empty.
pub fn append_results(path: &Path, results: &[RunResult]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut text = String::new();
    if fresh {
        text.push_str(RESULTS_HEADER);
        text.push('\n');
    }
    for r in results {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(rows: &[MethodSummary]) -> String {
    let mut out = String::from("method,runs,mean,std\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.method, r.runs, r.mean, r.std);
    }
    out
}

pub fn grid_csv(grid: &GridResult) -> String {
    let mut out = String::from("alpha,beta,validation,test,test_std,error\n");
    for c in &grid.cells {
        let (v, t, s) = if c.error.is_some() {
            (String::new(), String::new(), String::new())
        } else {
            (c.validation.to_string(), c.test.to_string(), c.test_std.to_string())
        };
        let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(out, "{},{},{v},{t},{s},{err}", c.alpha, c.beta);
    }
    out
}

pub fn bins_csv(rows: &[BinRow]) -> String {
    let mut out = String::from("stage,lower,upper,count,accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.stage,
            r.lower,
            r.upper,
            r.count,
            opt(r.accuracy)
        );
    }
    out
}

pub fn margins_csv(rows: &[MarginRow]) -> String {
    let mut out = String::from("stage,node,label,margin\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.stage, r.node, r.label, r.margin);
    }
    out
}

/// Per-node coordinates and label, preceded by `#` lines listing the
/// explained variance of each component.
pub fn pca_csv(p: &Pca, labels: &[usize]) -> String {
    let k = p.projections.cols();
    let mut out = String::new();
    for (j, v) in p.explained_variance.iter().enumerate() {
        let _ = writeln!(out, "# explained_variance pc{} {v}", j + 1);
    }
    out.push_str("node,label");
    for j in 0..k {
        let _ = write!(out, ",pc{}", j + 1);
    }
    out.push('\n');
    for i in 0..p.projections.rows() {
        let _ = write!(out, "{i},{}", labels[i]);
        for v in p.projections.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn timeline_csv(rows: &[TimelineRow]) -> String {
    let mut out = String::from("epoch,base,correction,nlcs,cs\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.epoch, r.base, r.correction, r.nlcs, r.cs);
    }
    out
}
