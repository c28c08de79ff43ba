//! CSV, gnuplot and manifest writers. Floats use Rust's shortest round-trip
//! formatting, so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use revanneal_core::{SweepPoint, SweepResult};

use crate::CliError;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

/// `m0,s_inv,P0`
pub fn sweep_csv(path: &Path, res: &SweepResult) -> Result<(), CliError> {
    let mut s = String::from("m0,s_inv,P0\n");
    for p in &res.points {
        writeln!(s, "{},{},{}", p.m0, p.s_inv, p.p0).unwrap();
    }
    write(path, &s)
}

/// `m0,s_inv,P0,stderr,K`
pub fn results_csv(path: &Path, res: &SweepResult) -> Result<(), CliError> {
    let mut s = String::from("m0,s_inv,P0,stderr,K\n");
    for p in &res.points {
        writeln!(s, "{},{},{},{},{}", p.m0, p.s_inv, p.p0, p.stderr, p.k).unwrap();
    }
    write(path, &s)
}

/// Largest `P0` per `m0`.
pub fn maxima_csv(path: &Path, res: &SweepResult) -> Result<(), CliError> {
    let mut s = String::from("m0,s_inv,P0,stderr,K\n");
    for p in res.maxima() {
        writeln!(s, "{},{},{},{},{}", p.m0, p.s_inv, p.p0, p.stderr, p.k).unwrap();
    }
    write(path, &s)
}

/// `s,E0_GHz,...,gap_GHz`
pub fn spectrum_csv(path: &Path, rows: &[(f64, Vec<f64>)], gaps: &[f64]) -> Result<(), CliError> {
    let levels = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut s = String::from("s");
    for k in 0..levels {
        write!(s, ",E{k}_GHz").unwrap();
    }
    s.push_str(",gap_GHz\n");
    for ((x, e), g) in rows.iter().zip(gaps) {
        write!(s, "{x}").unwrap();
        for v in e {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{g}").unwrap();
    }
    write(path, &s)
}

/// Gnuplot data: one indexed block per `m0`, columns `s_inv P0 stderr`.
pub fn p0_dat(path: &Path, res: &SweepResult) -> Result<(), CliError> {
    let mut s = String::from("# s_inv P0 stderr\n");
    for (i, m0) in res.m0_values().into_iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        writeln!(s, "# m0 = {m0}").unwrap();
        for p in res.curve(m0) {
            writeln!(s, "{} {} {}", p.s_inv, p.p0, p.stderr).unwrap();
        }
    }
    write(path, &s)
}

/// Gnuplot data: `m0 maxP0 stderr s_inv`.
pub fn maxima_dat(path: &Path, res: &SweepResult) -> Result<(), CliError> {
    let mut s = String::from("# m0 max_P0 stderr s_inv\n");
    for p in res.maxima() {
        writeln!(s, "{} {} {} {}", p.m0, p.p0, p.stderr, p.s_inv).unwrap();
    }
    write(path, &s)
}

/// One row per `(n, model)`: the largest `P0` over the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelMax {
    pub n: usize,
    pub model: &'static str,
    pub point: SweepPoint,
}

pub fn compare_csv(path: &Path, rows: &[ModelMax]) -> Result<(), CliError> {
    let mut s = String::from("n,model,s_inv,P0,stderr,K\n");
    for r in rows {
        let p = &r.point;
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n, r.model, p.s_inv, p.p0, p.stderr, p.k
        )
        .unwrap();
    }
    write(path, &s)
}

/// `n,model,s_inv,P0,stderr,K` for every point.
pub fn compare_curves_csv(
    path: &Path,
    curves: &[(usize, &'static str, Vec<SweepPoint>)],
) -> Result<(), CliError> {
    let mut s = String::from("n,model,s_inv,P0,stderr,K\n");
    for (n, model, pts) in curves {
        for p in pts {
            writeln!(s, "{n},{model},{},{},{},{}", p.s_inv, p.p0, p.stderr, p.k).unwrap();
        }
    }
    write(path, &s)
}

/// Gnuplot data: one block per model, columns `n maxP0 stderr`.
pub fn compare_dat(path: &Path, rows: &[ModelMax]) -> Result<(), CliError> {
    let mut s = String::from("# n max_P0 stderr\n");
    for (i, model) in ["collective", "independent"].into_iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        writeln!(s, "# model = {model}").unwrap();
        for r in rows.iter().filter(|r| r.model == model) {
            writeln!(s, "{} {} {}", r.n, r.point.p0, r.point.stderr).unwrap();
        }
    }
    write(path, &s)
}

/// Pretty-printed JSON with a trailing newline.
pub fn json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}
