//! Batch front-end for reverse-annealing sweeps: configuration, orchestration,
//! persistence and plot data.

pub mod config;
pub mod orchestrate;
pub mod output;

use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use revanneal_core::davies::{DaviesModel, DephasingModel};
use revanneal_core::hamiltonian::spectrum;
use revanneal_core::mcwf::point_seed;
use revanneal_core::units::rad_per_ns_to_ghz;
use revanneal_core::{min_gap_scan, BathSpec, ProblemSpec, Space, SweepPoint, SweepResult};

use config::{Command, Mode, Resolved, RunConfig};
use orchestrate::{Checkpoints, Job};
use output::ModelMax;

pub const WORKERS_ENV: &str = "REVANNEAL_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] revanneal_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// 1 for validation failures, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Serialize)]
struct SeedRecord {
    index: usize,
    n: usize,
    m0: f64,
    s_inv: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct GapRecord {
    n: usize,
    p: u32,
    s_delta: f64,
    gap_ghz: f64,
    degenerate: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: RunConfig,
    schedule_sha256: &'a str,
    fingerprint: String,
    s_inv_grid: &'a [f64],
    gap: Option<GapRecord>,
    point_seeds: Vec<SeedRecord>,
    files: Vec<&'static str>,
}

fn manifest<'a>(
    r: &'a Resolved,
    command: &'static str,
    gap: Option<GapRecord>,
    point_seeds: Vec<SeedRecord>,
    files: Vec<&'static str>,
) -> Manifest<'a> {
    let mut config = r.config.clone();
    config.output = PathBuf::from(".");
    if let Some(s) = config.solver.as_mut() {
        s.workers = None;
    }
    Manifest {
        tool: "revanneal",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        schedule_sha256: &r.schedule_sha256,
        fingerprint: r.fingerprint(),
        s_inv_grid: &r.grid,
        gap,
        point_seeds,
        files,
    }
}

/// Worker count from `REVANNEAL_WORKERS`, else the config, else all cores.
pub fn worker_count(cfg: &RunConfig) -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::Config(vec![format!(
                "{WORKERS_ENV}: expected a positive integer, got '{v}'"
            )])),
        },
        Err(_) => Ok(cfg.solver.as_ref().and_then(|s| s.workers)),
    }
}

fn in_pool<T: Send>(
    cfg: &RunConfig,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = worker_count(cfg)? {
        b = b.num_threads(k);
    }
    let pool = b.build().map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(f)
}

/// Loads and validates a config file for `cmd`.
pub fn prepare(path: &Path, cmd: Command) -> Result<Resolved, CliError> {
    let cfg = config::load(path)?;
    let r = config::validate(&cfg, cmd)?;
    worker_count(&r.config)?;
    Ok(r)
}

fn gap_record(spec: &ProblemSpec, r: &Resolved) -> Result<GapRecord, CliError> {
    let scan = min_gap_scan(spec, r.config.spectrum.scan_ds)?;
    Ok(GapRecord {
        n: spec.n,
        p: spec.p,
        s_delta: scan.s_min,
        gap_ghz: scan.gap_ghz(),
        degenerate: scan.degenerate,
    })
}

fn write_spectrum(spec: &ProblemSpec, r: &Resolved, out: &Path) -> Result<(), CliError> {
    let sp = &r.config.spectrum;
    let steps = (1.0 / sp.ds).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let rows = spectrum(spec, &grid, sp.levels)?;
    let gaps: Vec<f64> = grid
        .iter()
        .map(|&s| rad_per_ns_to_ghz(spec.gap_at(s)))
        .collect();
    output::spectrum_csv(&out.join("spectrum.csv"), &rows, &gaps)
}

/// `run`: the sweep described by the config.
pub fn run(r: &Resolved) -> Result<PathBuf, CliError> {
    let out = r.config.output.clone();
    std::fs::create_dir_all(&out)?;
    let mode = r.solver().mode.expect("validated mode");
    let spec = r.problem(r.n(), r.config.problem.space);
    let bath = r.bath().spec();
    let model = DaviesModel::new(&spec, &bath, r.solver().truncation)?;
    let jobs = orchestrate::jobs(r.n(), &r.path().m0, &r.grid, 0)?;
    let checkpoints = Checkpoints::new(&out.join("checkpoints"), "point", &r.fingerprint())?;
    info!("run: {} points, mode {mode:?}", jobs.len());
    let points = in_pool(&r.config, || {
        orchestrate::run_jobs(&model, mode, r, &jobs, &checkpoints)
    })?;
    let res = SweepResult { points };
    output::sweep_csv(&out.join("sweep.csv"), &res)?;
    output::results_csv(&out.join("results.csv"), &res)?;
    output::maxima_csv(&out.join("maxima.csv"), &res)?;
    output::p0_dat(&out.join("p0_vs_sinv.dat"), &res)?;
    output::maxima_dat(&out.join("max_vs_m0.dat"), &res)?;
    write_spectrum(&spec, r, &out)?;
    let seeds = seed_records(r, mode, &jobs, r.n());
    let m = manifest(
        r,
        "run",
        Some(gap_record(&spec, r)?),
        seeds,
        vec![
            "sweep.csv",
            "results.csv",
            "maxima.csv",
            "spectrum.csv",
            "p0_vs_sinv.dat",
            "max_vs_m0.dat",
        ],
    );
    output::json(&out.join("manifest.json"), &m)?;
    Ok(out)
}

fn seed_records(r: &Resolved, mode: Mode, jobs: &[Job], n: usize) -> Vec<SeedRecord> {
    if mode != Mode::Mcwf {
        return Vec::new();
    }
    jobs.iter()
        .map(|j| SeedRecord {
            index: j.index,
            n,
            m0: j.m0,
            s_inv: j.s_inv,
            seed: point_seed(r.solver().seed, j.index as u64),
        })
        .collect()
}

/// `gap-scan`: minimal gap and low-lying spectrum.
pub fn gap_scan(r: &Resolved) -> Result<(PathBuf, f64, f64), CliError> {
    let out = r.config.output.clone();
    std::fs::create_dir_all(&out)?;
    let spec = r.problem(r.n(), r.config.problem.space);
    let gap = gap_record(&spec, r)?;
    let (s, g) = (gap.s_delta, gap.gap_ghz);
    write_spectrum(&spec, r, &out)?;
    output::json(&out.join("gap.json"), &gap)?;
    let m = manifest(
        r,
        "gap-scan",
        Some(gap),
        Vec::new(),
        vec!["gap.json", "spectrum.csv"],
    );
    output::json(&out.join("manifest.json"), &m)?;
    Ok((out, s, g))
}

/// `compare-models`: per-`n` maximum of `P0` over the grid for collective
/// (symmetric sector) and independent (full space) dephasing.
pub fn compare_models(r: &Resolved) -> Result<(PathBuf, Vec<ModelMax>), CliError> {
    let out = r.config.output.clone();
    std::fs::create_dir_all(&out)?;
    let mode = r.solver().mode.expect("validated mode");
    let cmp = r.config.compare.as_ref().expect("validated compare");
    let checkpoints = Checkpoints::new(&out.join("checkpoints"), "compare", &r.fingerprint())?;
    let bath = r.bath();
    let mut curves: Vec<(usize, &'static str, Vec<SweepPoint>)> = Vec::new();
    let mut seeds = Vec::new();
    let mut next = 0;
    for &n in &cmp.n {
        let m0 = 1.0 - 2.0 * cmp.w0 as f64 / n as f64;
        for (name, model, space) in [
            ("collective", DephasingModel::Collective, Space::Dicke),
            ("independent", DephasingModel::Independent, Space::Full),
        ] {
            let spec = r.problem(n, space);
            let b = BathSpec {
                model,
                ..bath.spec()
            };
            let truncation = match model {
                DephasingModel::Collective => None,
                DephasingModel::Independent => r.compare_truncation(n),
            };
            let dm = DaviesModel::new(&spec, &b, truncation)?;
            let jobs: Vec<Job> = r
                .grid
                .iter()
                .enumerate()
                .map(|(i, &s_inv)| Job {
                    index: next + i,
                    m0,
                    w: cmp.w0,
                    s_inv,
                })
                .collect();
            next += jobs.len();
            info!("compare-models: n = {n}, {name}");
            let pts = in_pool(&r.config, || {
                orchestrate::run_jobs(&dm, mode, r, &jobs, &checkpoints)
            })?;
            seeds.extend(seed_records(r, mode, &jobs, n));
            curves.push((n, name, pts));
        }
    }
    let rows: Vec<ModelMax> = curves
        .iter()
        .map(|(n, model, pts)| ModelMax {
            n: *n,
            model,
            point: *pts
                .iter()
                .max_by(|a, b| a.p0.total_cmp(&b.p0))
                .expect("non-empty grid"),
        })
        .collect();
    output::compare_csv(&out.join("compare.csv"), &rows)?;
    output::compare_curves_csv(&out.join("compare_curves.csv"), &curves)?;
    output::compare_dat(&out.join("max_vs_n.dat"), &rows)?;
    let m = manifest(
        r,
        "compare-models",
        None,
        seeds,
        vec!["compare.csv", "compare_curves.csv", "max_vs_n.dat"],
    );
    output::json(&out.join("manifest.json"), &m)?;
    Ok((out, rows))
}

/// Number of points a validated config would compute.
pub fn point_count(r: &Resolved, cmd: Command) -> usize {
    match (cmd, &r.config.compare) {
        (Command::CompareModels, Some(c)) | (Command::Validate, Some(c)) => {
            2 * c.n.len() * r.grid.len()
        }
        _ => r.config.path.as_ref().map_or(0, |p| p.m0.len()) * r.grid.len(),
    }
}
