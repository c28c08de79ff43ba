//! Sweep orchestration with one checkpoint file per point.

use std::path::{Path, PathBuf};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use revanneal_core::closed::w_of_m0;
use revanneal_core::davies::DaviesModel;
use revanneal_core::mcwf::{point_seed, run_ensemble, DensityState};
use revanneal_core::{
    evolve_unitary, lindblad_oracle, success_probability, AnnealPath, McwfOptions, OracleOptions,
    PureState, SweepPoint,
};

use crate::config::{Mode, Resolved};
use crate::CliError;

/// One unit of work: a single `(initial state, s_inv)` point.
#[derive(Clone, Copy, Debug)]
pub struct Job {
    /// Index used both for the point seed and the checkpoint name.
    pub index: usize,
    pub m0: f64,
    pub w: usize,
    pub s_inv: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    point: SweepPoint,
}

pub struct Checkpoints {
    dir: PathBuf,
    prefix: String,
    fingerprint: String,
}

impl Checkpoints {
    pub fn new(dir: &Path, prefix: &str, fingerprint: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Checkpoints {
            dir: dir.to_path_buf(),
            prefix: prefix.into(),
            fingerprint: fingerprint.into(),
        })
    }

    fn file(&self, index: usize) -> PathBuf {
        self.dir.join(format!("{}-{index:05}.json", self.prefix))
    }

    /// A stored point, if one exists for the same configuration.
    pub fn load(&self, index: usize) -> Option<SweepPoint> {
        let text = std::fs::read_to_string(self.file(index)).ok()?;
        let cp: Checkpoint = serde_json::from_str(&text).ok()?;
        (cp.fingerprint == self.fingerprint).then_some(cp.point)
    }

    pub fn store(&self, index: usize, point: &SweepPoint) -> Result<(), CliError> {
        let cp = Checkpoint {
            fingerprint: self.fingerprint.clone(),
            point: *point,
        };
        let path = self.file(index);
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(&cp)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

/// Jobs in `m0`-major order, matching the core sweep drivers' seeding.
pub fn jobs(n: usize, m0s: &[f64], grid: &[f64], first_index: usize) -> Result<Vec<Job>, CliError> {
    let mut out = Vec::new();
    for &m0 in m0s {
        let w = w_of_m0(n, m0)?;
        for &s_inv in grid {
            out.push(Job {
                index: first_index + out.len(),
                m0,
                w,
                s_inv,
            });
        }
    }
    Ok(out)
}

/// Evaluates one point.
pub fn evaluate(
    model: &DaviesModel,
    mode: Mode,
    r: &Resolved,
    job: &Job,
) -> Result<SweepPoint, CliError> {
    let solver = r.solver();
    let path = AnnealPath::reverse_paused(r.path().tau, job.s_inv, r.path().t_pause)?;
    let psi0 = PureState::dicke(model.representation(), job.w)?;
    let (p0, stderr, k) = match mode {
        Mode::Unitary => {
            let out = evolve_unitary(&model.spec, &path, &psi0, solver.tol)?;
            (success_probability(&out.state, &model.spec), 0.0, 0)
        }
        Mode::Oracle => {
            let rho0 = DensityState::from_pure(model, &psi0)?;
            let opts = OracleOptions {
                tol: solver.tol,
                ..OracleOptions::default()
            };
            (lindblad_oracle(model, &path, &rho0, &opts)?.p0, 0.0, 0)
        }
        Mode::Mcwf => {
            let opts = McwfOptions {
                trajectories: solver.trajectories,
                dt: solver.dt,
                seed: point_seed(solver.seed, job.index as u64),
                chunk: solver.chunk,
            };
            let e = run_ensemble(model, &path, &psi0, &opts)?;
            (e.p0_mean, e.p0_stderr, e.k)
        }
    };
    Ok(SweepPoint {
        m0: job.m0,
        s_inv: job.s_inv,
        p0,
        stderr,
        k,
    })
}

/// Runs `jobs`, reusing matching checkpoints; results come back in job order.
pub fn run_jobs(
    model: &DaviesModel,
    mode: Mode,
    r: &Resolved,
    jobs: &[Job],
    checkpoints: &Checkpoints,
) -> Result<Vec<SweepPoint>, CliError> {
    let resumed = jobs
        .iter()
        .filter(|j| checkpoints.load(j.index).is_some())
        .count();
    if resumed > 0 {
        info!("resuming: {resumed} of {} points already done", jobs.len());
    }
    jobs.par_iter()
        .map(|job| {
            if let Some(p) = checkpoints.load(job.index) {
                return Ok(p);
            }
            let p = evaluate(model, mode, r, job)?;
            debug!("m0 = {} s_inv = {}: P0 = {}", p.m0, p.s_inv, p.p0);
            checkpoints.store(job.index, &p)?;
            Ok(p)
        })
        .collect()
}
