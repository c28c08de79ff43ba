//! Monte Carlo wavefunction unravelling of the Davies master equation, the
//! dense reference integrator it is checked against, and open-system sweeps.

mod ensemble;
mod oracle;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed::{target_indices, w_of_m0, PureState};
use crate::davies::DaviesModel;
use crate::error::{invalid, Result};
use crate::schedule::AnnealPath;
use crate::sweep::{SweepPoint, SweepResult};

pub use ensemble::{JumpKind, JumpRecord};
pub use oracle::{lindblad_oracle, DensityState, OracleOptions, OracleOutcome};

/// Trajectory-method settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McwfOptions {
    pub trajectories: usize,
    /// Target time step, ns; the actual step divides each path segment evenly.
    pub dt: f64,
    /// Seed of the point; trajectory `j` uses stream `j` of this seed.
    pub seed: u64,
    /// Trajectories advanced together; chunks may run in parallel.
    pub chunk: usize,
}

impl Default for McwfOptions {
    fn default() -> Self {
        McwfOptions {
            trajectories: 1000,
            dt: 0.01,
            seed: 0,
            chunk: 1024,
        }
    }
}

impl McwfOptions {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 2 {
            return Err(invalid("need at least two trajectories"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.chunk == 0 {
            return Err(invalid("chunk must be positive"));
        }
        Ok(())
    }
}

/// Per-trajectory end-of-run record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub p0: f64,
    pub jumps: usize,
    /// Population of the maximal-spin sector.
    pub top_sector: f64,
    /// Smallest population in the kept levels seen during the run.
    pub min_kept: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub k: usize,
    pub p0_mean: f64,
    pub p0_stderr: f64,
    pub top_sector: Estimate,
    pub jumps: Estimate,
    pub min_kept: f64,
    /// Number of trajectories per jump count.
    pub jump_histogram: BTreeMap<usize, usize>,
}

fn estimate(xs: impl Iterator<Item = f64> + Clone) -> Estimate {
    let k = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / k;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Estimate {
        mean,
        stderr: (var / k).sqrt(),
    }
}

/// Sample means with standard errors `std / sqrt(K)` (unbiased variance).
pub fn average(samples: &[TrajectorySample]) -> Result<EnsembleResult> {
    if samples.len() < 2 {
        return Err(invalid("averaging needs at least two trajectories"));
    }
    let p0 = estimate(samples.iter().map(|s| s.p0));
    let mut jump_histogram = BTreeMap::new();
    for s in samples {
        *jump_histogram.entry(s.jumps).or_insert(0) += 1;
    }
    Ok(EnsembleResult {
        k: samples.len(),
        p0_mean: p0.mean,
        p0_stderr: p0.stderr,
        top_sector: estimate(samples.iter().map(|s| s.top_sector)),
        jumps: estimate(samples.iter().map(|s| s.jumps as f64)),
        min_kept: samples.iter().map(|s| s.min_kept).fold(1.0, f64::min),
        jump_histogram,
    })
}

/// Runs `opts.trajectories` trajectories from `psi0` and returns the samples
/// in trajectory order.
pub fn run_samples(
    model: &DaviesModel,
    path: &AnnealPath,
    psi0: &PureState,
    opts: &McwfOptions,
) -> Result<Vec<TrajectorySample>> {
    opts.validate()?;
    path.validate()?;
    let targets = target_indices(&model.spec);
    let chunks: Vec<(usize, usize)> = (0..opts.trajectories)
        .step_by(opts.chunk)
        .map(|a| (a, (a + opts.chunk).min(opts.trajectories)))
        .collect();
    let parts = chunks
        .par_iter()
        .map(|&(a, b)| {
            let rngs = (a..b)
                .map(|j| trajectory_rng(opts.seed, j as u64))
                .collect();
            let mut ens = ensemble::Ensemble::new(model, psi0, rngs, false)?;
            ens.run(path, opts.dt)?;
            Ok(ens.samples(&targets))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Ensemble estimate of `P0` and companions.
pub fn run_ensemble(
    model: &DaviesModel,
    path: &AnnealPath,
    psi0: &PureState,
    opts: &McwfOptions,
) -> Result<EnsembleResult> {
    let samples = run_samples(model, path, psi0, opts)?;
    let res = average(&samples)?;
    if res.min_kept < 0.99 {
        log::warn!(
            "kept-level population fell to {:.4} (truncation too aggressive?)",
            res.min_kept
        );
    }
    Ok(res)
}

/// RNG of trajectory `index` for a given point seed.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed of sweep point `index` derived from a master seed.
pub fn point_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(u64::MAX - index);
    rng.next_u64()
}

#[derive(Clone, Debug)]
pub struct TrajectoryOutcome {
    /// Final normalized state in the working basis.
    pub state: PureState,
    pub jumps: Vec<JumpRecord>,
    pub p0: f64,
}

/// A single trajectory with its jump log. `seed` plays the role of the point
/// seed; the trajectory uses stream 0.
pub fn run_trajectory(
    model: &DaviesModel,
    path: &AnnealPath,
    psi0: &PureState,
    seed: u64,
    dt: f64,
) -> Result<TrajectoryOutcome> {
    path.validate()?;
    let mut ens = ensemble::Ensemble::new(model, psi0, vec![trajectory_rng(seed, 0)], true)?;
    ens.run(path, dt)?;
    let state = ens.state(0);
    let p0 = crate::closed::success_probability(&state, &model.spec);
    Ok(TrajectoryOutcome {
        state,
        jumps: ens.take_jumps(0),
        p0,
    })
}

/// Open-system `P0(s_inv)` sweep; point `i` (m0-major) uses seed
/// `point_seed(opts.seed, i)`.
pub fn sweep_open(
    model: &DaviesModel,
    tau: f64,
    t_pause: f64,
    m0s: &[f64],
    grid: &[f64],
    opts: &McwfOptions,
) -> Result<SweepResult> {
    if m0s.is_empty() || grid.is_empty() {
        return Err(invalid("sweep needs at least one m0 and one s_inv"));
    }
    opts.validate()?;
    let ws = m0s
        .iter()
        .map(|&m0| w_of_m0(model.spec.n, m0))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..ws.len())
        .flat_map(|a| (0..grid.len()).map(move |b| (a, b)))
        .collect();
    let points = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(a, b))| {
            let path = AnnealPath::reverse_paused(tau, grid[b], t_pause)?;
            let psi0 = PureState::dicke(model.representation(), ws[a])?;
            let o = McwfOptions {
                seed: point_seed(opts.seed, idx as u64),
                ..*opts
            };
            let r = run_ensemble(model, &path, &psi0, &o)?;
            Ok(SweepPoint {
                m0: m0s[a],
                s_inv: grid[b],
                p0: r.p0_mean,
                stderr: r.p0_stderr,
                k: r.k,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { points })
}
