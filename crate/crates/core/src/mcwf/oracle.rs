//! Direct integration of the master equation for the density matrix.
//!
//! Collective and independent couplings both commute with qubit permutations,
//! so a permutation-invariant initial state stays of the form
//! `rho = sum_S rho_S (x) 1_{d_S}`; only the blocks `rho_S` are integrated.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closed::{target_indices, PureState};
use crate::davies::{DaviesBundle, DaviesModel};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::Space;
use crate::ode::{Dop853, OdeStats};
use crate::schedule::AnnealPath;
use crate::C64;

/// Largest working-space dimension accepted by the oracle.
pub const ORACLE_MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub tol: f64,
    /// Positivity is checked every this many accepted steps.
    pub check_every: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-9,
            check_every: 25,
        }
    }
}

/// Block form of a permutation-invariant density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    pub blocks: Vec<DMatrix<C64>>,
    pub mult: Vec<usize>,
}

impl DensityState {
    /// `|psi><psi|` for a state supported on single copies; accepted inputs are
    /// states in the maximal-spin sector (multiplicity one).
    pub fn from_pure(model: &DaviesModel, psi: &PureState) -> Result<Self> {
        let rep = model.representation();
        let mut blocks = Vec::new();
        for (k, sec) in rep.sectors.iter().enumerate() {
            let v: Vec<C64> = (0..sec.dim())
                .map(|i| psi.amplitudes[sec.index(i, 0)])
                .collect();
            if k > 0 && v.iter().any(|z| z.norm() > 0.0) {
                return Err(invalid(
                    "oracle initial states must lie in the maximal-spin sector",
                ));
            }
            blocks.push(DMatrix::from_fn(sec.dim(), sec.dim(), |i, j| {
                v[i] * v[j].conj()
            }));
        }
        Ok(DensityState {
            blocks,
            mult: rep.sectors.iter().map(|s| s.mult).collect(),
        })
    }

    /// `sum_S d_S tr rho_S`.
    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.mult)
            .map(|(b, &d)| d as f64 * b.trace().re)
            .sum()
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let h = (b + b.adjoint()) * C64::new(0.5, 0.0);
                h.symmetric_eigenvalues().min()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace distance `(1/2) ||rho - sigma||_1`.
    pub fn trace_distance(&self, other: &DensityState) -> f64 {
        0.5 * self
            .blocks
            .iter()
            .zip(&other.blocks)
            .zip(&self.mult)
            .map(|((a, b), &d)| {
                let diff = a - b;
                let h = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
                d as f64
                    * h.symmetric_eigenvalues()
                        .iter()
                        .map(|e| e.abs())
                        .sum::<f64>()
            })
            .sum::<f64>()
    }

    /// Population of the ferromagnetic target state(s).
    pub fn success_probability(&self, model: &DaviesModel) -> f64 {
        let top = model.representation().top();
        target_indices(&model.spec)
            .into_iter()
            .map(|idx| self.blocks[0][(idx - top.offset, idx - top.offset)].re)
            .sum()
    }

    fn flatten(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    fn unflatten(&mut self, y: &[C64]) {
        let mut o = 0;
        for b in &mut self.blocks {
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&y[o..o + n]);
            o += n;
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub state: DensityState,
    pub p0: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub stats: OdeStats,
}

impl OracleOutcome {
    pub fn positivity_ok(&self) -> bool {
        self.min_eigenvalue >= -1e-7
    }
}

/// Applies the generator to block-form `rho` given the bundle at the current `s`.
pub(crate) fn generator(b: &DaviesBundle, rho: &[DMatrix<C64>], out: &mut [DMatrix<C64>]) {
    let tilde: Vec<DMatrix<C64>> = rho
        .iter()
        .zip(&b.sectors)
        .map(|(r, e)| {
            let v = e.vectors.map(|x| C64::new(x, 0.0));
            v.transpose() * r * &v
        })
        .collect();
    let nl = b.level_count();
    let diag: Vec<f64> = (0..nl)
        .map(|l| {
            let k = b.sector_of[l];
            tilde[k][(l - b.level_offset[k], l - b.level_offset[k])].re
        })
        .collect();
    for (k, (t, e)) in tilde.iter().zip(&b.sectors).enumerate() {
        let o = b.level_offset[k];
        let d = t.nrows();
        let coh = &b.coherence[k];
        let mut dt = DMatrix::<C64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let (li, lj) = (o + i, o + j);
                let f = C64::new(
                    -0.5 * (b.decay[li] + b.decay[lj]) + coh[(i, j)],
                    -(b.shifted_energy(li) - b.shifted_energy(lj)),
                );
                dt[(i, j)] = f * t[(i, j)];
            }
            let gain: f64 = (0..nl)
                .filter(|&l| l != o + i)
                .map(|l| b.gain(o + i, l) * diag[l])
                .sum();
            dt[(i, i)] += gain;
        }
        let v = e.vectors.map(|x| C64::new(x, 0.0));
        out[k] = &v * dt * v.transpose();
    }
}

/// Integrates the master equation along `path` from `rho0`.
pub fn lindblad_oracle(
    model: &DaviesModel,
    path: &AnnealPath,
    rho0: &DensityState,
    opts: &OracleOptions,
) -> Result<OracleOutcome> {
    path.validate()?;
    let rep = model.representation();
    let dim = match rep.space {
        Space::Dicke => rep.len(),
        Space::Full => 1 << rep.n,
    };
    if dim > ORACLE_MAX_DIM {
        return Err(invalid(format!(
            "oracle is limited to dimension {ORACLE_MAX_DIM}, got {dim}"
        )));
    }
    if (rho0.trace() - 1.0).abs() > 1e-8 {
        return Err(invalid("initial density matrix must have unit trace"));
    }
    let solver = Dop853::with_tol(opts.tol);
    let mut state = rho0.clone();
    let mut y = state.flatten();
    let mut stats = OdeStats::default();
    let mut min_eig = state.min_eigenvalue();
    let mut h = None;
    let mut scratch_in = state.blocks.clone();
    let mut scratch_out = state.blocks.clone();
    let mut probe = state.clone();
    let mut count = 0usize;
    let mut failure: Option<Error> = None;
    let mut cached: Option<DaviesBundle> = None;
    for (t0, t1) in path.segments() {
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            let s = path.s_at(t);
            if cached.as_ref().is_none_or(|b| b.s != s) {
                match model.bundle(s) {
                    Ok(b) => cached = Some(b),
                    Err(e) => {
                        failure.get_or_insert(e);
                        dy.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                        return;
                    }
                }
            }
            let b = cached.as_ref().unwrap();
            let mut o = 0;
            for blk in scratch_in.iter_mut() {
                let n = blk.len();
                blk.as_mut_slice().copy_from_slice(&y[o..o + n]);
                o += n;
            }
            generator(b, &scratch_in, &mut scratch_out);
            let mut o = 0;
            for blk in &scratch_out {
                let n = blk.len();
                dy[o..o + n].copy_from_slice(blk.as_slice());
                o += n;
            }
        };
        let observe = |_t: f64, y: &[C64]| {
            count += 1;
            if count % opts.check_every == 0 {
                probe.unflatten(y);
                min_eig = min_eig.min(probe.min_eigenvalue());
            }
            Ok(())
        };
        let (st, last) = solver.integrate_observed(rhs, t0, t1, &mut y, h, observe)?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        stats += st;
        h = Some(last);
    }
    state.unflatten(&y);
    min_eig = min_eig.min(state.min_eigenvalue());
    if min_eig < -1e-7 {
        log::warn!("oracle positivity violated: min eigenvalue {min_eig:.3e}");
    }
    let trace_error = (state.trace() - 1.0).abs();
    let p0 = state.success_probability(model);
    Ok(OracleOutcome {
        state,
        p0,
        trace_error,
        min_eigenvalue: min_eig,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::davies::BathSpec;
    use crate::hamiltonian::ProblemSpec;
    use crate::schedule::ScheduleCurves;

    #[test]
    fn maximally_mixed_dicke_success_probability() {
        let spec = ProblemSpec::new(20, 3, ScheduleCurves::linear(), Space::Dicke).unwrap();
        let model = DaviesModel::new(&spec, &BathSpec::default(), None).unwrap();
        let rho = DensityState {
            blocks: vec![DMatrix::identity(21, 21) * C64::new(1.0 / 21.0, 0.0)],
            mult: vec![1],
        };
        assert!((rho.success_probability(&model) - 1.0 / 21.0).abs() < 1e-15);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity() {
        let spec = ProblemSpec::new(4, 3, ScheduleCurves::linear(), Space::Full).unwrap();
        for bath in [BathSpec::collective(), BathSpec::independent()] {
            let model = DaviesModel::new(&spec, &bath, None).unwrap();
            let b = model.bundle(0.4).unwrap();
            let rep = model.representation();
            let rho: Vec<DMatrix<C64>> = rep
                .sectors
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let a = DMatrix::from_fn(s.dim(), s.dim(), |i, j| {
                        C64::new((i + 2 * j + k) as f64 * 0.1, (i as f64 - j as f64) * 0.05)
                    });
                    &a * a.adjoint()
                })
                .collect();
            let mut out = rho.clone();
            generator(&b, &rho, &mut out);
            let tr: f64 = out
                .iter()
                .zip(&rep.sectors)
                .map(|(o, s)| s.mult as f64 * o.trace().re)
                .sum();
            let scale: f64 = rho.iter().map(|r| r.norm()).sum::<f64>()
                * b.decay.iter().fold(0.0f64, |a, &d| a.max(d));
            assert!(tr.abs() < 1e-12 * scale.max(1.0), "{tr}");
            for o in &out {
                assert!((o - o.adjoint()).norm() < 1e-10 * scale.max(1.0));
            }
        }
    }
}
