//! Closed-system (Schrödinger) evolution along an annealing path.

use log::debug;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::hamiltonian::ProblemSpec;
use crate::ode::{Dop853, OdeStats};
use crate::operators::{DickeSector, Representation};
use crate::schedule::AnnealPath;
use crate::sweep::{SweepPoint, SweepResult};
use crate::C64;

/// State vector in the working (sector-block) basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
}

impl PureState {
    /// The symmetric basis state `|w>`.
    pub fn dicke(rep: &Representation, w: usize) -> Result<Self> {
        if w > rep.n {
            return Err(invalid(format!("w = {w} exceeds n = {}", rep.n)));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); rep.len()];
        amplitudes[rep.symmetric_index(w)] = C64::new(1.0, 0.0);
        Ok(PureState { amplitudes })
    }

    /// `|w>` with `m0 = 1 - 2w/n`.
    pub fn from_m0(spec: &ProblemSpec, m0: f64) -> Result<Self> {
        let w = w_of_m0(spec.n, m0)?;
        Self::dicke(spec.representation(), w)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
    }
}

/// Dicke index for an initial magnetization.
pub fn w_of_m0(n: usize, m0: f64) -> Result<usize> {
    DickeSector { n }
        .w_of_m0(m0)
        .ok_or_else(|| invalid(format!("m0 = {m0} does not give an integer w for n = {n}")))
}

/// Working-basis indices of the ferromagnetic target states: `|w=0>`, plus
/// `|w=n>` for even `p`.
pub fn target_indices(spec: &ProblemSpec) -> Vec<usize> {
    let rep = spec.representation();
    let mut out = vec![rep.symmetric_index(0)];
    if spec.p % 2 == 0 {
        out.push(rep.symmetric_index(spec.n));
    }
    out
}

/// Population of the ferromagnetic ground state(s).
pub fn success_probability(psi: &PureState, spec: &ProblemSpec) -> f64 {
    let total = psi.norm_sqr();
    let hit: f64 = target_indices(spec)
        .into_iter()
        .map(|i| psi.amplitudes[i].norm_sqr())
        .sum();
    if total > 0.0 {
        hit / total
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryOutcome {
    pub state: PureState,
    /// Largest `| ||psi||^2 - 1 |` seen at a segment end before renormalization.
    pub norm_drift: f64,
    pub stats: OdeStats,
}

/// Right-hand side `-i H(s(t)) psi` in the sector-block layout.
pub(crate) struct SchrodingerRhs<'a> {
    spec: &'a ProblemSpec,
    path: &'a AnnealPath,
    /// `n (S_z/n)^p` per sector level.
    zp: Vec<Vec<f64>>,
}

impl<'a> SchrodingerRhs<'a> {
    pub(crate) fn new(spec: &'a ProblemSpec, path: &'a AnnealPath) -> Self {
        let nf = spec.n as f64;
        let zp = spec
            .representation()
            .sectors
            .iter()
            .map(|sec| {
                sec.sz
                    .iter()
                    .map(|&z| nf * (z / nf).powi(spec.p as i32))
                    .collect()
            })
            .collect();
        SchrodingerRhs { spec, path, zp }
    }

    pub(crate) fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (cx, cz) = self.spec.coefficients(self.path.s_at(t));
        let mi = C64::new(0.0, -1.0);
        for (sec, zp) in self.spec.representation().sectors.iter().zip(&self.zp) {
            let d = sec.dim();
            for a in 0..sec.mult {
                let base = sec.offset + a * d;
                let v = &y[base..base + d];
                let out = &mut dy[base..base + d];
                for j in 0..d {
                    let mut acc = v[j] * (cz * zp[j]);
                    if j > 0 {
                        acc += v[j - 1] * (cx * sec.sx_off[j - 1]);
                    }
                    if j + 1 < d {
                        acc += v[j + 1] * (cx * sec.sx_off[j]);
                    }
                    out[j] = mi * acc;
                }
            }
        }
    }
}

/// Integrates `i dpsi/dt = H(s(t)) psi` over the whole path, one linear piece
/// of `s(t)` at a time, renormalizing at each piece boundary.
pub fn evolve_unitary(
    spec: &ProblemSpec,
    path: &AnnealPath,
    psi0: &PureState,
    tol: f64,
) -> Result<UnitaryOutcome> {
    path.validate()?;
    if psi0.amplitudes.len() != spec.representation().len() {
        return Err(invalid("initial state has the wrong dimension"));
    }
    if (psi0.norm_sqr() - 1.0).abs() > 1e-8 {
        return Err(invalid("initial state is not normalized"));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let rhs = SchrodingerRhs::new(spec, path);
    let solver = Dop853::with_tol(tol);
    let mut psi = psi0.clone();
    let mut stats = OdeStats::default();
    let mut drift: f64 = 0.0;
    let mut h = None;
    for (t0, t1) in path.segments() {
        let (st, last) = solver.integrate(
            |t, y, dy| rhs.eval(t, y, dy),
            t0,
            t1,
            &mut psi.amplitudes,
            h,
        )?;
        h = Some(last);
        stats += st;
        drift = drift.max((psi.norm_sqr() - 1.0).abs());
        psi.normalize();
    }
    debug!(
        "unitary evolution: {} steps, norm drift {:.2e}",
        stats.accepted, drift
    );
    Ok(UnitaryOutcome {
        state: psi,
        norm_drift: drift,
        stats,
    })
}

/// Closed-system `P0(s_inv)` for every `m0` in `m0s` and `s_inv` in `grid`,
/// with an optional pause at the inversion point.
pub fn sweep_unitary(
    spec: &ProblemSpec,
    tau: f64,
    t_pause: f64,
    m0s: &[f64],
    grid: &[f64],
    tol: f64,
) -> Result<SweepResult> {
    if m0s.is_empty() || grid.is_empty() {
        return Err(invalid("sweep needs at least one m0 and one s_inv"));
    }
    let ws = m0s
        .iter()
        .map(|&m0| w_of_m0(spec.n, m0))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = ws
        .iter()
        .flat_map(|&w| grid.iter().map(move |&s| (w, s)))
        .collect();
    let points = jobs
        .par_iter()
        .enumerate()
        .map(|(k, &(w, s_inv))| {
            let path = AnnealPath::reverse_paused(tau, s_inv, t_pause)?;
            let psi0 = PureState::dicke(spec.representation(), w)?;
            let out = evolve_unitary(spec, &path, &psi0, tol)?;
            Ok(SweepPoint {
                m0: m0s[k / grid.len()],
                s_inv,
                p0: success_probability(&out.state, spec),
                stderr: 0.0,
                k: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { points })
}
