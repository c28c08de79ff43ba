//! Lockstep propagation of many trajectories.
//!
//! Over one step of length `h` the Davies bundle is frozen at the step
//! midpoint. Amplitudes are kept in the eigenbasis of that bundle, where the
//! non-Hermitian evolution is diagonal; moving to the next step's eigenbasis
//! is one real matrix product per sector applied to every trajectory at once.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed::PureState;
use crate::davies::{DaviesBundle, DaviesModel};
use crate::error::{invalid, Result};
use crate::schedule::AnnealPath;
use crate::C64;

use super::TrajectorySample;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum JumpKind {
    /// Population moved from level `from` to level `to` (global level indices).
    Transfer {
        from: usize,
        to: usize,
        qubit: Option<usize>,
    },
    Dephasing {
        qubit: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub s: f64,
    pub kind: JumpKind,
}

struct StepData {
    /// `exp((-i eps - Gamma/2) h)` per level.
    full: Vec<C64>,
    /// `exp(-Gamma h)` per level.
    damp: Vec<f64>,
    eps: Vec<f64>,
    gamma: Vec<f64>,
}

impl StepData {
    fn new(b: &DaviesBundle, h: f64) -> Self {
        let nl = b.level_count();
        let eps: Vec<f64> = (0..nl).map(|l| b.shifted_energy(l)).collect();
        let gamma = b.decay.clone();
        let full = (0..nl)
            .map(|l| C64::new(-0.5 * gamma[l] * h, -eps[l] * h).exp())
            .collect();
        let damp = gamma.iter().map(|g| (-g * h).exp()).collect();
        StepData {
            full,
            damp,
            eps,
            gamma,
        }
    }

    fn factor(&self, l: usize, dt: f64) -> C64 {
        C64::new(-0.5 * self.gamma[l] * dt, -self.eps[l] * dt).exp()
    }
}

pub(super) struct Ensemble<'a> {
    model: &'a DaviesModel,
    k: usize,
    /// Per sector: real parts in columns `[0, mult k)`, imaginary parts after.
    x: Vec<DMatrix<f64>>,
    scratch: Vec<DMatrix<f64>>,
    rngs: Vec<ChaCha8Rng>,
    thresholds: Vec<f64>,
    jumps: Vec<usize>,
    log: Option<Vec<Vec<JumpRecord>>>,
    min_kept: Vec<f64>,
    basis: Option<Vec<DMatrix<f64>>>,
    /// Per-step cache of single-qubit jump blocks `R_c^{kl}`.
    blocks: HashMap<(usize, usize), Vec<Option<DMatrix<f64>>>>,
    pops: Vec<f64>,
}

fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

impl<'a> Ensemble<'a> {
    pub(super) fn new(
        model: &'a DaviesModel,
        psi0: &PureState,
        mut rngs: Vec<ChaCha8Rng>,
        record: bool,
    ) -> Result<Self> {
        let rep = model.representation();
        if psi0.amplitudes.len() != rep.len() {
            return Err(invalid("initial state has the wrong dimension"));
        }
        if (psi0.norm_sqr() - 1.0).abs() > 1e-8 {
            return Err(invalid("initial state is not normalized"));
        }
        let k = rngs.len();
        let mut x = Vec::with_capacity(rep.sectors.len());
        for sec in &rep.sectors {
            let cols = sec.mult * k;
            let mut m = DMatrix::zeros(sec.dim(), 2 * cols);
            for j in 0..k {
                for a in 0..sec.mult {
                    for i in 0..sec.dim() {
                        let z = psi0.amplitudes[sec.index(i, a)];
                        m[(i, j * sec.mult + a)] = z.re;
                        m[(i, cols + j * sec.mult + a)] = z.im;
                    }
                }
            }
            x.push(m);
        }
        let scratch = x
            .iter()
            .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
            .collect();
        let thresholds = rngs.iter_mut().map(draw_threshold).collect();
        Ok(Ensemble {
            model,
            k,
            x,
            scratch,
            rngs,
            thresholds,
            jumps: vec![0; k],
            log: record.then(|| vec![Vec::new(); k]),
            min_kept: vec![1.0; k],
            basis: None,
            blocks: HashMap::new(),
            pops: vec![0.0; rep.level_count()],
        })
    }

    pub(super) fn run(&mut self, path: &AnnealPath, dt: f64) -> Result<()> {
        for (t0, t1) in path.segments() {
            let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
            let h = (t1 - t0) / steps as f64;
            for i in 0..steps {
                let ta = t0 + i as f64 * h;
                let s = path.s_at(ta + 0.5 * h);
                let bundle = self.model.bundle(s)?;
                self.rotate(&bundle);
                self.blocks.clear();
                let step = StepData::new(&bundle, h);
                for j in 0..self.k {
                    self.advance(j, ta, h, &bundle, &step);
                }
            }
        }
        self.to_lab();
        Ok(())
    }

    fn rotate(&mut self, b: &DaviesBundle) {
        for (k, eig) in b.sectors.iter().enumerate() {
            let o = match &self.basis {
                Some(prev) => eig.vectors.tr_mul(&prev[k]),
                None => eig.vectors.transpose(),
            };
            self.scratch[k].gemm(1.0, &o, &self.x[k], 0.0);
            std::mem::swap(&mut self.x[k], &mut self.scratch[k]);
        }
        self.basis = Some(b.sectors.iter().map(|e| e.vectors.clone()).collect());
    }

    fn to_lab(&mut self) {
        if let Some(basis) = self.basis.take() {
            for (k, v) in basis.iter().enumerate() {
                self.scratch[k].gemm(1.0, v, &self.x[k], 0.0);
                std::mem::swap(&mut self.x[k], &mut self.scratch[k]);
            }
        }
    }

    #[inline]
    fn cols(&self, k: usize) -> usize {
        self.model.representation().sectors[k].mult * self.k
    }

    #[inline]
    fn get(&self, k: usize, i: usize, j: usize, a: usize) -> C64 {
        let mult = self.model.representation().sectors[k].mult;
        let c = j * mult + a;
        C64::new(self.x[k][(i, c)], self.x[k][(i, c + self.cols(k))])
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, a: usize, z: C64) {
        let mult = self.model.representation().sectors[k].mult;
        let c = j * mult + a;
        let cols = self.cols(k);
        self.x[k][(i, c)] = z.re;
        self.x[k][(i, c + cols)] = z.im;
    }

    /// Level populations of trajectory `j` into `self.pops`; returns the total.
    fn populations(&mut self, j: usize, b: &DaviesBundle) -> f64 {
        let rep = self.model.representation();
        let mut total = 0.0;
        for (k, sec) in rep.sectors.iter().enumerate() {
            let cols = sec.mult * self.k;
            let m = &self.x[k];
            for i in 0..sec.dim() {
                let mut p = 0.0;
                for a in 0..sec.mult {
                    let c = j * sec.mult + a;
                    p += m[(i, c)].powi(2) + m[(i, c + cols)].powi(2);
                }
                self.pops[b.level_offset[k] + i] = p;
                total += p;
            }
        }
        total
    }

    fn scale(&mut self, j: usize, b: &DaviesBundle, f: impl Fn(usize) -> C64) {
        let rep = self.model.representation();
        for (k, sec) in rep.sectors.iter().enumerate() {
            let cols = sec.mult * self.k;
            let m = &mut self.x[k];
            for i in 0..sec.dim() {
                let z = f(b.level_offset[k] + i);
                for a in 0..sec.mult {
                    let c = j * sec.mult + a;
                    let v = C64::new(m[(i, c)], m[(i, c + cols)]) * z;
                    m[(i, c)] = v.re;
                    m[(i, c + cols)] = v.im;
                }
            }
        }
    }

    fn advance(&mut self, j: usize, ta: f64, h: f64, b: &DaviesBundle, step: &StepData) {
        let mut rem = h;
        let mut t = ta;
        let mut first = true;
        loop {
            let total = self.populations(j, b);
            if b.kept.iter().any(|&k| !k) {
                let kept: f64 = (0..self.pops.len())
                    .filter(|&l| b.kept[l])
                    .map(|l| self.pops[l])
                    .sum();
                self.min_kept[j] = self.min_kept[j].min(kept / total);
            }
            let r = self.thresholds[j];
            let end = if first {
                self.pops
                    .iter()
                    .zip(&step.damp)
                    .map(|(p, d)| p * d)
                    .sum::<f64>()
            } else {
                self.pops
                    .iter()
                    .zip(&step.gamma)
                    .map(|(p, g)| p * (-g * rem).exp())
                    .sum::<f64>()
            };
            if end > r {
                if first {
                    self.scale(j, b, |l| step.full[l]);
                } else {
                    self.scale(j, b, |l| step.factor(l, rem));
                }
                return;
            }
            let theta = crossing_time(&self.pops, &step.gamma, r, rem);
            self.scale(j, b, |l| step.factor(l, theta));
            t += theta;
            rem -= theta;
            self.jump(j, t, b);
            self.thresholds[j] = draw_threshold(&mut self.rngs[j]);
            first = false;
            if rem <= 1e-12 * h {
                return;
            }
        }
    }

    fn jump(&mut self, j: usize, t: f64, b: &DaviesBundle) {
        let total = self.populations(j, b);
        let nl = b.level_count();
        let weights: Vec<f64> = (0..nl).map(|l| b.decay[l] * self.pops[l]).collect();
        let wsum: f64 = weights.iter().sum();
        if !(wsum > 0.0) || !(total > 0.0) {
            return;
        }
        let l = pick(&weights, self.rngs[j].random::<f64>() * wsum);
        let mut u = self.rngs[j].random::<f64>() * b.decay[l];
        let mut target = None;
        for k in 0..nl {
            let w = b.transfer[(k, l)];
            if w > 0.0 {
                if u < w {
                    target = Some(k);
                    break;
                }
                u -= w;
            }
        }
        let kind = match (target, self.model.independent.is_some()) {
            (Some(k), false) => {
                self.collective_transfer(j, k, l, b);
                JumpKind::Transfer {
                    from: l,
                    to: k,
                    qubit: None,
                }
            }
            (None, false) => {
                self.collective_dephasing(j, b);
                JumpKind::Dephasing { qubit: None }
            }
            (Some(k), true) => {
                let c = self.independent_transfer(j, k, l, b);
                JumpKind::Transfer {
                    from: l,
                    to: k,
                    qubit: Some(c),
                }
            }
            (None, true) => {
                let c = self.independent_dephasing(j, b);
                JumpKind::Dephasing { qubit: Some(c) }
            }
        };
        self.normalize(j);
        self.jumps[j] += 1;
        if let Some(log) = &mut self.log {
            log[j].push(JumpRecord { t, s: b.s, kind });
        }
    }

    fn normalize(&mut self, j: usize) {
        let rep = self.model.representation();
        let mut total = 0.0;
        for (k, sec) in rep.sectors.iter().enumerate() {
            for a in 0..sec.mult {
                for i in 0..sec.dim() {
                    total += self.get(k, i, j, a).norm_sqr();
                }
            }
        }
        let inv = 1.0 / total.sqrt();
        for (k, sec) in rep.sectors.iter().enumerate() {
            let cols = sec.mult * self.k;
            for a in 0..sec.mult {
                let c = j * sec.mult + a;
                for i in 0..sec.dim() {
                    self.x[k][(i, c)] *= inv;
                    self.x[k][(i, c + cols)] *= inv;
                }
            }
        }
    }

    fn local(b: &DaviesBundle, l: usize) -> (usize, usize) {
        let k = b.sector_of[l];
        (k, l - b.level_offset[k])
    }

    fn clear_except(&mut self, j: usize, keep: Option<(usize, usize)>) {
        let rep = self.model.representation();
        for (k, sec) in rep.sectors.iter().enumerate() {
            for a in 0..sec.mult {
                for i in 0..sec.dim() {
                    if keep != Some((k, i)) {
                        self.set(k, i, j, a, C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    fn collective_transfer(&mut self, j: usize, to: usize, from: usize, b: &DaviesBundle) {
        let (ks, kl) = Self::local(b, to);
        let (ls, ll) = Self::local(b, from);
        debug_assert_eq!(ks, ls);
        let m = b.collective_m.as_ref().expect("collective bundle")[ks][(kl, ll)];
        let mult = self.model.representation().sectors[ks].mult;
        let src: Vec<C64> = (0..mult).map(|a| self.get(ls, ll, j, a) * m).collect();
        self.clear_except(j, None);
        for (a, z) in src.into_iter().enumerate() {
            self.set(ks, kl, j, a, z);
        }
    }

    fn collective_dephasing(&mut self, j: usize, b: &DaviesBundle) {
        let ms = b.collective_m.as_ref().expect("collective bundle");
        self.scale(j, b, |l| {
            let (k, i) = Self::local(b, l);
            if b.kept[l] {
                C64::new(ms[k][(i, i)], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
    }

    /// `R_c^{kl}[alpha, beta] = <E_k, alpha| sigma_c^z |E_l, beta>` for every qubit.
    fn qubit_blocks(
        &mut self,
        to: usize,
        from: usize,
        b: &DaviesBundle,
    ) -> &Vec<Option<DMatrix<f64>>> {
        let model = self.model;
        self.blocks.entry((to, from)).or_insert_with(|| {
            let rep = model.representation();
            let ind = model.independent.as_ref().expect("independent coupling");
            let (ks, kl) = Self::local(b, to);
            let (ls, ll) = Self::local(b, from);
            let (sa, sb) = (&rep.sectors[ks], &rep.sectors[ls]);
            let (va, vb) = (
                b.sectors[ks].vectors.column(kl),
                b.sectors[ls].vectors.column(ll),
            );
            ind.blocks
                .iter()
                .map(|blk| {
                    blk.get(&(ks, ls)).map(|z| {
                        DMatrix::from_fn(sa.mult, sb.mult, |al, be| {
                            let mut acc = 0.0;
                            for m in 0..sa.dim() {
                                let mut row = 0.0;
                                for m2 in 0..sb.dim() {
                                    row += z[(al * sa.dim() + m, be * sb.dim() + m2)] * vb[m2];
                                }
                                acc += va[m] * row;
                            }
                            acc
                        })
                    })
                })
                .collect()
        })
    }

    fn copy_vector(&self, j: usize, l: usize, b: &DaviesBundle) -> Vec<C64> {
        let (k, i) = Self::local(b, l);
        let mult = self.model.representation().sectors[k].mult;
        (0..mult).map(|a| self.get(k, i, j, a)).collect()
    }

    fn independent_transfer(
        &mut self,
        j: usize,
        to: usize,
        from: usize,
        b: &DaviesBundle,
    ) -> usize {
        let src = self.copy_vector(j, from, b);
        let blocks = self.qubit_blocks(to, from, b).clone();
        let images: Vec<Option<Vec<C64>>> = blocks
            .iter()
            .map(|r| r.as_ref().map(|r| apply(r, &src)))
            .collect();
        let weights: Vec<f64> = images
            .iter()
            .map(|u| u.as_ref().map_or(0.0, |u| norm_sqr(u)))
            .collect();
        let wsum: f64 = weights.iter().sum();
        let c = pick(&weights, self.rngs[j].random::<f64>() * wsum);
        let u = images[c].clone().unwrap_or_default();
        let (ks, kl) = Self::local(b, to);
        self.clear_except(j, None);
        for (a, z) in u.into_iter().enumerate() {
            self.set(ks, kl, j, a, z);
        }
        c
    }

    fn independent_dephasing(&mut self, j: usize, b: &DaviesBundle) -> usize {
        let nl = b.level_count();
        let n = self.model.spec.n;
        let kept: Vec<usize> = (0..nl).filter(|&l| b.kept[l]).collect();
        let srcs: Vec<Vec<C64>> = kept.iter().map(|&l| self.copy_vector(j, l, b)).collect();
        let mut images: Vec<Vec<Option<Vec<C64>>>> = vec![Vec::with_capacity(kept.len()); n];
        for (&l, src) in kept.iter().zip(&srcs) {
            let blocks = self.qubit_blocks(l, l, b).clone();
            for (c, r) in blocks.iter().enumerate() {
                images[c].push(r.as_ref().map(|r| apply(r, src)));
            }
        }
        let weights: Vec<f64> = images
            .iter()
            .map(|imgs| {
                imgs.iter()
                    .map(|u| u.as_ref().map_or(0.0, |u| norm_sqr(u)))
                    .sum()
            })
            .collect();
        let wsum: f64 = weights.iter().sum();
        let c = pick(&weights, self.rngs[j].random::<f64>() * wsum);
        self.clear_except(j, None);
        for (&l, img) in kept.iter().zip(&images[c]) {
            if let Some(u) = img {
                let (k, i) = Self::local(b, l);
                for (a, &z) in u.iter().enumerate() {
                    self.set(k, i, j, a, z);
                }
            }
        }
        c
    }

    pub(super) fn samples(&self, targets: &[usize]) -> Vec<TrajectorySample> {
        let rep = self.model.representation();
        let top = rep.top();
        (0..self.k)
            .map(|j| {
                let mut total = 0.0;
                let mut top_pop = 0.0;
                for (k, sec) in rep.sectors.iter().enumerate() {
                    for a in 0..sec.mult {
                        for i in 0..sec.dim() {
                            let p = self.get(k, i, j, a).norm_sqr();
                            total += p;
                            if k == 0 {
                                top_pop += p;
                            }
                        }
                    }
                }
                let hit: f64 = targets
                    .iter()
                    .map(|&idx| self.get(0, idx - top.offset, j, 0).norm_sqr())
                    .sum();
                TrajectorySample {
                    p0: hit / total,
                    jumps: self.jumps[j],
                    top_sector: top_pop / total,
                    min_kept: self.min_kept[j],
                }
            })
            .collect()
    }

    pub(super) fn state(&self, j: usize) -> PureState {
        let rep = self.model.representation();
        let mut amplitudes = vec![C64::new(0.0, 0.0); rep.len()];
        for (k, sec) in rep.sectors.iter().enumerate() {
            for a in 0..sec.mult {
                for i in 0..sec.dim() {
                    amplitudes[sec.index(i, a)] = self.get(k, i, j, a);
                }
            }
        }
        let mut psi = PureState { amplitudes };
        psi.normalize();
        psi
    }

    pub(super) fn take_jumps(&mut self, j: usize) -> Vec<JumpRecord> {
        self.log
            .as_mut()
            .map(|l| std::mem::take(&mut l[j]))
            .unwrap_or_default()
    }
}

fn apply(r: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    (0..r.nrows())
        .map(|i| (0..r.ncols()).map(|b| v[b] * r[(i, b)]).sum())
        .collect()
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Index `i` with `sum_{<i} w <= u < sum_{<=i} w`, skipping zero weights.
fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Solves `sum_l p_l e^{-g_l theta} = r` for `theta` in `(0, t_max]`.
pub(super) fn crossing_time(p: &[f64], g: &[f64], r: f64, t_max: f64) -> f64 {
    let lr = r.ln();
    let eval = |th: f64| {
        let mut s = 0.0;
        let mut ds = 0.0;
        for (&pi, &gi) in p.iter().zip(g) {
            let e = pi * (-gi * th).exp();
            s += e;
            ds -= gi * e;
        }
        (s.ln() - lr, ds / s)
    };
    let (mut lo, mut hi) = (0.0, t_max);
    let mut th = 0.0;
    for _ in 0..200 {
        let (f, df) = eval(th);
        if f > 0.0 {
            lo = th;
        } else {
            hi = th;
        }
        let mut next = if df < 0.0 {
            th - f / df
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - th).abs() < 1e-10 || hi - lo < 1e-10 {
            return next.clamp(0.0, t_max);
        }
        th = next;
    }
    th
}
