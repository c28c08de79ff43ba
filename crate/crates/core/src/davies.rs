//! Davies-type master equation in the instantaneous eigenbasis.
//!
//! Every distinct energy level `l` of a spin sector carries a copy space of
//! dimension `d_S`. Transfer channels `L_kl = P_k C P_l` move population from
//! level `l` to level `k` at rate `gamma(E_l - E_k)`; the dephasing channel
//! `L_0 = sum_k P_k C P_k` acts at rate `gamma(0)`. For the independent model
//! there is one coupling `C = sigma_z` per qubit and one set of channels per
//! qubit. All weights below are stored per level, since each `L^dag L` is
//! proportional to the identity on a level's copy space.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hamiltonian::{ProblemSpec, SectorEigen, Space};
use crate::operators::{qubit_sz, Representation};
use crate::units::{ghz_to_rad_per_ns, thz_to_rad_per_ns};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingModel {
    Collective,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub eta: f64,
    pub omega_c_thz: f64,
    pub temperature_ghz: f64,
    pub model: DephasingModel,
    #[serde(default)]
    pub lamb_shift: bool,
}

impl Default for BathSpec {
    fn default() -> Self {
        BathSpec {
            eta: 1e-3,
            omega_c_thz: 1.0,
            temperature_ghz: 1.57,
            model: DephasingModel::Collective,
            lamb_shift: false,
        }
    }
}

impl BathSpec {
    pub fn collective() -> Self {
        Self::default()
    }

    pub fn independent() -> Self {
        BathSpec {
            model: DephasingModel::Independent,
            ..Self::default()
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_lamb_shift(mut self, on: bool) -> Self {
        self.lamb_shift = on;
        self
    }

    /// Temperature as an angular frequency, rad/ns.
    pub fn temperature(&self) -> f64 {
        ghz_to_rad_per_ns(self.temperature_ghz)
    }

    /// Cutoff frequency, rad/ns.
    pub fn omega_c(&self) -> f64 {
        thz_to_rad_per_ns(self.omega_c_thz)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            bad.push(format!("eta = {}", self.eta));
        }
        if !(self.omega_c_thz.is_finite() && self.omega_c_thz > 0.0) {
            bad.push(format!("omega_c = {}", self.omega_c_thz));
        }
        if !(self.temperature_ghz.is_finite() && self.temperature_ghz > 0.0) {
            bad.push(format!("temperature = {}", self.temperature_ghz));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(format!(
                "invalid bath parameters: {}",
                bad.join(", ")
            )))
        }
    }
}

/// Davies rate `gamma(omega) = 2 pi eta omega e^{-|omega|/omega_c} / (1 - e^{-omega/T})`
/// for `omega` in rad/ns, with `gamma(0) = 2 pi eta T`.
pub fn rate(omega: f64, bath: &BathSpec) -> f64 {
    rate_raw(omega, bath.eta, bath.omega_c(), bath.temperature())
}

#[inline]
fn rate_raw(omega: f64, eta: f64, wc: f64, temp: f64) -> f64 {
    let pre = 2.0 * PI * eta;
    let x = omega / temp;
    if x == 0.0 {
        return pre * temp;
    }
    // omega / (1 - e^{-x}) written to avoid overflow for large negative x.
    let bose = if x > 0.0 {
        omega / -(-x).exp_m1()
    } else {
        -omega * (x.exp() / -x.exp_m1())
    };
    let g = pre * bose * (-omega.abs() / wc).exp();
    if g < f64::MIN_POSITIVE {
        0.0
    } else {
        g
    }
}

/// Principal-value transform `S(omega) = (1/2 pi) P int gamma(x) / (omega - x) dx`.
pub fn lamb_shift_value(omega: f64, bath: &BathSpec) -> f64 {
    let (eta, wc, temp) = (bath.eta, bath.omega_c(), bath.temperature());
    let g = |x: f64| rate_raw(x, eta, wc, temp);
    let a = omega.min(0.0) - 60.0 * temp;
    let b = 20.0 * wc;
    if omega >= b {
        return 0.0;
    }
    let g0 = g(omega);
    let f = |x: f64| (g(x) - g0) / (omega - x);
    let h0 = 0.25 * temp;
    let mut centers = vec![omega, 0.0];
    centers.dedup();
    let mut bps = vec![a];
    let mut x = a;
    while x < b {
        let dist = centers
            .iter()
            .map(|c| (x - c).abs())
            .fold(f64::INFINITY, f64::min);
        let mut next = x + h0.max(0.3 * dist);
        for &c in &centers {
            if x < c && next > c {
                next = c;
            }
        }
        if next > b {
            next = b;
        }
        bps.push(next);
        x = next;
    }
    let integral: f64 = bps.windows(2).map(|w| gauss_legendre(&f, w[0], w[1])).sum();
    (integral + g0 * ((omega - a) / (b - omega)).ln()) / (2.0 * PI)
}

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * (f(c - r * x) + f(c + r * x));
    }
    acc * r
}

/// Tabulated `S(omega)` on a uniform grid with cubic interpolation.
#[derive(Clone, Debug)]
pub struct LambShiftTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl LambShiftTable {
    /// Covers `|omega| <= omega_max` at spacing `step` (rad/ns).
    pub fn new(bath: &BathSpec, omega_max: f64, step: f64) -> Self {
        let count = (2.0 * omega_max / step).ceil() as usize + 4;
        let lo = -omega_max - step;
        let values = (0..count)
            .map(|k| lamb_shift_value(lo + step * k as f64, bath))
            .collect();
        LambShiftTable { lo, step, values }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let u = (omega - self.lo) / self.step;
        let n = self.values.len();
        let i = (u.floor() as isize).clamp(1, n as isize - 3) as usize;
        let t = u - i as f64;
        let (p0, p1, p2, p3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        // Catmull-Rom.
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (3.0 * (p1 - p2) + p3 - p0) * t * t * t)
    }
}

/// Sector-pair coupling data for the independent model.
#[derive(Clone, Debug)]
pub struct IndependentCoupling {
    /// `Z_c^{SS'}` per qubit, keyed by sector pair; rows are `alpha (2S+1) + m`.
    pub blocks: Vec<HashMap<(usize, usize), DMatrix<f64>>>,
    /// `Q^{SS'}[m][m''][m'][m''']`, flattened.
    pub q: HashMap<(usize, usize), Vec<f64>>,
}

/// Largest `n` for the independent model.
pub const INDEPENDENT_MAX_N: usize = 10;

impl IndependentCoupling {
    pub fn new(rep: &Representation) -> Result<Self> {
        if rep.space != Space::Full {
            return Err(invalid("independent dephasing needs the full space"));
        }
        if rep.n > INDEPENDENT_MAX_N {
            return Err(invalid(format!(
                "independent dephasing supports n <= {INDEPENDENT_MAX_N}"
            )));
        }
        let w = rep.isometry.as_ref().expect("full space has an isometry");
        let n = rep.n;
        let ns = rep.sectors.len();
        let mut blocks = vec![HashMap::new(); n];
        for c in 0..n {
            let sz = DVector::from_fn(w.nrows(), |i, _| qubit_sz(n, c, i));
            for k in 0..ns {
                let sk = &rep.sectors[k];
                let wk = w.columns(sk.offset, sk.len());
                let left =
                    DMatrix::from_fn(wk.nrows(), wk.ncols(), |i, j| wk[(i, j)] * sz[i]).transpose();
                for k2 in 0..ns {
                    let s2 = &rep.sectors[k2];
                    if sk.two_s.abs_diff(s2.two_s) > 2 {
                        continue;
                    }
                    let z = &left * w.columns(s2.offset, s2.len());
                    if z.amax() > 1e-12 {
                        blocks[c].insert((k, k2), z);
                    }
                }
            }
        }
        let mut q = HashMap::new();
        for k in 0..ns {
            for k2 in 0..ns {
                let (sa, sb) = (&rep.sectors[k], &rep.sectors[k2]);
                let (a, b) = (sa.dim(), sb.dim());
                let mut t = vec![0.0; a * b * a * b];
                let mut any = false;
                for blk in &blocks {
                    let Some(z) = blk.get(&(k, k2)) else { continue };
                    any = true;
                    for al in 0..sa.mult {
                        for be in 0..sb.mult {
                            for m in 0..a {
                                for m2 in 0..b {
                                    let y = z[(al * a + m, be * b + m2)];
                                    if y == 0.0 {
                                        continue;
                                    }
                                    let base = (m * b + m2) * a * b;
                                    for m1 in 0..a {
                                        for m3 in 0..b {
                                            t[base + m1 * b + m3] +=
                                                y * z[(al * a + m1, be * b + m3)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if any {
                    q.insert((k, k2), t);
                }
            }
        }
        Ok(IndependentCoupling { blocks, q })
    }
}

/// Everything needed to build bundles for one problem and bath.
#[derive(Clone, Debug)]
pub struct DaviesModel {
    pub spec: ProblemSpec,
    pub bath: BathSpec,
    /// Keep the lowest `rank` eigenstates (counted with multiplicity).
    pub truncation: Option<usize>,
    pub independent: Option<Arc<IndependentCoupling>>,
    pub lamb: Option<Arc<LambShiftTable>>,
}

impl DaviesModel {
    pub fn new(spec: &ProblemSpec, bath: &BathSpec, truncation: Option<usize>) -> Result<Self> {
        bath.validate()?;
        if let Some(r) = truncation {
            if r == 0 {
                return Err(invalid("truncation rank must be positive"));
            }
        }
        let independent = match bath.model {
            DephasingModel::Collective => None,
            DephasingModel::Independent => {
                Some(Arc::new(IndependentCoupling::new(spec.representation())?))
            }
        };
        let lamb = if bath.lamb_shift && bath.eta > 0.0 {
            let (a0, _) = spec.curves.eval(0.0);
            let (_, b1) = spec.curves.eval(1.0);
            let (a_max, b_max) = (
                a0.max(spec.curves.eval(1.0).0),
                b1.max(spec.curves.eval(0.0).1),
            );
            let omega_max = 2.0 * PI * spec.n as f64 * (a_max + b_max) * 1.05 + 1.0;
            let step = (0.05 * bath.temperature()).min(0.5);
            Some(Arc::new(LambShiftTable::new(bath, omega_max, step)))
        } else {
            None
        };
        Ok(DaviesModel {
            spec: spec.clone(),
            bath: *bath,
            truncation,
            independent,
            lamb,
        })
    }

    pub fn representation(&self) -> &Representation {
        self.spec.representation()
    }

    fn s_of(&self, omega: f64) -> f64 {
        self.lamb.as_ref().map_or(0.0, |t| t.eval(omega))
    }

    /// Snapshot of the dissipative structure at `s`.
    pub fn bundle(&self, s: f64) -> Result<DaviesBundle> {
        let sectors = self.spec.sector_eigen(s)?;
        self.bundle_from(s, sectors)
    }

    pub fn bundle_from(&self, s: f64, sectors: Vec<SectorEigen>) -> Result<DaviesBundle> {
        let rep = self.representation();
        let mut level_offset = Vec::with_capacity(sectors.len());
        let mut energies = Vec::new();
        let mut mult = Vec::new();
        let mut sector_of = Vec::new();
        for (k, (sec, eig)) in rep.sectors.iter().zip(&sectors).enumerate() {
            level_offset.push(energies.len());
            energies.extend_from_slice(&eig.energies);
            mult.extend(std::iter::repeat_n(sec.mult, sec.dim()));
            sector_of.extend(std::iter::repeat_n(k, sec.dim()));
        }
        let nl = energies.len();
        let kept = keep_mask(&energies, &mult, self.truncation);

        // Level-pair weights G[k][l] (per copy of the source level l) and
        // per-sector dephasing weights D.
        let mut weight = DMatrix::zeros(nl, nl);
        let mut coherence = Vec::with_capacity(sectors.len());
        let mut collective_m = None;
        match &self.independent {
            None => {
                let mut ms = Vec::with_capacity(sectors.len());
                for (k, (sec, eig)) in rep.sectors.iter().zip(&sectors).enumerate() {
                    let v = &eig.vectors;
                    let sz = DMatrix::from_diagonal(&DVector::from_column_slice(&sec.sz));
                    let m = v.transpose() * sz * v;
                    let o = level_offset[k];
                    for i in 0..sec.dim() {
                        for j in 0..sec.dim() {
                            weight[(o + i, o + j)] = m[(i, j)] * m[(i, j)];
                        }
                    }
                    let diag = m.diagonal();
                    coherence.push(&diag * diag.transpose());
                    ms.push(m);
                }
                collective_m = Some(ms);
            }
            Some(ind) => {
                for sec in &rep.sectors {
                    coherence.push(DMatrix::zeros(sec.dim(), sec.dim()));
                }
                for (&(k, k2), q) in &ind.q {
                    let (va, vb) = (&sectors[k].vectors, &sectors[k2].vectors);
                    let (a, b) = (va.nrows(), vb.nrows());
                    let d_src = rep.sectors[k2].mult as f64;
                    for i in 0..a {
                        // T[m''][m'''] = sum_{m,m'} v_i[m] v_i[m'] Q[m][m''][m'][m''']
                        let mut t = DMatrix::zeros(b, b);
                        for m in 0..a {
                            let um = va[(m, i)];
                            for m2 in 0..b {
                                let base = (m * b + m2) * a * b;
                                for m1 in 0..a {
                                    let f = um * va[(m1, i)];
                                    for m3 in 0..b {
                                        t[(m2, m3)] += f * q[base + m1 * b + m3];
                                    }
                                }
                            }
                        }
                        let tv = &t * vb;
                        for j in 0..b {
                            let g = vb.column(j).dot(&tv.column(j));
                            weight[(level_offset[k] + i, level_offset[k2] + j)] = g / d_src;
                        }
                    }
                    if k == k2 {
                        let d_s = rep.sectors[k].mult as f64;
                        for i in 0..a {
                            // U[m'][m'''] = sum_{m,m''} v_i[m] v_i[m''] Q[m][m''][m'][m''']
                            let mut u = DMatrix::zeros(a, a);
                            for m in 0..a {
                                for m2 in 0..a {
                                    let f = va[(m, i)] * va[(m2, i)];
                                    let base = (m * a + m2) * a * a;
                                    for m1 in 0..a {
                                        for m3 in 0..a {
                                            u[(m1, m3)] += f * q[base + m1 * a + m3];
                                        }
                                    }
                                }
                            }
                            let uv = &u * va;
                            for j in 0..a {
                                coherence[k][(i, j)] = va.column(j).dot(&uv.column(j)) / d_s;
                            }
                        }
                    }
                }
            }
        }

        let gamma0 = rate(0.0, &self.bath);
        let mut transfer = DMatrix::zeros(nl, nl);
        let mut dephasing = vec![0.0; nl];
        let mut decay = vec![0.0; nl];
        let mut lamb = vec![0.0; nl];
        for l in 0..nl {
            if !kept[l] {
                continue;
            }
            for k in 0..nl {
                if !kept[k] {
                    continue;
                }
                let g = weight[(k, l)];
                if k == l {
                    dephasing[l] = gamma0 * g;
                    decay[l] += gamma0 * g;
                    lamb[l] += self.s_of(0.0) * g;
                } else if g != 0.0 {
                    let w = energies[l] - energies[k];
                    let r = rate(w, &self.bath) * g;
                    transfer[(k, l)] = r;
                    decay[l] += r;
                    lamb[l] += self.s_of(w) * g;
                }
            }
        }
        for (k, c) in coherence.iter_mut().enumerate() {
            let o = level_offset[k];
            for i in 0..c.nrows() {
                for j in 0..c.ncols() {
                    if kept[o + i] && kept[o + j] {
                        c[(i, j)] *= gamma0;
                    } else {
                        c[(i, j)] = 0.0;
                    }
                }
            }
        }
        Ok(DaviesBundle {
            s,
            sectors,
            level_offset,
            energies,
            mult,
            sector_of,
            kept,
            gamma0,
            weight,
            transfer,
            dephasing,
            decay,
            lamb,
            coherence,
            collective_m,
        })
    }
}

/// Keeps every level that starts below `rank` in the energy-ordered list of
/// eigenstates counted with multiplicity.
fn keep_mask(energies: &[f64], mult: &[usize], rank: Option<usize>) -> Vec<bool> {
    let Some(rank) = rank else {
        return vec![true; energies.len()];
    };
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let mut kept = vec![false; energies.len()];
    let mut below = 0;
    for &l in &order {
        if below >= rank {
            break;
        }
        kept[l] = true;
        below += mult[l];
    }
    kept
}

/// Dissipative structure at one value of `s`, indexed by global level
/// (sector-major, ascending energy inside a sector).
#[derive(Clone, Debug)]
pub struct DaviesBundle {
    pub s: f64,
    pub sectors: Vec<SectorEigen>,
    /// First global level of each sector.
    pub level_offset: Vec<usize>,
    /// Level energies, rad/ns.
    pub energies: Vec<f64>,
    /// Copy-space dimension of each level.
    pub mult: Vec<usize>,
    pub sector_of: Vec<usize>,
    pub kept: Vec<bool>,
    pub gamma0: f64,
    /// `G[k][l]`: `sum_c L_kl^dag L_kl = G[k][l] P_l` (diagonal: dephasing weight).
    pub weight: DMatrix<f64>,
    /// `gamma(omega_kl) G[k][l]` for kept `k != l`.
    pub transfer: DMatrix<f64>,
    /// `gamma_0 G[l][l]` for kept `l`.
    pub dephasing: Vec<f64>,
    /// Total decay rate `Gamma_l` of level `l`.
    pub decay: Vec<f64>,
    /// Lamb shift of each level, rad/ns.
    pub lamb: Vec<f64>,
    /// Per sector: `gamma_0 D[k][k']`, the dephasing feed of coherence `(k, k')`.
    pub coherence: Vec<DMatrix<f64>>,
    /// Collective model: `<E_k|S_z|E_l>` per sector.
    pub collective_m: Option<Vec<DMatrix<f64>>>,
}

impl DaviesBundle {
    pub fn level_count(&self) -> usize {
        self.energies.len()
    }

    /// Bohr frequency `omega_kl = E_l - E_k`.
    pub fn bohr(&self, k: usize, l: usize) -> f64 {
        self.energies[l] - self.energies[k]
    }

    /// `E_l + LS_l`.
    pub fn shifted_energy(&self, l: usize) -> f64 {
        self.energies[l] + self.lamb[l]
    }

    /// Population gain of level `k` per unit population of one copy of `l`,
    /// spread over the copies of `k`: `transfer[k][l] d_l / d_k`.
    pub fn gain(&self, k: usize, l: usize) -> f64 {
        self.transfer[(k, l)] * self.mult[l] as f64 / self.mult[k] as f64
    }

    /// Expands a per-level diagonal into a dense working-basis matrix.
    fn expand(&self, rep: &Representation, value: impl Fn(usize) -> C64) -> DMatrix<C64> {
        let dim = rep.len();
        let mut out = DMatrix::zeros(dim, dim);
        for (k, sec) in rep.sectors.iter().enumerate() {
            let v = &self.sectors[k].vectors;
            let d = sec.dim();
            let mut blk = DMatrix::<C64>::zeros(d, d);
            for l in 0..d {
                let val = value(self.level_offset[k] + l);
                for i in 0..d {
                    for j in 0..d {
                        blk[(i, j)] += val * (v[(i, l)] * v[(j, l)]);
                    }
                }
            }
            for a in 0..sec.mult {
                let o = sec.offset + a * d;
                out.view_mut((o, o), (d, d)).copy_from(&blk);
            }
        }
        out
    }

    /// Lamb-shift Hamiltonian in the working basis.
    pub fn lamb_shift_matrix(&self, rep: &Representation) -> DMatrix<f64> {
        self.expand(rep, |l| C64::new(self.lamb[l], 0.0))
            .map(|z| z.re)
    }
}

/// `H + H_LS - (i/2) sum gamma L^dag L` in the working basis.
pub fn effective_hamiltonian(bundle: &DaviesBundle, rep: &Representation) -> DMatrix<C64> {
    bundle.expand(rep, |l| {
        C64::new(bundle.shifted_energy(l), -0.5 * bundle.decay[l])
    })
}

/// Gibbs state `e^{-H/T}/Z` over all sectors, weighted by multiplicity.
/// Returns one block per sector (the copy-space identity is implicit).
pub fn gibbs_state(spec: &ProblemSpec, s: f64, bath: &BathSpec) -> Result<Vec<DMatrix<C64>>> {
    let sectors = spec.sector_eigen(s)?;
    let temp = bath.temperature();
    let e0 = sectors
        .iter()
        .flat_map(|e| e.energies.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    let mut blocks = Vec::new();
    for (sec, eig) in spec.representation().sectors.iter().zip(&sectors) {
        let w: Vec<f64> = eig
            .energies
            .iter()
            .map(|e| (-(e - e0) / temp).exp())
            .collect();
        z += sec.mult as f64 * w.iter().sum::<f64>();
        let v = &eig.vectors;
        let blk = v * DMatrix::from_diagonal(&DVector::from_vec(w)) * v.transpose();
        blocks.push(blk.map(|x| C64::new(x, 0.0)));
    }
    for b in &mut blocks {
        *b /= C64::new(z, 0.0);
    }
    Ok(blocks)
}

/// Slowest nonzero relaxation rate of the level-population rate equation.
pub fn relaxation_gap(bundle: &DaviesBundle, temperature: f64) -> Result<f64> {
    let nl = bundle.level_count();
    let idx: Vec<usize> = (0..nl).filter(|&l| bundle.kept[l]).collect();
    let e0 = idx
        .iter()
        .map(|&l| bundle.energies[l])
        .fold(f64::INFINITY, f64::min);
    let pi: Vec<f64> = idx
        .iter()
        .map(|&l| bundle.mult[l] as f64 * (-(bundle.energies[l] - e0) / temperature).exp())
        .collect();
    let m = idx.len();
    let mut r = DMatrix::zeros(m, m);
    for (a, &k) in idx.iter().enumerate() {
        for (b, &l) in idx.iter().enumerate() {
            if a != b {
                r[(a, b)] = bundle.transfer[(k, l)];
                r[(b, b)] -= bundle.transfer[(k, l)];
            }
        }
    }
    let sym = DMatrix::from_fn(m, m, |a, b| r[(a, b)] * (pi[b] / pi[a]).sqrt());
    let sym = (&sym + sym.transpose()) * 0.5;
    let (vals, _) = crate::linalg::eigh(&sym)?;
    let mut rates: Vec<f64> = vals.iter().map(|v| -v).collect();
    rates.sort_by(f64::total_cmp);
    let scale = rates.last().copied().unwrap_or(0.0).abs().max(1e-300);
    Ok(rates.into_iter().find(|&g| g > 1e-9 * scale).unwrap_or(0.0))
}
