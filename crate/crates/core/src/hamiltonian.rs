//! The p-spin Hamiltonian `H(s) = -(A/2) S_x - (B n / 2) (S_z/n)^p` and its spectrum.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::linalg::{align_signs, eigh_tridiagonal};
pub use crate::operators::Space;
use crate::operators::{build_full_space, Representation, Sector};
use crate::schedule::ScheduleCurves;
use crate::units::rad_per_ns_to_ghz;

/// Gaps below this value (rad/ns) are reported as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub p: u32,
    pub curves: ScheduleCurves,
    pub space: Space,
    rep: Arc<Representation>,
}

impl ProblemSpec {
    pub fn new(n: usize, p: u32, curves: ScheduleCurves, space: Space) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p must be at least 2, got {p}")));
        }
        if p as usize > n {
            return Err(invalid(format!("p = {p} exceeds n = {n}")));
        }
        let rep = Arc::new(Representation::new(n, space)?);
        Ok(ProblemSpec {
            n,
            p,
            curves,
            space,
            rep,
        })
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn shared_representation(&self) -> Arc<Representation> {
        Arc::clone(&self.rep)
    }

    /// Prefactors `(c_x, c_z)` in rad/ns such that
    /// `H = c_x S_x + c_z n (S_z/n)^p`.
    pub fn coefficients(&self, s: f64) -> (f64, f64) {
        let (a, b) = self.curves.eval(s);
        (-PI * a, -PI * b)
    }

    /// Diagonal and super-diagonal of `H_S(s)` for one sector, rad/ns.
    pub fn sector_hamiltonian(&self, sec: &Sector, s: f64) -> (Vec<f64>, Vec<f64>) {
        let (cx, cz) = self.coefficients(s);
        let nf = self.n as f64;
        let diag = sec
            .sz
            .iter()
            .map(|&z| cz * nf * (z / nf).powi(self.p as i32))
            .collect();
        let off = sec.sx_off.iter().map(|&c| cx * c).collect();
        (diag, off)
    }

    /// Dense `H(s)` in the chosen space: the Dicke basis, or the computational
    /// basis of the full space.
    pub fn build_h(&self, s: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("s = {s} outside [0, 1]")));
        }
        let (cx, cz) = self.coefficients(s);
        let nf = self.n as f64;
        match self.space {
            Space::Dicke => {
                let (d, o) = self.sector_hamiltonian(self.rep.top(), s);
                let mut h = DMatrix::from_diagonal(&DVector::from_vec(d));
                for (i, v) in o.into_iter().enumerate() {
                    h[(i, i + 1)] = v;
                    h[(i + 1, i)] = v;
                }
                Ok(h)
            }
            Space::Full => {
                let f = build_full_space(self.n)?;
                let diag = f
                    .sigma_z_total()
                    .map(|z| cz * nf * (z / nf).powi(self.p as i32));
                Ok(f.sigma_x_total * cx + DMatrix::from_diagonal(&diag))
            }
        }
    }

    /// Energy of the ferromagnetic target state at `s = 1`, rad/ns.
    pub fn ground_energy_at_one(&self) -> f64 {
        let (_, cz) = self.coefficients(1.0);
        cz * self.n as f64
    }

    /// Per-sector eigen-decompositions at `s`.
    pub fn sector_eigen(&self, s: f64) -> Result<Vec<SectorEigen>> {
        self.rep
            .sectors
            .iter()
            .map(|sec| {
                let (d, o) = self.sector_hamiltonian(sec, s);
                let (energies, vectors) = eigh_tridiagonal(&d, &o)?;
                Ok(SectorEigen { energies, vectors })
            })
            .collect()
    }

    /// `E_1 - E_0` (counting multiplicity) at `s`, rad/ns.
    pub fn gap_at(&self, s: f64) -> f64 {
        self.gap_impl(s, false)
    }

    /// Gap used by [`min_gap_scan`]: `E_1 - E_0` for odd `p`; for even `p`,
    /// where `H_S` commutes with the reflection `j -> 2S - j`, the gap inside
    /// the reflection-even subspace that holds the ground state.
    pub fn scan_gap_at(&self, s: f64) -> f64 {
        self.gap_impl(s, self.p % 2 == 0)
    }

    fn gap_impl(&self, s: f64, even_only: bool) -> f64 {
        let mut lowest = [f64::INFINITY; 2];
        for sec in &self.rep.sectors {
            let (d, o) = self.sector_hamiltonian(sec, s);
            let mut m = tridiagonal(&d, &o);
            if even_only {
                let u = reflection_even_basis(sec.dim());
                m = u.transpose() * m * &u;
            }
            let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for (k, &e) in ev.iter().take(2).enumerate() {
                let copies = if k == 0 && sec.mult > 1 { 2 } else { 1 };
                for _ in 0..copies {
                    insert_lowest(&mut lowest, e);
                }
            }
        }
        lowest[1] - lowest[0]
    }
}

fn insert_lowest(lowest: &mut [f64; 2], e: f64) {
    if e < lowest[0] {
        lowest[1] = lowest[0];
        lowest[0] = e;
    } else if e < lowest[1] {
        lowest[1] = e;
    }
}

/// Orthonormal basis of vectors with `v_j = v_{D-1-j}`.
fn reflection_even_basis(dim: usize) -> DMatrix<f64> {
    let cols = dim.div_ceil(2);
    let mut u = DMatrix::zeros(dim, cols);
    for j in 0..cols {
        let r = dim - 1 - j;
        if r == j {
            u[(j, j)] = 1.0;
        } else {
            u[(j, j)] = std::f64::consts::FRAC_1_SQRT_2;
            u[(r, j)] = std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    u
}

fn tridiagonal(d: &[f64], o: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(d));
    for (i, &v) in o.iter().enumerate() {
        m[(i, i + 1)] = v;
        m[(i + 1, i)] = v;
    }
    m
}

/// Eigenpairs of one sector block `H_S`.
#[derive(Clone, Debug)]
pub struct SectorEigen {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub s: f64,
    /// All eigenvalues in ascending order, repeated by multiplicity, rad/ns.
    pub energies: Vec<f64>,
    /// `E_1 - E_0`, rad/ns.
    pub gap: f64,
    pub sectors: Vec<SectorEigen>,
    rep: Arc<Representation>,
}

impl SpectralDecomposition {
    pub fn gap_ghz(&self) -> f64 {
        rad_per_ns_to_ghz(self.gap)
    }

    /// Eigenvectors as orthonormal columns in the working basis, ordered like
    /// [`Self::energies`].
    pub fn eigenvectors(&self) -> DMatrix<f64> {
        let dim = self.rep.len();
        let mut cols: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(dim);
        for (k, (sec, eig)) in self.rep.sectors.iter().zip(&self.sectors).enumerate() {
            for a in 0..sec.mult {
                for (j, &e) in eig.energies.iter().enumerate() {
                    cols.push((e, k, j, a));
                }
            }
        }
        cols.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out = DMatrix::zeros(dim, dim);
        for (c, &(_, k, j, a)) in cols.iter().enumerate() {
            let sec = &self.rep.sectors[k];
            for m in 0..sec.dim() {
                out[(sec.index(m, a), c)] = self.sectors[k].vectors[(m, j)];
            }
        }
        out
    }
}

/// Eigen-decomposition of `H(s)` with a canonical sign gauge: the largest
/// component of every eigenvector is positive.
pub fn decompose(spec: &ProblemSpec, s: f64) -> Result<SpectralDecomposition> {
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid(format!("s = {s} outside [0, 1]")));
    }
    let mut sectors = spec.sector_eigen(s)?;
    for eig in &mut sectors {
        for mut col in eig.vectors.column_iter_mut() {
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(assemble(spec, s, sectors))
}

/// Like [`decompose`] but with signs chosen for positive overlap with `prev`.
pub fn decompose_following(
    spec: &ProblemSpec,
    s: f64,
    prev: &SpectralDecomposition,
) -> Result<SpectralDecomposition> {
    let mut sectors = spec.sector_eigen(s)?;
    for (eig, old) in sectors.iter_mut().zip(&prev.sectors) {
        align_signs(&mut eig.vectors, &old.vectors);
    }
    Ok(assemble(spec, s, sectors))
}

fn assemble(spec: &ProblemSpec, s: f64, sectors: Vec<SectorEigen>) -> SpectralDecomposition {
    let rep = spec.shared_representation();
    let mut energies = Vec::with_capacity(rep.len());
    for (sec, eig) in rep.sectors.iter().zip(&sectors) {
        for &e in &eig.energies {
            energies.extend(std::iter::repeat_n(e, sec.mult));
        }
    }
    energies.sort_by(f64::total_cmp);
    let gap = energies[1] - energies[0];
    SpectralDecomposition {
        s,
        energies,
        gap,
        sectors,
        rep,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapScan {
    pub s_min: f64,
    /// Minimal gap, rad/ns.
    pub gap: f64,
    pub degenerate: bool,
    /// Grid minimizer before refinement.
    pub s_grid: f64,
}

impl GapScan {
    pub fn gap_ghz(&self) -> f64 {
        rad_per_ns_to_ghz(self.gap)
    }
}

/// Minimal gap over `s in [0, 1]`: grid search at spacing `ds` followed by
/// golden-section refinement to `|Δs| < 1e-6`. The gap is
/// [`ProblemSpec::scan_gap_at`]; `degenerate` reports whether `E_1 - E_0`
/// itself closes below [`DEGENERATE_GAP`] anywhere on the grid.
pub fn min_gap_scan(spec: &ProblemSpec, ds: f64) -> Result<GapScan> {
    if !(ds > 0.0 && ds <= 0.5) {
        return Err(invalid(format!("grid spacing {ds} must lie in (0, 0.5]")));
    }
    let steps = (1.0 / ds).round().max(2.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let gaps: Vec<f64> = grid.iter().map(|&s| spec.scan_gap_at(s)).collect();
    let degenerate = grid.iter().any(|&s| spec.gap_at(s) < DEGENERATE_GAP);
    let imin = (0..gaps.len())
        .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
        .unwrap();
    let lo = grid[imin.saturating_sub(1)];
    let hi = grid[(imin + 1).min(steps)];
    let (s_min, gap) = golden_section(|s| spec.scan_gap_at(s), lo, hi, 1e-7);
    let (s_min, gap) = if gap <= gaps[imin] {
        (s_min, gap)
    } else {
        (grid[imin], gaps[imin])
    };
    Ok(GapScan {
        s_min,
        gap,
        degenerate: degenerate || gap < DEGENERATE_GAP,
        s_grid: grid[imin],
    })
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Lowest `k` energies (with multiplicity) on a grid of `s`, in GHz.
pub fn spectrum(spec: &ProblemSpec, s_grid: &[f64], k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    s_grid
        .iter()
        .map(|&s| {
            let d = decompose(spec, s)?;
            Ok((
                s,
                d.energies
                    .iter()
                    .take(k)
                    .map(|&e| rad_per_ns_to_ghz(e))
                    .collect(),
            ))
        })
        .collect()
}
