//! Collective-spin operators in the Dicke sector and in the full qubit space.
//!
//! The full `2^n` space is handled through its decomposition into total-spin
//! sectors. A Hamiltonian built from collective operators acts as `H_S (x) 1`
//! on a sector of spin `S` that appears with multiplicity `d_S`, so a state is
//! stored sector by sector as a `(2S+1) x d_S` column-major block.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{binomial, eigh};

/// Default cap on a single dense matrix allocation, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

/// Largest qubit count accepted for full-space operators.
pub const FULL_SPACE_MAX_N: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// The `(n+1)`-dimensional maximal-spin sector.
    Dicke,
    /// All `2^n` computational states.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DickeSector {
    pub n: usize,
}

impl DickeSector {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// `m = 1 - 2w/n`.
    pub fn magnetization(&self, w: usize) -> f64 {
        1.0 - 2.0 * w as f64 / self.n as f64
    }

    /// Eigenvalue `n - 2w` of `S_z`.
    pub fn sz_eigenvalue(&self, w: usize) -> f64 {
        self.n as f64 - 2.0 * w as f64
    }

    /// `S(S+1)` with `S = n/2`, in spin units.
    pub fn casimir(&self) -> f64 {
        let s = self.n as f64 / 2.0;
        s * (s + 1.0)
    }

    /// Dicke index for a magnetization, if `n (1 - m) / 2` is an integer in range.
    pub fn w_of_m0(&self, m0: f64) -> Option<usize> {
        let w = self.n as f64 * (1.0 - m0) / 2.0;
        let r = w.round();
        if (w - r).abs() < 1e-9 && r >= 0.0 && r <= self.n as f64 {
            Some(r as usize)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveOperators {
    pub s_x: DMatrix<f64>,
    pub s_z: DMatrix<f64>,
}

impl CollectiveOperators {
    /// `(S_z/n)^p` as a diagonal matrix.
    pub fn m_z_pow(&self, p: u32) -> DMatrix<f64> {
        let n = (self.s_z.nrows() - 1) as f64;
        DMatrix::from_diagonal(&self.s_z.diagonal().map(|v| (v / n).powi(p as i32)))
    }

    /// `S_y` from the ladder operators, `S_y = (S_+ - S_-) / (2i)`, returned
    /// as the real matrix `i S_y`.
    pub fn i_s_y(&self) -> DMatrix<f64> {
        let mut m = self.s_x.clone();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                // Row index below column: lowering part.
                if i > j {
                    m[(i, j)] = -m[(i, j)];
                }
            }
        }
        m
    }
}

fn check_cap(what: &str, dim: usize, cap: usize) -> Result<()> {
    let needed = dim
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(8))
        .unwrap_or(usize::MAX);
    if needed > cap {
        return Err(Error::MemoryCap {
            what: what.into(),
            needed,
            cap,
        });
    }
    Ok(())
}

/// Ladder coefficient `<j-1| S_+ |j>` for twice-spin `two_s` (Pauli-sum units).
#[inline]
pub fn ladder(two_s: usize, j: usize) -> f64 {
    ((j * (two_s + 1 - j)) as f64).sqrt()
}

/// Builds the Dicke sector for `n` qubits with the default memory cap.
pub fn build_dicke_sector(n: usize) -> Result<(DickeSector, CollectiveOperators)> {
    build_dicke_sector_capped(n, DEFAULT_MEMORY_CAP)
}

pub fn build_dicke_sector_capped(
    n: usize,
    cap: usize,
) -> Result<(DickeSector, CollectiveOperators)> {
    if n < 2 {
        return Err(invalid(format!("n must be at least 2, got {n}")));
    }
    check_cap("Dicke sector", n + 1, cap)?;
    let sec = DickeSector { n };
    let mut s_x = DMatrix::zeros(n + 1, n + 1);
    for w in 1..=n {
        let c = ladder(n, w);
        s_x[(w - 1, w)] = c;
        s_x[(w, w - 1)] = c;
    }
    let s_z = DMatrix::from_diagonal(&DVector::from_fn(n + 1, |w, _| sec.sz_eigenvalue(w)));
    Ok((sec, CollectiveOperators { s_x, s_z }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullSpaceOperators {
    pub n: usize,
    /// Diagonals of `sigma_z` for qubits `1..=n` (index 0 is qubit 1).
    pub sigma_z: Vec<DVector<f64>>,
    pub sigma_x_total: DMatrix<f64>,
}

impl FullSpaceOperators {
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Diagonal of `sum_i sigma_i^z`.
    pub fn sigma_z_total(&self) -> DVector<f64> {
        self.sigma_z
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, z| acc + z)
    }
}

fn check_full_n(n: usize) -> Result<()> {
    if !(2..=FULL_SPACE_MAX_N).contains(&n) {
        return Err(invalid(format!(
            "full space needs 2 <= n <= {FULL_SPACE_MAX_N}, got {n}"
        )));
    }
    Ok(())
}

/// `sigma_z` of qubit `q` (0-based, qubit 1 is the most significant bit).
#[inline]
pub fn qubit_sz(n: usize, q: usize, index: usize) -> f64 {
    if (index >> (n - 1 - q)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn build_full_space(n: usize) -> Result<FullSpaceOperators> {
    build_full_space_capped(n, DEFAULT_MEMORY_CAP)
}

pub fn build_full_space_capped(n: usize, cap: usize) -> Result<FullSpaceOperators> {
    check_full_n(n)?;
    let dim = 1usize << n;
    check_cap("full-space operator", dim, cap)?;
    let sigma_z = (0..n)
        .map(|q| DVector::from_fn(dim, |i, _| qubit_sz(n, q, i)))
        .collect();
    let mut sigma_x_total = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for q in 0..n {
            sigma_x_total[(i ^ (1 << q), i)] = 1.0;
        }
    }
    Ok(FullSpaceOperators {
        n,
        sigma_z,
        sigma_x_total,
    })
}

/// Columns are the normalized symmetric states `|w>`, `w = 0..=n`, in the
/// computational basis.
pub fn symmetric_isometry(n: usize) -> Result<DMatrix<f64>> {
    check_full_n(n)?;
    let dim = 1usize << n;
    let mut p = DMatrix::zeros(dim, n + 1);
    for i in 0..dim {
        let w = i.count_ones() as usize;
        p[(i, w)] = 1.0 / (binomial(n, w) as f64).sqrt();
    }
    Ok(p)
}

/// A total-spin sector of twice-spin `two_s` appearing `mult` times.
#[derive(Clone, Debug, PartialEq)]
pub struct Sector {
    pub two_s: usize,
    pub mult: usize,
    /// Offset of the sector block in a flat state vector.
    pub offset: usize,
    /// Super-diagonal of `S_x` in the `j = 0..=2S` basis.
    pub sx_off: Vec<f64>,
    /// `S_z` eigenvalues `2S - 2j`.
    pub sz: Vec<f64>,
}

impl Sector {
    fn new(two_s: usize, mult: usize, offset: usize) -> Self {
        let sx_off = (1..=two_s).map(|j| ladder(two_s, j)).collect();
        let sz = (0..=two_s).map(|j| two_s as f64 - 2.0 * j as f64).collect();
        Sector {
            two_s,
            mult,
            offset,
            sx_off,
            sz,
        }
    }

    /// Number of spin levels, `2S + 1`.
    pub fn dim(&self) -> usize {
        self.two_s + 1
    }

    /// Number of amplitudes stored for this sector.
    pub fn len(&self) -> usize {
        self.dim() * self.mult
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of level `j`, copy `alpha`.
    #[inline]
    pub fn index(&self, j: usize, alpha: usize) -> usize {
        self.offset + alpha * self.dim() + j
    }

    /// Dense `S_x` block.
    pub fn s_x(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, &c) in self.sx_off.iter().enumerate() {
            m[(i, i + 1)] = c;
            m[(i + 1, i)] = c;
        }
        m
    }
}

/// Working representation of a problem: the list of spin sectors and, for the
/// full space, the orthogonal change of basis to the computational basis.
#[derive(Clone, Debug)]
pub struct Representation {
    pub n: usize,
    pub space: Space,
    pub sectors: Vec<Sector>,
    /// Columns are the sector basis vectors in computational coordinates
    /// (full space only), ordered like the flat state layout.
    pub isometry: Option<DMatrix<f64>>,
    len: usize,
}

impl Representation {
    pub fn dicke(n: usize) -> Result<Self> {
        build_dicke_sector(n)?;
        Ok(Representation {
            n,
            space: Space::Dicke,
            sectors: vec![Sector::new(n, 1, 0)],
            isometry: None,
            len: n + 1,
        })
    }

    pub fn full(n: usize) -> Result<Self> {
        check_full_n(n)?;
        let dim = 1usize << n;
        check_cap("sector isometry", dim, DEFAULT_MEMORY_CAP)?;
        let mut sectors = Vec::new();
        let mut offset = 0;
        for w in 0..=n / 2 {
            let mult = binomial(n, w) - if w > 0 { binomial(n, w - 1) } else { 0 };
            let sec = Sector::new(n - 2 * w, mult, offset);
            offset += sec.len();
            sectors.push(sec);
        }
        debug_assert_eq!(offset, dim);
        let mut iso = DMatrix::zeros(dim, dim);
        for (w, sec) in sectors.iter().enumerate() {
            let hw = highest_weight_vectors(n, w)?;
            debug_assert_eq!(hw.len(), sec.mult);
            for (alpha, top) in hw.into_iter().enumerate() {
                let mut v = top;
                for j in 0..sec.dim() {
                    if j > 0 {
                        v = lower(n, &v) / ladder(sec.two_s, j);
                    }
                    iso.set_column(sec.index(j, alpha), &v);
                }
            }
        }
        Ok(Representation {
            n,
            space: Space::Full,
            sectors,
            isometry: Some(iso),
            len: dim,
        })
    }

    pub fn new(n: usize, space: Space) -> Result<Self> {
        match space {
            Space::Dicke => Self::dicke(n),
            Space::Full => Self::full(n),
        }
    }

    /// Length of a flat state vector.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The maximal-spin sector, which holds the ferromagnetic states.
    pub fn top(&self) -> &Sector {
        &self.sectors[0]
    }

    /// Flat index of the symmetric state `|w>`.
    pub fn symmetric_index(&self, w: usize) -> usize {
        self.top().index(w, 0)
    }

    /// Total-spin sector dimension count (sum of `2S+1`), i.e. distinct levels.
    pub fn level_count(&self) -> usize {
        self.sectors.iter().map(Sector::dim).sum()
    }
}

/// Applies `S_- = sum_i sigma_i^-` (flip a 0 bit to 1).
fn lower(n: usize, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for (i, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for q in 0..n {
            let bit = 1 << q;
            if i & bit == 0 {
                out[i | bit] += a;
            }
        }
    }
    out
}

/// Orthonormal basis of the kernel of `S_+` among states with `w` flipped spins.
fn highest_weight_vectors(n: usize, w: usize) -> Result<Vec<DVector<f64>>> {
    let dim = 1usize << n;
    let states: Vec<usize> = (0..dim).filter(|i| i.count_ones() as usize == w).collect();
    if w == 0 {
        return Ok(vec![DVector::from_fn(
            dim,
            |i, _| if i == 0 { 1.0 } else { 0.0 },
        )]);
    }
    let targets: Vec<usize> = (0..dim)
        .filter(|i| i.count_ones() as usize == w - 1)
        .collect();
    let pos = |x: usize| targets.binary_search(&x).unwrap();
    let mut jp = DMatrix::zeros(targets.len(), states.len());
    for (c, &i) in states.iter().enumerate() {
        for q in 0..n {
            let bit = 1 << q;
            if i & bit != 0 {
                jp[(pos(i ^ bit), c)] = 1.0;
            }
        }
    }
    let gram = jp.transpose() * &jp;
    let (vals, vecs) = eigh(&gram)?;
    let mut out = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if lam < 0.5 {
            let mut v = DVector::zeros(dim);
            for (c, &i) in states.iter().enumerate() {
                v[i] = vecs[(c, k)];
            }
            out.push(v);
        }
    }
    Ok(out)
}
