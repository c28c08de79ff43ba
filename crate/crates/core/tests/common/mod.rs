//! Brute-force reference: the Davies master equation on the full 2^n
//! computational space, built from clustered eigenprojectors of the dense
//! Hamiltonian: one Lindblad operator per ordered pair of distinct
//! eigenspaces, plus the zero-frequency operator `sum_a P_a C P_a`.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use revanneal_core::davies::{rate, BathSpec, DephasingModel};
use revanneal_core::ode::Dop853;
use revanneal_core::{AnnealPath, ScheduleCurves, C64};

pub const CLUSTER_TOL: f64 = 1e-9;

/// `sigma_z` of qubit `q`, qubit 0 being the most significant bit.
pub fn sz(n: usize, q: usize, i: usize) -> f64 {
    if (i >> (n - 1 - q)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `-(A/2) sum sigma^x - (B n/2) (sum sigma^z / n)^p` in rad/ns.
pub fn hamiltonian(n: usize, p: i32, curves: &ScheduleCurves, s: f64) -> DMatrix<f64> {
    let (a, b) = curves.eval(s);
    let dim = 1 << n;
    let pi = std::f64::consts::PI;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let m: f64 = (0..n).map(|q| sz(n, q, i)).sum::<f64>() / n as f64;
        h[(i, i)] = -pi * b * n as f64 * m.powi(p);
        for q in 0..n {
            h[(i ^ (1 << q), i)] -= pi * a;
        }
    }
    h
}

pub fn couplings(n: usize, model: DephasingModel) -> Vec<DMatrix<f64>> {
    let dim = 1 << n;
    let per_qubit: Vec<DMatrix<f64>> = (0..n)
        .map(|q| DMatrix::from_fn(dim, dim, |i, j| if i == j { sz(n, q, i) } else { 0.0 }))
        .collect();
    match model {
        DephasingModel::Collective => vec![per_qubit
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, c| acc + c)],
        DephasingModel::Independent => per_qubit,
    }
}

/// Normalized symmetric state `|w>` in the computational basis.
pub fn dicke(n: usize, w: usize) -> Vec<f64> {
    let dim = 1usize << n;
    let count = (0..dim).filter(|i| i.count_ones() as usize == w).count() as f64;
    (0..dim)
        .map(|i| {
            if i.count_ones() as usize == w {
                1.0 / count.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

pub struct NaiveModel {
    pub n: usize,
    pub p: i32,
    pub curves: ScheduleCurves,
    pub bath: BathSpec,
    pub couplings: Vec<DMatrix<f64>>,
    pub cluster_tol: f64,
}

impl NaiveModel {
    pub fn new(n: usize, p: i32, bath: BathSpec) -> Self {
        NaiveModel {
            n,
            p,
            curves: ScheduleCurves::linear(),
            couplings: couplings(n, bath.model),
            bath,
            cluster_tol: CLUSTER_TOL,
        }
    }

    /// `d rho / dt` at fixed `s`.
    pub fn generator(&self, s: f64, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let h = hamiltonian(self.n, self.p, &self.curves, s);
        let dim = h.nrows();
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let e: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let v = DMatrix::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, order[j])]);
        let mut cluster = vec![0usize; dim];
        let mut energy = vec![e[0]];
        for k in 1..dim {
            if e[k] - *energy.last().unwrap() > self.cluster_tol {
                energy.push(e[k]);
            }
            cluster[k] = energy.len() - 1;
        }
        let cv = |m: &DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
        let vc = cv(&v);
        let rt = vc.adjoint() * rho * &vc;
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] = C64::new(0.0, -(e[i] - e[j])) * rt[(i, j)];
            }
        }
        for c in &self.couplings {
            let ct = v.transpose() * c * &v;
            let g = |a: usize, b: usize| {
                if a == b {
                    0.0
                } else {
                    rate(energy[b] - energy[a], &self.bath)
                }
            };
            // sum_{a != b} gamma_ab L_ab rho L_ab^dag
            for i in 0..dim {
                for j in 0..dim {
                    if cluster[i] != cluster[j] {
                        continue;
                    }
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..dim {
                        for l in 0..dim {
                            if cluster[k] != cluster[l] {
                                continue;
                            }
                            acc +=
                                rt[(k, l)] * (g(cluster[i], cluster[k]) * ct[(i, k)] * ct[(j, l)]);
                        }
                    }
                    out[(i, j)] += acc;
                }
            }
            // sum_{a != b} gamma_ab L_ab^dag L_ab
            let kmat = DMatrix::from_fn(dim, dim, |k, l| {
                if cluster[k] != cluster[l] {
                    return C64::new(0.0, 0.0);
                }
                let s: f64 = (0..dim)
                    .map(|i| g(cluster[i], cluster[k]) * ct[(i, k)] * ct[(i, l)])
                    .sum();
                C64::new(s, 0.0)
            });
            out -= (&kmat * &rt + &rt * &kmat) * C64::new(0.5, 0.0);
            // gamma_0 D[L_0]
            let l0 = DMatrix::from_fn(dim, dim, |i, j| {
                C64::new(
                    if cluster[i] == cluster[j] {
                        ct[(i, j)]
                    } else {
                        0.0
                    },
                    0.0,
                )
            });
            let g0 = C64::new(rate(0.0, &self.bath), 0.0);
            let k0 = l0.adjoint() * &l0;
            out += (&l0 * &rt * l0.adjoint() - (&k0 * &rt + &rt * &k0) * C64::new(0.5, 0.0)) * g0;
        }
        &vc * out * vc.adjoint()
    }

    /// Integrates along `path` from `rho0`.
    pub fn evolve(&self, path: &AnnealPath, rho0: &DMatrix<C64>, tol: f64) -> DMatrix<C64> {
        let dim = rho0.nrows();
        let mut y: Vec<C64> = rho0.iter().copied().collect();
        let solver = Dop853::with_tol(tol);
        let mut h = None;
        for (t0, t1) in path.segments() {
            let f = |t: f64, y: &[C64], dy: &mut [C64]| {
                let rho = DMatrix::from_column_slice(dim, dim, y);
                let d = self.generator(path.s_at(t), &rho);
                dy.copy_from_slice(d.as_slice());
            };
            let (_, last) = solver.integrate(f, t0, t1, &mut y, h).unwrap();
            h = Some(last);
        }
        DMatrix::from_column_slice(dim, dim, &y)
    }
}

pub fn pure(v: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(v.len(), v.len(), |i, j| C64::new(v[i] * v[j], 0.0))
}

/// `<v| rho |v>` for a real vector.
pub fn expect(rho: &DMatrix<C64>, v: &[f64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += rho[(i, j)] * (v[i] * v[j]);
        }
    }
    acc.re
}
pub mod props;
