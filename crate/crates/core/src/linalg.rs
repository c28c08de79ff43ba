//! Small dense linear-algebra helpers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
pub fn eigh(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence for {n}x{n} matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    Ok((values, vectors))
}

/// Eigen-decomposition of a symmetric tridiagonal matrix given by its diagonal
/// and super-diagonal.
pub fn eigh_tridiagonal(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = diag.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
    }
    for i in 0..off.len() {
        m[(i, i + 1)] = off[i];
        m[(i + 1, i)] = off[i];
    }
    eigh(&m)
}

/// Flips eigenvector signs so that each column has non-negative overlap with
/// the matching column of `reference`.
pub fn align_signs(vectors: &mut DMatrix<f64>, reference: &DMatrix<f64>) {
    for j in 0..vectors.ncols().min(reference.ncols()) {
        if vectors.column(j).dot(&reference.column(j)) < 0.0 {
            vectors.column_mut(j).neg_mut();
        }
    }
}

/// Binomial coefficient as `usize`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}
