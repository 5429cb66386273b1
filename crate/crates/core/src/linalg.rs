//! Small dense helpers on top of nalgebra.

use nalgebra::SymmetricEigen;

use crate::{CMatrix, CVector, C64};

/// Ridge used when the columns are numerically dependent.
pub const RIDGE: f64 = 1e-10;

/// Relative pivot below which a column set counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Left pseudo-inverse `A^† = (A^H A)^{-1} A^H` of a tall matrix via QR,
/// falling back to ridge-regularised normal equations when `A` is rank
/// deficient. The flag is `true` when the fallback was used.
pub fn pinv(a: &CMatrix) -> (CMatrix, bool) {
    let (m, k) = a.shape();
    if k == 0 {
        return (CMatrix::zeros(0, m), false);
    }
    if k <= m {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag_max = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
        let diag_min = (0..k).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if diag_max > 0.0 && diag_min > RANK_TOL * diag_max {
            let q = qr.q();
            if let Some(x) = r.solve_upper_triangular(&q.adjoint()) {
                return (x, false);
            }
        }
    }
    (ridge_pinv(a), true)
}

fn ridge_pinv(a: &CMatrix) -> CMatrix {
    let k = a.ncols();
    let mut gram = a.ad_mul(a);
    let scale = (0..k).map(|i| gram[(i, i)].re).fold(0.0, f64::max).max(1.0);
    for i in 0..k {
        gram[(i, i)] += C64::from(RIDGE * scale);
    }
    match gram.clone().cholesky() {
        Some(ch) => ch.solve(&a.adjoint()),
        None => CMatrix::zeros(k, a.nrows()),
    }
}

/// Whether the columns of `a` are numerically independent.
pub fn full_column_rank(a: &CMatrix) -> bool {
    let (m, k) = a.shape();
    if k == 0 {
        return true;
    }
    if k > m {
        return false;
    }
    let r = a.clone().qr().r();
    let diag_max = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    let diag_min = (0..k).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    diag_max > 0.0 && diag_min > RANK_TOL * diag_max
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(r: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = hermitian_part(r);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<CVector>>(),
    );
    (values, vectors)
}

/// `(R + R^H) / 2`.
pub fn hermitian_part(r: &CMatrix) -> CMatrix {
    (r + r.adjoint()) * C64::from(0.5)
}

/// Largest `|R - R^H|` entry.
pub fn max_asymmetry(r: &CMatrix) -> f64 {
    (r - r.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
