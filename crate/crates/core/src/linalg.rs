//! Dense linear-algebra helpers on top of nalgebra: SVD rank decisions,
//! null spaces, metric orthonormalization and sorted symmetric spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

/// Singular-value threshold used for every rank decision.
///
/// A singular value counts as zero when it is at most
/// `max(relative * sigma_max, absolute)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankPolicy {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy { relative: 1e-10, absolute: 1e-12 }
    }
}

impl RankPolicy {
    pub fn threshold(&self, sigma_max: f64) -> f64 {
        (self.relative * sigma_max).max(self.absolute)
    }
}

/// Singular values (descending) with the matching right singular vectors as
/// columns of `v` (always a full square basis) and left vectors in `u`.
struct FullSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: DMatrix<f64>,
}

fn full_svd(m: &DMatrix<f64>) -> FullSvd {
    let (rows, cols) = m.shape();
    // Pad wide matrices with zero rows so the SVD returns a complete V.
    let padded;
    let work = if rows < cols {
        padded = {
            let mut p = DMatrix::zeros(cols, cols);
            p.view_mut((0, 0), (rows, cols)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = SVD::new(work.clone(), true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, order.len(), |r, c| vt[(order[c], r)]);
    let u = DMatrix::from_fn(rows, order.len(), |r, c| u[(r, order[c])]);
    FullSvd { u, sigma, v }
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn rank(m: &DMatrix<f64>, policy: RankPolicy) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    let tau = policy.threshold(smax);
    s.iter().filter(|&&x| x > tau).count()
}

/// Orthonormal (Euclidean) basis of the null space, as columns.
pub fn null_space(m: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = full_svd(m);
    let tau = policy.threshold(svd.sigma[0]);
    let r = svd.sigma.iter().filter(|&&s| s > tau).count();
    svd.v.columns(r, cols - r).into_owned()
}

/// Orthonormal (Euclidean) basis of the column space.
pub fn column_space(m: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = full_svd(m);
    let tau = policy.threshold(svd.sigma[0]);
    let r = svd.sigma.iter().filter(|&&s| s > tau).count();
    svd.u.columns(0, r).into_owned()
}

/// Minimum-norm least-squares solution of `m x = rhs`.
pub fn min_norm_solve(m: &DMatrix<f64>, rhs: &DVector<f64>, policy: RankPolicy) -> DVector<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DVector::zeros(cols);
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tau = policy.threshold(smax);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut x = DVector::zeros(cols);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tau {
            let coeff = u.column(k).dot(rhs) / s;
            x += vt.row(k).transpose() * coeff;
        }
    }
    x
}

/// Returns a basis of the same column space that is orthonormal for the
/// inner product `<x, y> = x^T metric y`. Columns must be independent.
///
/// One Cholesky pass leaves an error of order `cond(B)^2 eps`; the second
/// pass brings it back to roundoff.
pub fn orthonormalize(basis: &DMatrix<f64>, metric: &DMatrix<f64>) -> DMatrix<f64> {
    let once = orthonormalize_once(basis, metric);
    orthonormalize_once(&once, metric)
}

fn orthonormalize_once(basis: &DMatrix<f64>, metric: &DMatrix<f64>) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return basis.clone();
    }
    let gram = basis.transpose() * metric * basis;
    let gram = (&gram + gram.transpose()) * 0.5;
    match gram.clone().cholesky() {
        Some(ch) => {
            // B L^{-T}: Gram becomes L^{-1} G L^{-T} = I.
            let l = ch.l();
            let lt_inv = l
                .transpose()
                .try_inverse()
                .expect("Cholesky factor of a positive definite Gram matrix is invertible");
            basis * lt_inv
        }
        None => {
            // Fall back to a symmetric inverse square root on the numerical range.
            let eig = SymmetricEigen::new(gram);
            let cols: Vec<DVector<f64>> = eig
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &lam)| lam > 1e-300)
                .map(|(k, &lam)| basis * eig.eigenvectors.column(k) / lam.sqrt())
                .collect();
            if cols.is_empty() {
                DMatrix::zeros(basis.nrows(), 0)
            } else {
                DMatrix::from_columns(&cols)
            }
        }
    }
}

/// Eigenvalues in ascending order with matching eigenvectors as columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Largest absolute deviation of `basis^T metric basis` from the identity.
pub fn orthonormality_defect(basis: &DMatrix<f64>, metric: &DMatrix<f64>) -> f64 {
    let k = basis.ncols();
    if k == 0 {
        return 0.0;
    }
    let g = basis.transpose() * metric * basis - DMatrix::<f64>::identity(k, k);
    g.amax()
}

/// Norm of the component of each column of `vectors` outside `span(basis)`,
/// where `basis` is Euclidean-orthonormal; returns the largest.
pub fn max_distance_from_span(vectors: &DMatrix<f64>, basis: &DMatrix<f64>) -> f64 {
    if vectors.ncols() == 0 {
        return 0.0;
    }
    let residual = if basis.ncols() == 0 {
        vectors.clone()
    } else {
        vectors - basis * (basis.transpose() * vectors)
    };
    residual.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Symmetric matrix from a row-major buffer.
pub fn from_row_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}
