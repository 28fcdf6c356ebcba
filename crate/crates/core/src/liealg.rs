//! Finite-dimensional Lie algebras given by structure constants.
//!
//! Elements are coefficient vectors in the basis `e_1..e_d`, with
//! `[e_i, e_j] = sum_k c[i][j][k] e_k`. The algebra carries an inner product
//! `Q` used for orthogonal complements, minimum-norm velocities and the
//! dual norm `|mu|^2 = mu^T Q^{-1} mu` on covectors.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, RankPolicy};

pub const JACOBI_TOLERANCE: f64 = 1e-10;
pub const INVARIANCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("structure constant ({i}, {j}, {k}) is out of range for dimension {dim}")]
    IndexOutOfRange { i: usize, j: usize, k: usize, dim: usize },
    #[error("structure constant ({i}, {j}, {k}) must have i < j; the antisymmetric entry is implied")]
    NotUpperTriangular { i: usize, j: usize, k: usize },
    #[error("structure constant ({i}, {j}, {k}) given twice")]
    Duplicate { i: usize, j: usize, k: usize },
    #[error("structure constant ({i}, {j}, {k}) is not finite")]
    NonFinite { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails for (e{i}, e{j}, e{k}): residual {residual:e}")]
    Jacobi { i: usize, j: usize, k: usize, residual: f64 },
    #[error("inner product must be a {dim}x{dim} matrix")]
    MetricShape { dim: usize },
    #[error("inner product is not symmetric (defect {defect:e})")]
    MetricNotSymmetric { defect: f64 },
    #[error("inner product is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    MetricNotPositive { min_eigenvalue: f64 },
    #[error("{count} basis labels for dimension {dim}")]
    Labels { count: usize, dim: usize },
}

/// A linear subspace given by columns of `basis`, orthonormal for the metric
/// it was built with (the algebra's `Q` for subspaces of g, the Euclidean
/// metric for subspaces of phase space).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal for the intended metric.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Subspace {
        Subspace { basis }
    }

    pub fn zero(ambient: usize) -> Subspace {
        Subspace { basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn full(metric: &DMatrix<f64>) -> Subspace {
        let n = metric.nrows();
        Subspace { basis: linalg::orthonormalize(&DMatrix::identity(n, n), metric) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Projector `B B^T Q` onto the subspace along its Q-orthogonal complement.
    pub fn projector(&self, metric: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis * self.basis.transpose() * metric
    }

    /// Q-norm of the component of `v` orthogonal to the subspace.
    pub fn distance(&self, v: &DVector<f64>, metric: &DMatrix<f64>) -> f64 {
        let r = v - self.projector(metric) * v;
        (r.transpose() * metric * &r)[(0, 0)].max(0.0).sqrt()
    }

    /// Columns as owned vectors.
    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCheck {
    pub residual: f64,
    /// `(basis index in the subalgebra, i, j)` of the worst triple.
    pub worst: Option<(usize, usize, usize)>,
}

impl InvarianceCheck {
    pub fn passes(&self) -> bool {
        self.residual < INVARIANCE_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    labels: Vec<String>,
    /// `c[(i * d + j) * d + k]`
    structure: Vec<f64>,
    metric: DMatrix<f64>,
    metric_inv: DMatrix<f64>,
}

impl LieAlgebra {
    /// Builds an algebra from sparse upper triples `(i, j, k, value)` with
    /// `i < j` (0-based), completing antisymmetrically, and validates the
    /// Jacobi identity and the metric.
    pub fn new(
        labels: Vec<String>,
        triples: &[(usize, usize, usize, f64)],
        metric: DMatrix<f64>,
    ) -> Result<LieAlgebra, AlgebraError> {
        let alg = LieAlgebra::unchecked(labels, triples, metric)?;
        if let Some((i, j, k, residual)) = alg.jacobi_violation() {
            return Err(AlgebraError::Jacobi { i, j, k, residual });
        }
        Ok(alg)
    }

    /// Like [`LieAlgebra::new`] but skips the Jacobi check, so validators can
    /// report every problem with a file instead of the first one.
    pub fn unchecked(
        labels: Vec<String>,
        triples: &[(usize, usize, usize, f64)],
        metric: DMatrix<f64>,
    ) -> Result<LieAlgebra, AlgebraError> {
        let dim = metric.nrows();
        if metric.ncols() != dim {
            return Err(AlgebraError::MetricShape { dim });
        }
        if labels.len() != dim {
            return Err(AlgebraError::Labels { count: labels.len(), dim });
        }
        let mut structure = vec![0.0; dim * dim * dim];
        let mut seen = vec![false; dim * dim * dim];
        for &(i, j, k, v) in triples {
            if i >= dim || j >= dim || k >= dim {
                return Err(AlgebraError::IndexOutOfRange { i, j, k, dim });
            }
            if i >= j {
                return Err(AlgebraError::NotUpperTriangular { i, j, k });
            }
            if !v.is_finite() {
                return Err(AlgebraError::NonFinite { i, j, k });
            }
            let at = (i * dim + j) * dim + k;
            if seen[at] {
                return Err(AlgebraError::Duplicate { i, j, k });
            }
            seen[at] = true;
            structure[at] = v;
            structure[(j * dim + i) * dim + k] = -v;
        }
        let defect = (&metric - metric.transpose()).amax();
        if defect > 1e-12 * metric.amax().max(1.0) {
            return Err(AlgebraError::MetricNotSymmetric { defect });
        }
        let (eigs, _) = linalg::sym_eigen(&metric);
        if let Some(&min) = eigs.first() {
            if !(min > 0.0) {
                return Err(AlgebraError::MetricNotPositive { min_eigenvalue: min });
            }
        }
        let metric_inv = if dim == 0 {
            DMatrix::zeros(0, 0)
        } else {
            metric.clone().try_inverse().ok_or(AlgebraError::MetricNotPositive { min_eigenvalue: 0.0 })?
        };
        Ok(LieAlgebra { dim, labels, structure, metric, metric_inv })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn metric_inverse(&self) -> &DMatrix<f64> {
        &self.metric_inv
    }

    /// `c_{ij}^k`
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.iter().all(|&c| c == 0.0)
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..d {
                    out[k] += xy * self.c(i, j, k);
                }
            }
        }
        out
    }

    /// Largest componentwise Jacobi residual over all basis triples, with the
    /// offending triple.
    pub fn jacobi_residual(&self) -> (f64, Option<(usize, usize, usize)>) {
        let d = self.dim;
        let mut worst = (0.0, None);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let (ei, ej, ek) = (self.basis_vector(i), self.basis_vector(j), self.basis_vector(k));
                    let r = self.bracket(&self.bracket(&ei, &ej), &ek)
                        + self.bracket(&self.bracket(&ej, &ek), &ei)
                        + self.bracket(&self.bracket(&ek, &ei), &ej);
                    let m = r.amax();
                    if m > worst.0 {
                        worst = (m, Some((i, j, k)));
                    }
                }
            }
        }
        worst
    }

    fn jacobi_violation(&self) -> Option<(usize, usize, usize, f64)> {
        match self.jacobi_residual() {
            (r, Some((i, j, k))) if r >= JACOBI_TOLERANCE => Some((i, j, k, r)),
            _ => None,
        }
    }

    /// Matrix `L` with `(L xi)_j = sum_{i,k} xi_i c_{ij}^k mu_k`, i.e. the
    /// infinitesimal coadjoint action `xi -> ad*_xi mu`.
    pub fn coadjoint_matrix(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |j, i| (0..d).map(|k| self.c(i, j, k) * mu[k]).sum())
    }

    pub fn coadjoint(&self, xi: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        self.coadjoint_matrix(mu) * xi
    }

    /// Isotropy subalgebra `g_mu = { xi : ad*_xi mu = 0 }`, Q-orthonormal.
    pub fn coadjoint_isotropy(&self, mu: &DVector<f64>, policy: RankPolicy) -> Subspace {
        let kernel = linalg::null_space(&self.coadjoint_matrix(mu), policy);
        Subspace::from_orthonormal(linalg::orthonormalize(&kernel, &self.metric))
    }

    /// Q-orthogonal complement of `s` in g.
    pub fn orthogonal_complement(&self, s: &Subspace, policy: RankPolicy) -> Subspace {
        if s.rank() == 0 {
            return Subspace::full(&self.metric);
        }
        let constraint = s.basis().transpose() * &self.metric;
        let kernel = linalg::null_space(&constraint, policy);
        Subspace::from_orthonormal(linalg::orthonormalize(&kernel, &self.metric))
    }

    /// Infinitesimal `Ad(H)`-invariance of `Q` for the subalgebra spanned by
    /// `h`: the largest `|<[eta, e_i], e_j>_Q + <e_i, [eta, e_j]>_Q|`.
    pub fn check_invariance(&self, h: &Subspace) -> InvarianceCheck {
        let d = self.dim;
        let mut out = InvarianceCheck { residual: 0.0, worst: None };
        for (a, eta) in h.vectors().into_iter().enumerate() {
            let ad: Vec<DVector<f64>> = (0..d).map(|i| self.bracket(&eta, &self.basis_vector(i))).collect();
            for i in 0..d {
                for j in 0..d {
                    let lhs = (ad[i].transpose() * &self.metric * self.basis_vector(j))[(0, 0)];
                    let rhs = (self.basis_vector(i).transpose() * &self.metric * &ad[j])[(0, 0)];
                    let r = (lhs + rhs).abs();
                    if r > out.residual {
                        out = InvarianceCheck { residual: r, worst: Some((a, i, j)) };
                    }
                }
            }
        }
        out
    }

    /// `mu^T Q^{-1} mu`
    pub fn dual_norm_sq(&self, mu: &DVector<f64>) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        (mu.transpose() * &self.metric_inv * mu)[(0, 0)]
    }

    /// `<x, y>_Q`
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.metric * y)[(0, 0)]
    }
}

/// so(3) with `c_{ij}^k = eps_{ijk}` and the given metric.
pub fn so3(metric: DMatrix<f64>) -> Result<LieAlgebra, AlgebraError> {
    LieAlgebra::new(
        vec!["e1".into(), "e2".into(), "e3".into()],
        &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (0, 2, 1, -1.0)],
        metric,
    )
}

pub fn abelian(dim: usize) -> LieAlgebra {
    LieAlgebra::new((1..=dim).map(|i| format!("e{i}")).collect(), &[], DMatrix::identity(dim, dim))
        .expect("abelian algebra with identity metric is valid")
}
