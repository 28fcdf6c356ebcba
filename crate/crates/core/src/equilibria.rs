//! Relative equilibria: velocity recovery, Newton refinement and the
//! isotropy data attached to a point.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::EvalError;
use crate::liealg::Subspace;
use crate::linalg::{self, RankPolicy};
use crate::phasespace::SystemDef;

pub const REFINE_TOLERANCE: f64 = 1e-12;
pub const REFINE_MAX_ITERATIONS: usize = 50;
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;
const COADJOINT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("Newton system is singular; the residual lies along the uncorrectable direction {direction:?}")]
    Singular { direction: Vec<f64>, residual: f64 },
    #[error("Newton iteration diverged (residual {residual:e} after {iterations} iterations)")]
    Diverged { residual: f64, iterations: usize },
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { residual: f64, iterations: usize },
    #[error("point has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySolution {
    pub xi: DVector<f64>,
    /// `|xi_M(m) - X_h(m)|`
    pub residual: f64,
    /// `|ad*_xi mu|`; zero at a genuine relative equilibrium.
    pub coadjoint_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelEquilibrium {
    pub point: DVector<f64>,
    pub xi: DVector<f64>,
    pub residual: f64,
    pub mu: DVector<f64>,
    /// Q-orthonormal basis of the isotropy algebra of the point, as columns.
    pub g_m: Subspace,
    pub xi_in_g_mu: bool,
    pub coadjoint_defect: f64,
    pub xi_orthogonal_to_g_m: bool,
    /// `max |<xi, v>_Q|` over the basis of `g_m`.
    pub orthogonality_defect: f64,
    pub iterations: usize,
}

fn check_dim(sys: &SystemDef, m: &DVector<f64>) -> Result<(), RefineError> {
    if m.len() != sys.dim() {
        return Err(RefineError::Dimension { got: m.len(), expected: sys.dim() });
    }
    Ok(())
}

/// `g_m = { xi : A_xi m + b_xi = 0 }`, Q-orthonormal.
pub fn isotropy_algebra_of_point(sys: &SystemDef, m: &DVector<f64>) -> Subspace {
    let policy = sys.numerics().rank;
    let kernel = linalg::null_space(&sys.infinitesimal_action(m), policy);
    Subspace::from_orthonormal(linalg::orthonormalize(&kernel, sys.algebra().metric()))
}

/// Least-squares velocity with minimum Q-norm among all minimizers, which
/// makes it Q-orthogonal to `g_m`.
pub fn solve_velocity(sys: &SystemDef, m: &DVector<f64>) -> Result<VelocitySolution, EvalError> {
    let x = sys.vector_field(m.as_slice())?;
    let action = sys.infinitesimal_action(m);
    let xi = min_q_norm_solve(&action, &x, sys.algebra().metric(), sys.numerics().rank);
    let residual = (&action * &xi - &x).norm();
    let mu = sys.moment_map(m);
    let coadjoint_defect = sys.algebra().coadjoint(&xi, &mu).norm();
    Ok(VelocitySolution { xi, residual, coadjoint_defect })
}

/// `argmin |M xi - rhs|` with the smallest `xi^T Q xi`, via `xi = L^{-T} eta`
/// for `Q = L L^T`.
fn min_q_norm_solve(m: &DMatrix<f64>, rhs: &DVector<f64>, q: &DMatrix<f64>, policy: RankPolicy) -> DVector<f64> {
    let d = q.nrows();
    if d == 0 {
        return DVector::zeros(0);
    }
    let l = q.clone().cholesky().expect("metric is positive definite").l();
    let lt_inv = l.transpose().try_inverse().expect("Cholesky factor is invertible");
    let eta = linalg::min_norm_solve(&(m * &lt_inv), rhs, policy);
    lt_inv * eta
}

/// Assembles the isotropy data and flags for a candidate `(m, xi)`.
pub fn characterize(sys: &SystemDef, m: &DVector<f64>, xi: &DVector<f64>, iterations: usize) -> Result<RelEquilibrium, EvalError> {
    let x = sys.vector_field(m.as_slice())?;
    let residual = (sys.infinitesimal_action(m) * xi - x).norm();
    let mu = sys.moment_map(m);
    let g_m = isotropy_algebra_of_point(sys, m);
    let algebra = sys.algebra();
    let coadjoint_defect = algebra.coadjoint(xi, &mu).norm();
    let orthogonality_defect = g_m.vectors().iter().map(|v| algebra.inner(xi, v).abs()).fold(0.0, f64::max);
    let scale = 1.0f64.max(xi.norm() * mu.norm());
    Ok(RelEquilibrium {
        point: m.clone(),
        xi: xi.clone(),
        residual,
        mu,
        g_m,
        xi_in_g_mu: coadjoint_defect <= COADJOINT_TOLERANCE * scale,
        coadjoint_defect,
        xi_orthogonal_to_g_m: orthogonality_defect <= ORTHOGONALITY_TOLERANCE,
        orthogonality_defect,
        iterations,
    })
}

/// Gauss-Newton on `F(m, xi) = grad h(m) - dPhi(m)^T xi` with `xi` restricted
/// to the Q-orthogonal complement of `g_m`. Steps are minimum-norm, so flat
/// directions of the equilibrium family are left alone.
pub fn refine_relative_equilibrium(
    sys: &SystemDef,
    m0: &DVector<f64>,
    xi0: &DVector<f64>,
) -> Result<RelEquilibrium, RefineError> {
    check_dim(sys, m0)?;
    let policy = sys.numerics().rank;
    let algebra = sys.algebra();
    let dim = sys.dim();
    let mut m = m0.clone();
    let mut xi = xi0.clone();
    let mut iterations = 0;
    // Drop the g_m component of the starting velocity.
    let gm = isotropy_algebra_of_point(sys, &m);
    let mut complement = algebra.orthogonal_complement(&gm, policy);
    let mut alpha = complement.basis().transpose() * algebra.metric() * &xi;
    xi = complement.basis() * &alpha;
    let mut f = sys.augmented_gradient(&m, &xi)?;
    let initial = f.norm().max(1.0);
    while f.norm() >= REFINE_TOLERANCE {
        if iterations == REFINE_MAX_ITERATIONS {
            return Err(RefineError::NotConverged { residual: f.norm(), iterations });
        }
        let n = complement.basis();
        let r = n.ncols();
        let mut jac = DMatrix::zeros(dim, dim + r);
        jac.view_mut((0, 0), (dim, dim)).copy_from(&sys.augmented_hessian(&m, &xi)?);
        if r > 0 {
            jac.view_mut((0, dim), (dim, r)).copy_from(&(-(sys.moment_jacobian(&m).transpose() * n)));
        }
        if let Some(direction) = uncorrectable_direction(&jac, &f, policy) {
            return Err(RefineError::Singular { direction, residual: f.norm() });
        }
        let step = linalg::min_norm_solve(&jac, &(-&f), policy);
        m += step.rows(0, dim);
        alpha += step.rows(dim, r);
        iterations += 1;
        // Re-gauge against the isotropy algebra of the new point.
        xi = n * &alpha;
        let gm = isotropy_algebra_of_point(sys, &m);
        complement = algebra.orthogonal_complement(&gm, policy);
        alpha = complement.basis().transpose() * algebra.metric() * &xi;
        xi = complement.basis() * &alpha;
        f = sys.augmented_gradient(&m, &xi)?;
        if !f.norm().is_finite() || f.norm() > 1e8 * initial {
            return Err(RefineError::Diverged { residual: f.norm(), iterations });
        }
    }
    Ok(characterize(sys, &m, &xi, iterations)?)
}

/// A left-null vector of `jac` carrying most of `f`, if the Newton system
/// cannot reduce the residual at all.
fn uncorrectable_direction(jac: &DMatrix<f64>, f: &DVector<f64>, policy: RankPolicy) -> Option<Vec<f64>> {
    let left = linalg::null_space(&jac.transpose(), policy);
    if left.ncols() == 0 {
        return None;
    }
    let coeffs = left.transpose() * f;
    if coeffs.norm() < 0.9 * f.norm() {
        return None;
    }
    let v = left * &coeffs;
    Some((v.clone() / v.norm()).iter().copied().collect())
}

/// `exp(t xi) . m` for the affine action, from the exponential of the
/// augmented matrix `[[A_xi, b_xi], [0, 0]]`.
pub fn group_action(sys: &SystemDef, xi: &DVector<f64>, t: f64, m: &DVector<f64>) -> DVector<f64> {
    let dim = sys.dim();
    let (a, b) = sys.generator_of(xi);
    let mut aug = DMatrix::zeros(dim + 1, dim + 1);
    aug.view_mut((0, 0), (dim, dim)).copy_from(&(a * t));
    aug.view_mut((0, dim), (dim, 1)).copy_from(&(b * t));
    let e = aug.exp();
    e.view((0, 0), (dim, dim)) * m + e.view((0, dim), (dim, 1))
}
