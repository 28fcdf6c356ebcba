//! Symplectic slice at a relative equilibrium and the definiteness verdict.
//!
//! The slice is realized as the Euclidean complement of `T_m(H.m)` inside
//! `ker dPhi(m)`. Any complement represents the quotient; the verdict does
//! not depend on the choice because the Hessian descends.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::equilibria::RelEquilibrium;
use crate::expr::EvalError;
use crate::liealg::{InvarianceCheck, Subspace};
use crate::linalg::{self, RankPolicy};
use crate::phasespace::{symplectic_matrix, SystemDef};

pub const CONTAINMENT_TOLERANCE: f64 = 1e-10;
pub const SLICE_NONDEGENERACY: f64 = 1e-10;
pub const DESCENT_TOLERANCE: f64 = 1e-9;
pub const KERNEL_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SliceError {
    #[error("T_m(H.m) is not contained in ker dPhi(m) (distance {distance:e})")]
    NotContained { distance: f64 },
    #[error("slice has odd dimension {0}")]
    OddDimension(usize),
    #[error("restricted symplectic form is degenerate on the slice (|det| = {det:e})")]
    Degenerate { det: f64 },
    #[error("d(h - <Phi, xi>)(m) = {norm:e} does not vanish; the Hessian is not well defined")]
    NotCritical { norm: f64 },
    #[error("Hessian does not vanish along the orbit directions (|K^T H T_H| = {defect:e}); velocity is inconsistent")]
    NoDescent { defect: f64 },
    #[error("inner product is not Ad-invariant on the isotropy algebra of mu (residual {residual:e} at basis {basis}, e{i}, e{j})")]
    MetricNotInvariant { residual: f64, basis: usize, i: usize, j: usize },
    #[error("slice test ({slice:?}) and kernel test ({kernel:?}) disagree")]
    InternalConsistency { slice: Verdict, kernel: Verdict },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    StableCertified,
    InconclusiveIndefinite,
    InconclusiveDegenerate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::StableCertified => "STABLE_CERTIFIED",
            Verdict::InconclusiveIndefinite => "INCONCLUSIVE_INDEFINITE",
            Verdict::InconclusiveDegenerate => "INCONCLUSIVE_DEGENERATE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    /// Zero-dimensional form.
    Vacuous,
    PositiveDefinite,
    NegativeDefinite,
    PositiveSemidefinite,
    NegativeSemidefinite,
    Zero,
    Indefinite,
}

impl Definiteness {
    pub fn is_definite(self) -> bool {
        matches!(self, Definiteness::Vacuous | Definiteness::PositiveDefinite | Definiteness::NegativeDefinite)
    }

    pub fn is_semidefinite(self) -> bool {
        !matches!(self, Definiteness::Indefinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Spectrum of a symmetric form with its classification under the relative
/// gap `min |lambda| > relative * max |lambda|`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormClass {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub threshold: f64,
    pub signature: Signature,
    pub definiteness: Definiteness,
}

pub fn classify(form: &DMatrix<f64>, relative: f64) -> FormClass {
    let (eigenvalues, eigenvectors) = linalg::sym_eigen(form);
    let radius = eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let threshold = relative * radius;
    let signature = Signature {
        positive: eigenvalues.iter().filter(|&&l| l > threshold).count(),
        negative: eigenvalues.iter().filter(|&&l| l < -threshold).count(),
        zero: eigenvalues.iter().filter(|&&l| l.abs() <= threshold).count(),
    };
    let n = eigenvalues.len();
    let definiteness = match signature {
        _ if n == 0 => Definiteness::Vacuous,
        Signature { zero, .. } if zero == n => Definiteness::Zero,
        Signature { positive, .. } if positive == n => Definiteness::PositiveDefinite,
        Signature { negative, .. } if negative == n => Definiteness::NegativeDefinite,
        Signature { negative: 0, .. } => Definiteness::PositiveSemidefinite,
        Signature { positive: 0, .. } => Definiteness::NegativeSemidefinite,
        _ => Definiteness::Indefinite,
    };
    FormClass { eigenvalues, eigenvectors, threshold, signature, definiteness }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceData {
    /// Columns span `ker dPhi(m)`, Euclidean-orthonormal.
    pub kernel: DMatrix<f64>,
    /// Columns span `T_m(G.m)`.
    pub group_tangent: DMatrix<f64>,
    /// Columns span `T_m(H.m)` for `H` the coadjoint isotropy of `mu`.
    pub isotropy_tangent: DMatrix<f64>,
    /// Q-orthonormal basis of `g_mu`.
    pub g_mu: Subspace,
    /// Columns span the slice.
    pub slice: DMatrix<f64>,
    /// `omega(s_i, s_j)`.
    pub omega: DMatrix<f64>,
    pub omega_det: f64,
    /// `rank dPhi(m)`.
    pub moment_rank: usize,
}

impl SliceData {
    pub fn dim(&self) -> usize {
        self.slice.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedHessian {
    pub full: DMatrix<f64>,
    /// `K^T H K`
    pub on_kernel: DMatrix<f64>,
    /// `S^T H S`
    pub on_slice: DMatrix<f64>,
    /// `|K^T H T_H|`
    pub descent_defect: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub slice: FormClass,
    pub kernel: FormClass,
    /// The kernel of the Hessian on `ker dPhi(m)` is exactly `T_m(H.m)`.
    pub kernel_match: bool,
    pub kernel_verdict: Verdict,
    /// `dPhi(m)` is surjective.
    pub regular_point: bool,
    pub invariance: InvarianceCheck,
    pub descent_defect: f64,
    pub notes: Vec<String>,
}

/// Orthonormal basis of `ker dPhi(m)`.
pub fn kernel_dphi(sys: &SystemDef, m: &DVector<f64>) -> DMatrix<f64> {
    linalg::null_space(&sys.moment_jacobian(m), sys.numerics().rank)
}

/// `(T_G, T_H)`: images of `g` and of `g_mu` under `xi -> xi_M(m)`.
pub fn tangent_spaces(sys: &SystemDef, m: &DVector<f64>, mu: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, Subspace) {
    let policy = sys.numerics().rank;
    let action = sys.infinitesimal_action(m);
    let g_mu = sys.algebra().coadjoint_isotropy(mu, policy);
    let t_g = linalg::column_space(&action, policy);
    let t_h = linalg::column_space(&(&action * g_mu.basis()), policy);
    (t_g, t_h, g_mu)
}

pub fn symplectic_slice(sys: &SystemDef, m: &DVector<f64>) -> Result<SliceData, SliceError> {
    let policy = sys.numerics().rank;
    let mu = sys.moment_map(m);
    let kernel = kernel_dphi(sys, m);
    let (group_tangent, isotropy_tangent, g_mu) = tangent_spaces(sys, m, &mu);
    let distance = linalg::max_distance_from_span(&isotropy_tangent, &kernel);
    if distance > CONTAINMENT_TOLERANCE {
        return Err(SliceError::NotContained { distance });
    }
    let slice = complement_in(&kernel, &isotropy_tangent, policy);
    if !slice.ncols().is_multiple_of(2) {
        return Err(SliceError::OddDimension(slice.ncols()));
    }
    let omega = slice.transpose() * symplectic_matrix(sys.space().dof()) * &slice;
    let omega_det = if omega.nrows() == 0 { 1.0 } else { omega.determinant() };
    if omega_det.abs() <= SLICE_NONDEGENERACY {
        return Err(SliceError::Degenerate { det: omega_det });
    }
    let moment_rank = linalg::rank(&sys.moment_jacobian(m), policy);
    Ok(SliceData { kernel, group_tangent, isotropy_tangent, g_mu, slice, omega, omega_det, moment_rank })
}

/// Euclidean complement of `span(sub)` inside `span(ambient)`; both
/// orthonormal.
fn complement_in(ambient: &DMatrix<f64>, sub: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    if sub.ncols() == 0 {
        return ambient.clone();
    }
    let coords = ambient.transpose() * sub;
    ambient * linalg::null_space(&coords.transpose(), policy)
}

pub fn restricted_hessian(
    sys: &SystemDef,
    m: &DVector<f64>,
    xi: &DVector<f64>,
    slice: &SliceData,
) -> Result<RestrictedHessian, SliceError> {
    let gradient_norm = sys.augmented_gradient(m, xi)?.norm();
    if gradient_norm > sys.numerics().residual_tolerance {
        return Err(SliceError::NotCritical { norm: gradient_norm });
    }
    let full = sys.augmented_hessian(m, xi)?;
    let on_kernel = slice.kernel.transpose() * &full * &slice.kernel;
    let on_slice = slice.slice.transpose() * &full * &slice.slice;
    let descent_defect = if slice.isotropy_tangent.ncols() == 0 || slice.kernel.ncols() == 0 {
        0.0
    } else {
        (slice.kernel.transpose() * &full * &slice.isotropy_tangent).norm()
    };
    let scale = full.norm().max(1.0);
    if descent_defect > DESCENT_TOLERANCE * scale {
        return Err(SliceError::NoDescent { defect: descent_defect });
    }
    Ok(RestrictedHessian { full, on_kernel, on_slice, descent_defect, gradient_norm })
}

fn slice_verdict(class: &FormClass) -> Verdict {
    match class.definiteness {
        d if d.is_definite() => Verdict::StableCertified,
        d if d.is_semidefinite() => Verdict::InconclusiveDegenerate,
        _ => Verdict::InconclusiveIndefinite,
    }
}

/// Verdict from the Hessian on `ker dPhi(m)`: certified when it is
/// semidefinite with kernel exactly `T_m(H.m)`.
fn kernel_verdict(class: &FormClass, kernel: &DMatrix<f64>, t_h: &DMatrix<f64>) -> (Verdict, bool) {
    let t_h_coords = kernel.transpose() * t_h;
    let null: Vec<usize> =
        (0..class.eigenvalues.len()).filter(|&i| class.eigenvalues[i].abs() <= class.threshold).collect();
    let null_basis = DMatrix::from_fn(class.eigenvectors.nrows(), null.len(), |r, c| class.eigenvectors[(r, null[c])]);
    let matches = null.len() == t_h.ncols()
        && linalg::max_distance_from_span(&t_h_coords, &null_basis) <= KERNEL_MATCH_TOLERANCE;
    // A zero form on a kernel that equals T_H is vacuously definite on the quotient.
    let verdict = match class.definiteness {
        Definiteness::Indefinite => Verdict::InconclusiveIndefinite,
        _ if matches => Verdict::StableCertified,
        _ => Verdict::InconclusiveDegenerate,
    };
    (verdict, matches)
}

pub fn stability_verdict(sys: &SystemDef, re: &RelEquilibrium) -> Result<StabilityReport, SliceError> {
    let slice = symplectic_slice(sys, &re.point)?;
    let invariance = sys.algebra().check_invariance(&slice.g_mu);
    if !invariance.passes() {
        let (basis, i, j) = invariance.worst.unwrap_or((0, 0, 0));
        return Err(SliceError::MetricNotInvariant { residual: invariance.residual, basis, i: i + 1, j: j + 1 });
    }
    let hess = restricted_hessian(sys, &re.point, &re.xi, &slice)?;
    let relative = sys.numerics().definiteness;
    let on_slice = classify(&hess.on_slice, relative);
    let on_kernel = classify(&hess.on_kernel, relative);
    let verdict = slice_verdict(&on_slice);
    let (kernel_verdict, kernel_match) = kernel_verdict(&on_kernel, &slice.kernel, &slice.isotropy_tangent);
    if verdict != kernel_verdict {
        return Err(SliceError::InternalConsistency { slice: verdict, kernel: kernel_verdict });
    }
    let regular_point = slice.moment_rank == sys.algebra().dim();
    let mut notes = Vec::new();
    if on_slice.definiteness == Definiteness::Vacuous {
        notes.push("slice is zero-dimensional; definiteness holds vacuously".to_string());
    }
    if on_slice.definiteness == Definiteness::NegativeDefinite {
        notes.push("slice Hessian is negative definite; certified via -h".to_string());
    }
    if regular_point && verdict == Verdict::StableCertified {
        notes.push("m is a regular point of the moment map; the regular-point case of the criterion applies".to_string());
    }
    if !re.xi_orthogonal_to_g_m {
        notes.push("velocity is not Q-orthogonal to the isotropy algebra of m".to_string());
    }
    if verdict == Verdict::InconclusiveDegenerate {
        notes.push("slice Hessian is semidefinite but singular; higher-order terms decide".to_string());
    }
    Ok(StabilityReport {
        verdict,
        slice: on_slice,
        kernel: on_kernel,
        kernel_match,
        kernel_verdict,
        regular_point,
        invariance,
        descent_defect: hess.descent_defect,
        notes,
    })
}
