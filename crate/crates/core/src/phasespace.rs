//! Flat phase spaces, affine symplectic actions and their moment maps.
//!
//! Coordinates are ordered `z = (q_1..q_n, p_1..p_n)`, the symplectic form is
//! `sum dq_i ^ dp_i` with matrix `Omega = [[0, I], [-I, 0]]`, and Hamiltonian
//! vector fields are `X_f = Omega grad f`, so `dq/dt = df/dp`, `dp/dt = -df/dq`.
//! The moment component of a generator `z -> A z + b` generates that field
//! exactly (not its negative).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Derivatives, EvalError, Expr};
use crate::liealg::LieAlgebra;
use crate::linalg::{self, RankPolicy};

pub const SP_TOLERANCE: f64 = 1e-10;
pub const EQUIVARIANCE_TOLERANCE: f64 = 1e-8;
pub const INVARIANCE_TOLERANCE: f64 = 1e-8;
const EQUIVARIANCE_POINTS: usize = 200;
const INVARIANCE_POINTS: usize = 100;
const VALIDATION_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("phase space needs an even number of coordinates, got {0}")]
    OddDimension(usize),
    #[error("coordinate name `{0}` is declared twice")]
    DuplicateCoordinate(String),
    #[error("coordinate name `{0}` is reserved")]
    ReservedCoordinate(String),
    #[error("periodic coordinate `{0}` is not declared")]
    UnknownPeriodic(String),
    #[error("expected {expected} generators (one per basis element), got {got}")]
    GeneratorCount { expected: usize, got: usize },
    #[error("generator {index} has shape {rows}x{cols} for A and length {len} for b; expected {dim}")]
    GeneratorShape { index: usize, rows: usize, cols: usize, len: usize, dim: usize },
    #[error("generator {index} has a non-finite entry")]
    GeneratorNonFinite { index: usize },
    #[error("generator {index} is not infinitesimally symplectic: |Omega A + A^T Omega| = {residual:e}")]
    NotSymplectic { index: usize, residual: f64 },
    #[error("generator {index} depends linearly on periodic coordinate `{coordinate}`")]
    PeriodicMixing { index: usize, coordinate: String },
    #[error("moment of generator {index} is not periodic in `{coordinate}`")]
    PeriodicMoment { index: usize, coordinate: String },
    #[error("hamiltonian is not 2pi-periodic in `{coordinate}` (defect {defect:e})")]
    PeriodicHamiltonian { coordinate: String, defect: f64 },
    #[error("hamiltonian references coordinate {index} but the phase space has dimension {dim}")]
    HamiltonianArity { index: usize, dim: usize },
    #[error("moment map is not equivariant for pair ({i}, {j}): defect varies by {spread:e} over phase space")]
    NotEquivariant { i: usize, j: usize, spread: f64 },
    #[error("no choice of moment constants makes the map equivariant (residual {residual:e})")]
    InconsistentConstants { residual: f64 },
    #[error("hamiltonian is not invariant under generator {index}: |dh(xi_M)| = {residual:e}")]
    NotInvariant { index: usize, residual: f64 },
    #[error("evaluation failed during validation: {0}")]
    Eval(#[from] EvalError),
}

/// Thresholds in effect for one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub rank: RankPolicy,
    /// A symmetric form is definite when `min |lambda| > definiteness * max |lambda|`.
    pub definiteness: f64,
    /// Largest `|xi_M(m) - X_h(m)|` accepted as a relative equilibrium.
    pub residual_tolerance: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { rank: RankPolicy::default(), definiteness: 1e-8, residual_tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpace {
    n: usize,
    names: Vec<String>,
    periodic: Vec<bool>,
}

impl PhaseSpace {
    pub fn new(names: Vec<String>, periodic_names: &[String]) -> Result<PhaseSpace, SystemError> {
        if !names.len().is_multiple_of(2) {
            return Err(SystemError::OddDimension(names.len()));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(SystemError::DuplicateCoordinate(name.clone()));
            }
            if crate::expr::RESERVED_NAMES.contains(&name.as_str()) {
                return Err(SystemError::ReservedCoordinate(name.clone()));
            }
        }
        let mut periodic = vec![false; names.len()];
        for p in periodic_names {
            let i = names.iter().position(|n| n == p).ok_or_else(|| SystemError::UnknownPeriodic(p.clone()))?;
            periodic[i] = true;
        }
        Ok(PhaseSpace { n: names.len() / 2, names, periodic })
    }

    /// Canonical `q1..qn, p1..pn` names with no periodic coordinates.
    pub fn canonical(n: usize) -> PhaseSpace {
        let names = (1..=n).map(|i| format!("q{i}")).chain((1..=n).map(|i| format!("p{i}"))).collect();
        PhaseSpace { n, names, periodic: vec![false; 2 * n] }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.periodic[i]
    }

    pub fn periodic_names(&self) -> Vec<String> {
        self.names.iter().zip(&self.periodic).filter(|(_, &p)| p).map(|(n, _)| n.clone()).collect()
    }

    /// `z - m` with periodic components wrapped into `[-pi, pi]`.
    pub fn displacement(&self, z: &DVector<f64>, m: &DVector<f64>) -> DVector<f64> {
        let mut d = z - m;
        for i in 0..self.dim() {
            if self.periodic[i] {
                d[i] = wrap_angle(d[i]);
            }
        }
        d
    }

    /// Euclidean distance with wrapped periodic differences.
    pub fn distance(&self, z: &DVector<f64>, m: &DVector<f64>) -> f64 {
        self.displacement(z, m).norm()
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            if self.periodic[i] {
                rng.random_range(0.0..2.0 * PI)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
    }
}

/// Representative of `x` modulo `2 pi` in `[-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// `Omega = [[0, I], [-I, 0]]` for `n` degrees of freedom.
pub fn symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = 1.0;
        o[(n + i, i)] = -1.0;
    }
    o
}

/// Affine vector field `z -> A z + b` realizing one basis element of g.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGenerator {
    pub label: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Additive moment constant.
    pub c: f64,
}

impl ActionGenerator {
    pub fn new(label: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>, c: f64) -> ActionGenerator {
        ActionGenerator { label: label.into(), a, b, c }
    }

    pub fn zero(dim: usize) -> ActionGenerator {
        ActionGenerator::new("0", DMatrix::zeros(dim, dim), DVector::zeros(dim), 0.0)
    }

    pub fn field(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z + &self.b
    }

    /// `max |Omega A + A^T Omega|`
    pub fn sp_residual(&self) -> f64 {
        let o = symplectic_matrix(self.a.nrows() / 2);
        (&o * &self.a + self.a.transpose() * &o).amax()
    }

    /// Symmetric part of `Omega A`; `-S` is the Hessian of the moment component.
    pub fn moment_quadratic(&self) -> DMatrix<f64> {
        let oa = symplectic_matrix(self.a.nrows() / 2) * &self.a;
        (&oa + oa.transpose()) * 0.5
    }

    /// `Omega b`; the moment component's linear part is `-(Omega b) . z`.
    pub fn moment_linear(&self) -> DVector<f64> {
        symplectic_matrix(self.b.len() / 2) * &self.b
    }

    /// `phi(z) = -1/2 z^T (Omega A) z - (Omega b) . z + c`.
    pub fn moment_component(&self) -> Expr {
        let s = self.moment_quadratic();
        let l = self.moment_linear();
        let dim = self.b.len();
        let mut terms = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let coeff = if i == j { -0.5 * s[(i, i)] } else { -s[(i, j)] };
                if coeff != 0.0 {
                    terms.push(Expr::mul(Expr::constant(coeff), Expr::mul(Expr::var(i), Expr::var(j))));
                }
            }
        }
        for i in 0..dim {
            if l[i] != 0.0 {
                terms.push(Expr::mul(Expr::constant(-l[i]), Expr::var(i)));
            }
        }
        if self.c != 0.0 {
            terms.push(Expr::constant(self.c));
        }
        Expr::sum(terms)
    }
}

/// `X_f(z) = Omega grad f(z)` from a gradient.
pub fn symplectic_gradient(grad: &[f64]) -> DVector<f64> {
    let n = grad.len() / 2;
    DVector::from_fn(2 * n, |i, _| if i < n { grad[n + i] } else { -grad[i - n] })
}

pub fn hamiltonian_vector_field(f: &Expr, z: &[f64]) -> Result<DVector<f64>, EvalError> {
    Ok(symplectic_gradient(&crate::expr::gradient(f, z)?))
}

/// `{f, g} = sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i`.
pub fn poisson_bracket(f: &Expr, g: &Expr, n: usize) -> Expr {
    Expr::sum((0..n).map(|i| {
        Expr::sub(
            Expr::mul(f.differentiate(i), g.differentiate(n + i)),
            Expr::mul(f.differentiate(n + i), g.differentiate(i)),
        )
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceReport {
    /// Largest `|{Phi_i, Phi_j} - sum_k c_ij^k Phi_k|` over sample points and pairs.
    pub residual: f64,
    pub worst_pair: Option<(usize, usize)>,
    /// Constants after solving.
    pub constants: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// Largest `|dh(xi_M)|` over sample points and generators.
    pub residual: f64,
    pub worst_generator: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SystemDef {
    name: String,
    space: PhaseSpace,
    algebra: LieAlgebra,
    generators: Vec<ActionGenerator>,
    hamiltonian: Expr,
    h: Derivatives,
    moments: Vec<Expr>,
    numerics: Numerics,
    proper_action: bool,
    equivariance: EquivarianceReport,
    invariance: InvarianceReport,
}

impl SystemDef {
    /// Assembles and validates a system. Moment constants are re-solved so
    /// the map is equivariant, staying as close as possible to the given ones.
    pub fn new(
        name: impl Into<String>,
        space: PhaseSpace,
        algebra: LieAlgebra,
        mut generators: Vec<ActionGenerator>,
        hamiltonian: Expr,
        numerics: Numerics,
    ) -> Result<SystemDef, SystemError> {
        let dim = space.dim();
        if generators.len() != algebra.dim() {
            return Err(SystemError::GeneratorCount { expected: algebra.dim(), got: generators.len() });
        }
        if let Some(index) = hamiltonian.max_var().filter(|&v| v >= dim) {
            return Err(SystemError::HamiltonianArity { index, dim });
        }
        for (index, g) in generators.iter().enumerate() {
            if g.a.shape() != (dim, dim) || g.b.len() != dim {
                return Err(SystemError::GeneratorShape {
                    index,
                    rows: g.a.nrows(),
                    cols: g.a.ncols(),
                    len: g.b.len(),
                    dim,
                });
            }
            if g.a.iter().chain(g.b.iter()).any(|x| !x.is_finite()) || !g.c.is_finite() {
                return Err(SystemError::GeneratorNonFinite { index });
            }
            let residual = g.sp_residual();
            if residual >= SP_TOLERANCE {
                return Err(SystemError::NotSymplectic { index, residual });
            }
            let lin = g.moment_linear();
            for j in (0..dim).filter(|&j| space.is_periodic(j)) {
                let coordinate = space.names()[j].clone();
                if g.a.column(j).amax() != 0.0 {
                    return Err(SystemError::PeriodicMixing { index, coordinate });
                }
                if lin[j] != 0.0 {
                    return Err(SystemError::PeriodicMoment { index, coordinate });
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        check_periodic_hamiltonian(&space, &hamiltonian, &mut rng)?;

        let constants = solve_moment_constants(&space, &algebra, &generators, &mut rng)?;
        for (g, c) in generators.iter_mut().zip(&constants) {
            g.c = *c;
        }
        let moments: Vec<Expr> = generators.iter().map(|g| g.moment_component()).collect();
        let equivariance = equivariance_residual(&space, &algebra, &moments, &mut rng)?;
        let equivariance = EquivarianceReport { constants, ..equivariance };
        if equivariance.residual >= EQUIVARIANCE_TOLERANCE {
            return Err(SystemError::InconsistentConstants { residual: equivariance.residual });
        }

        let invariance = invariance_residual(&space, &hamiltonian, &generators, &mut rng)?;
        if invariance.residual >= INVARIANCE_TOLERANCE {
            return Err(SystemError::NotInvariant {
                index: invariance.worst_generator.unwrap_or(0),
                residual: invariance.residual,
            });
        }

        let h = Derivatives::new(&hamiltonian, dim);
        Ok(SystemDef {
            name: name.into(),
            space,
            algebra,
            generators,
            hamiltonian,
            h,
            moments,
            numerics,
            proper_action: false,
            equivariance,
            invariance,
        })
    }

    pub fn with_proper_action(mut self, asserted: bool) -> SystemDef {
        self.proper_action = asserted;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn generators(&self) -> &[ActionGenerator] {
        &self.generators
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    pub fn moment_components(&self) -> &[Expr] {
        &self.moments
    }

    pub fn numerics(&self) -> &Numerics {
        &self.numerics
    }

    /// The user's assertion that the action is proper; never verified.
    pub fn proper_action(&self) -> bool {
        self.proper_action
    }

    pub fn equivariance(&self) -> &EquivarianceReport {
        &self.equivariance
    }

    pub fn invariance(&self) -> &InvarianceReport {
        &self.invariance
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn energy(&self, z: &[f64]) -> Result<f64, EvalError> {
        self.h.value(z)
    }

    pub fn energy_gradient(&self, z: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.h.gradient(z)
    }

    pub fn energy_hessian(&self, z: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.dim();
        Ok(DMatrix::from_row_slice(n, n, &self.h.hessian(z)?))
    }

    pub fn energy_hessian_into(&self, z: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        self.h.hessian_into(z, out)
    }

    pub fn vector_field(&self, z: &[f64]) -> Result<DVector<f64>, EvalError> {
        Ok(symplectic_gradient(&self.h.gradient(z)?))
    }

    /// `Phi(z)`, evaluated from the closed quadratic form.
    pub fn moment_map(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.generators.len(), |i, _| {
            let g = &self.generators[i];
            -0.5 * (z.transpose() * g.moment_quadratic() * z)[(0, 0)] - g.moment_linear().dot(z) + g.c
        })
    }

    /// `|Phi(z)|^2` in the dual metric `Q^{-1}`.
    pub fn moment_norm_sq(&self, z: &DVector<f64>) -> f64 {
        self.algebra.dual_norm_sq(&self.moment_map(z))
    }

    /// `d x 2n` Jacobian of `Phi`, row `i` being `-S_i z - Omega b_i`.
    pub fn moment_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let d = self.generators.len();
        let mut j = DMatrix::zeros(d, self.dim());
        for (i, g) in self.generators.iter().enumerate() {
            let row = -(g.moment_quadratic() * z) - g.moment_linear();
            j.set_row(i, &row.transpose());
        }
        j
    }

    /// `2n x d` matrix whose column `i` is `xi_M(z)` for `xi = e_i`.
    pub fn infinitesimal_action(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.generators.len());
        for (i, g) in self.generators.iter().enumerate() {
            m.set_column(i, &g.field(z));
        }
        m
    }

    /// Linear part `A_xi = sum xi_i A_i` and translation `b_xi`.
    pub fn generator_of(&self, xi: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        let mut b = DVector::zeros(self.dim());
        for (g, &x) in self.generators.iter().zip(xi.iter()) {
            a += &g.a * x;
            b += &g.b * x;
        }
        (a, b)
    }

    /// Gradient of the augmented Hamiltonian `h - <Phi, xi>`.
    pub fn augmented_gradient(&self, z: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
        let g = DVector::from_vec(self.h.gradient(z.as_slice())?);
        Ok(g - self.moment_jacobian(z).transpose() * xi)
    }

    /// Hessian of `h - <Phi, xi>`.
    pub fn augmented_hessian(&self, z: &DVector<f64>, xi: &DVector<f64>) -> Result<DMatrix<f64>, EvalError> {
        let mut h = self.energy_hessian(z.as_slice())?;
        for (g, &x) in self.generators.iter().zip(xi.iter()) {
            if x != 0.0 {
                h += g.moment_quadratic() * x;
            }
        }
        Ok(h)
    }

    /// Largest `|{h, Phi_i}|` over random points.
    pub fn noether_residual(&self, points: usize, seed: u64) -> Result<f64, EvalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let brackets: Vec<Expr> =
            self.moments.iter().map(|phi| poisson_bracket(&self.hamiltonian, phi, self.space.dof())).collect();
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let z = self.space.random_point(&mut rng);
            for b in &brackets {
                worst = worst.max(b.eval(z.as_slice())?.abs());
            }
        }
        Ok(worst)
    }

    /// Largest `|X_{Phi_i}(z) - (A_i z + b_i)|` over random points.
    pub fn generation_residual(&self, points: usize, seed: u64) -> Result<f64, EvalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let z = self.space.random_point(&mut rng);
            for (g, phi) in self.generators.iter().zip(&self.moments) {
                let x = hamiltonian_vector_field(phi, z.as_slice())?;
                worst = worst.max((x - g.field(&z)).amax());
            }
        }
        Ok(worst)
    }

    /// Re-runs the equivariance test with a fresh sample.
    pub fn equivariance_residual(&self, seed: u64) -> Result<EquivarianceReport, EvalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = equivariance_residual(&self.space, &self.algebra, &self.moments, &mut rng)?;
        r.constants = self.generators.iter().map(|g| g.c).collect();
        Ok(r)
    }
}

fn check_periodic_hamiltonian(space: &PhaseSpace, h: &Expr, rng: &mut ChaCha8Rng) -> Result<(), SystemError> {
    for j in (0..space.dim()).filter(|&j| space.is_periodic(j)) {
        let mut worst: f64 = 0.0;
        for _ in 0..INVARIANCE_POINTS {
            let z = space.random_point(rng);
            let mut shifted = z.clone();
            shifted[j] += 2.0 * PI;
            let (a, b) = (h.eval(z.as_slice())?, h.eval(shifted.as_slice())?);
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        if worst >= INVARIANCE_TOLERANCE {
            return Err(SystemError::PeriodicHamiltonian { coordinate: space.names()[j].clone(), defect: worst });
        }
    }
    Ok(())
}

/// Solves `sum_k c_ij^k c_k = {phi_i, phi_j} - sum_k c_ij^k phi_k` (which must
/// be constant) for the constants, minimizing the change from the given ones.
fn solve_moment_constants(
    space: &PhaseSpace,
    algebra: &LieAlgebra,
    generators: &[ActionGenerator],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SystemError> {
    let d = algebra.dim();
    let given: Vec<f64> = generators.iter().map(|g| g.c).collect();
    if d < 2 {
        return Ok(given);
    }
    let bare: Vec<Expr> = generators
        .iter()
        .map(|g| ActionGenerator { c: 0.0, ..g.clone() }.moment_component())
        .collect();
    let origin = vec![0.0; space.dim()];
    let points: Vec<DVector<f64>> = (0..EQUIVARIANCE_POINTS).map(|_| space.random_point(rng)).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let defect = Expr::sub(
                poisson_bracket(&bare[i], &bare[j], space.dof()),
                Expr::sum((0..d).filter(|&k| algebra.c(i, j, k) != 0.0).map(|k| {
                    Expr::mul(Expr::constant(algebra.c(i, j, k)), bare[k].clone())
                })),
            );
            let at_origin = defect.eval(&origin)?;
            let mut spread: f64 = 0.0;
            for z in &points {
                spread = spread.max((defect.eval(z.as_slice())? - at_origin).abs());
            }
            if spread >= EQUIVARIANCE_TOLERANCE {
                return Err(SystemError::NotEquivariant { i, j, spread });
            }
            rows.push((0..d).map(|k| algebra.c(i, j, k)).collect::<Vec<_>>());
            rhs.push(at_origin);
        }
    }
    let m = DMatrix::from_fn(rows.len(), d, |r, k| rows[r][k]);
    let rhs = DVector::from_vec(rhs);
    let c0 = DVector::from_vec(given);
    let c = &c0 + linalg::min_norm_solve(&m, &(&rhs - &m * &c0), RankPolicy::default());
    let residual = (&m * &c - &rhs).amax();
    if residual >= EQUIVARIANCE_TOLERANCE {
        return Err(SystemError::InconsistentConstants { residual });
    }
    Ok(c.iter().copied().collect())
}

fn equivariance_residual(
    space: &PhaseSpace,
    algebra: &LieAlgebra,
    moments: &[Expr],
    rng: &mut ChaCha8Rng,
) -> Result<EquivarianceReport, EvalError> {
    let d = algebra.dim();
    let mut report = EquivarianceReport { residual: 0.0, worst_pair: None, constants: Vec::new() };
    let mut defects = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let defect = Expr::sub(
                poisson_bracket(&moments[i], &moments[j], space.dof()),
                Expr::sum((0..d).filter(|&k| algebra.c(i, j, k) != 0.0).map(|k| {
                    Expr::mul(Expr::constant(algebra.c(i, j, k)), moments[k].clone())
                })),
            );
            defects.push(((i, j), defect));
        }
    }
    for _ in 0..EQUIVARIANCE_POINTS {
        let z = space.random_point(rng);
        for (pair, e) in &defects {
            let v = e.eval(z.as_slice())?.abs();
            if v > report.residual {
                report.residual = v;
                report.worst_pair = Some(*pair);
            }
        }
    }
    Ok(report)
}

/// `dh(xi_M)` for each generator, checked at random points with a scale
/// relative to the size of the individual terms.
fn invariance_residual(
    space: &PhaseSpace,
    h: &Expr,
    generators: &[ActionGenerator],
    rng: &mut ChaCha8Rng,
) -> Result<InvarianceReport, EvalError> {
    let dim = space.dim();
    let partials: Vec<Expr> = (0..dim).map(|i| h.differentiate(i)).collect();
    let mut report = InvarianceReport { residual: 0.0, worst_generator: None };
    for _ in 0..INVARIANCE_POINTS {
        let z = space.random_point(rng);
        let grad: Vec<f64> = partials.iter().map(|p| p.eval(z.as_slice())).collect::<Result<_, _>>()?;
        for (index, g) in generators.iter().enumerate() {
            let f = g.field(&z);
            let (mut sum, mut scale) = (0.0, 1.0f64);
            for k in 0..dim {
                sum += grad[k] * f[k];
                scale = scale.max((grad[k] * f[k]).abs());
            }
            let r = sum.abs() / scale;
            if r > report.residual {
                report.residual = r;
                report.worst_generator = Some(index);
            }
        }
    }
    Ok(report)
}
