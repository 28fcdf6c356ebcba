//! Shared oracles and generators for the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use relstab::expr::Expr;
use relstab::liealg;
use relstab::phasespace::{symplectic_matrix, ActionGenerator, Numerics, PhaseSpace};
use relstab::SystemDef;

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Random expression text over `x0..x{n-1}` using every grammar production.
pub fn random_expr_text<R: Rng>(rng: &mut R, n: usize, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            format!("x{}", rng.random_range(0..n))
        } else {
            format!("{:.3}", rng.random_range(-2.0..2.0))
        };
    }
    let a = random_expr_text(rng, n, depth - 1);
    match rng.random_range(0..10) {
        0 | 1 => format!("({a} + {})", random_expr_text(rng, n, depth - 1)),
        2 => format!("({a} - {})", random_expr_text(rng, n, depth - 1)),
        3 | 4 => format!("({a})*({})", random_expr_text(rng, n, depth - 1)),
        5 => format!("({a})^{}", rng.random_range(0..4)),
        6 => format!("sin({a})"),
        7 => format!("cos({a})"),
        8 => format!("exp(({a})/4)"),
        _ => format!("-({a})/{:.2}", rng.random_range(0.5..3.0)),
    }
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Central difference with one Richardson step: `(4 D(h/2) - D(h)) / 3`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let d = |h: f64| (f(&shifted(x, &[(i, h)])) - f(&shifted(x, &[(i, -h)]))) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Second partial from function values only, Richardson-extrapolated.
pub fn fd_second(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let d = |h: f64| {
        let pp = f(&shifted(x, &[(i, h), (j, h)]));
        let pm = f(&shifted(x, &[(i, h), (j, -h)]));
        let mp = f(&shifted(x, &[(i, -h), (j, h)]));
        let mm = f(&shifted(x, &[(i, -h), (j, -h)]));
        (pp - pm - mp + mm) / (4.0 * h * h)
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// `1/2 z^T P z` as an expression.
pub fn quadratic_form(p: &DMatrix<f64>) -> Expr {
    let n = p.nrows();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i..n {
            let coef = if i == j { 0.5 * p[(i, i)] } else { p[(i, j)] };
            if coef != 0.0 {
                terms.push(Expr::mul(Expr::constant(coef), Expr::mul(Expr::var(i), Expr::var(j))));
            }
        }
    }
    Expr::sum(terms)
}

/// Substitution `z_i -> sum_j m_ij z_j + shift_i`.
pub fn affine_substitution(m: &DMatrix<f64>, shift: &DVector<f64>) -> Vec<Expr> {
    (0..m.nrows())
        .map(|i| {
            let linear = (0..m.ncols())
                .filter(|&j| m[(i, j)] != 0.0)
                .map(|j| Expr::mul(Expr::constant(m[(i, j)]), Expr::var(j)));
            Expr::sum(linear.chain(std::iter::once(Expr::constant(shift[i]))))
        })
        .collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    (&a + a.transpose()) * 0.5
}

pub fn random_orthonormal<R: Rng>(rng: &mut R, n: usize, k: usize) -> DMatrix<f64> {
    let q = random_matrix(rng, n, k).qr().q();
    q.columns(0, k).into_owned()
}

/// `exp(Omega R)` with `R` symmetric lies in `Sp(2n)`.
pub fn random_symplectic<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let r = random_symmetric(rng, 2 * n) * scale;
    (symplectic_matrix(n) * r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Definite,
    Degenerate,
    Indefinite,
}

/// Classification of a symmetric matrix with a wide gap, used as the oracle.
pub fn expected_class(m: &DMatrix<f64>) -> Expected {
    if m.nrows() == 0 {
        return Expected::Definite;
    }
    let ev = m.clone().symmetric_eigen().eigenvalues;
    let scale = ev.amax();
    let tiny = 1e-6 * scale;
    let pos = ev.iter().filter(|&&l| l > tiny).count();
    let neg = ev.iter().filter(|&&l| l < -tiny).count();
    if pos > 0 && neg > 0 {
        Expected::Indefinite
    } else if pos + neg == ev.len() {
        Expected::Definite
    } else {
        Expected::Degenerate
    }
}

pub struct RandomCase {
    pub system: SystemDef,
    pub point: DVector<f64>,
    pub expected: Expected,
}

/// Symmetric form of the requested class in dimension `n`; eigenvalues kept
/// away from zero unless the class asks for an exact kernel.
fn form_of_class<R: Rng>(rng: &mut R, n: usize, class: Expected) -> DMatrix<f64> {
    let q = random_orthonormal(rng, n, n);
    let mut ev: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    match class {
        Expected::Definite => {
            if rng.random_bool(0.3) {
                ev.iter_mut().for_each(|l| *l = -*l);
            }
        }
        Expected::Indefinite => ev[0] = -ev[0],
        Expected::Degenerate => ev[0] = 0.0,
    }
    &q * DMatrix::from_diagonal(&DVector::from_vec(ev)) * q.transpose()
}

fn pick_class<R: Rng>(rng: &mut R) -> Expected {
    [Expected::Definite, Expected::Indefinite, Expected::Degenerate][rng.random_range(0..3)]
}

/// Family (a): a cyclic angle coupled to `k` oscillator pairs,
/// `h = 1/2 x^T P x + p_th/2 x^T P' x + c/2 p_th^2`, pushed through a random
/// linear symplectic change of variables. The relative equilibrium sits at
/// `x = 0, p_th = s` with velocity `c s`, and its slice Hessian is congruent
/// to `P + s P'`.
pub fn family_a<R: Rng>(rng: &mut R) -> RandomCase {
    let k = rng.random_range(1..=2);
    let n = k + 1;
    let theta = k;
    let p_theta = n + k;
    let x_idx: Vec<usize> = (0..2 * n).filter(|&i| i != theta && i != p_theta).collect();
    let s = rng.random_range(0.3..1.5);
    let class = pick_class(rng);
    let target = form_of_class(rng, 2 * k, class);
    let coupling = if class == Expected::Degenerate { DMatrix::zeros(2 * k, 2 * k) } else { random_symmetric(rng, 2 * k) * 0.3 };
    let p = &target - &coupling * s;

    let embed = |m: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for (a, &i) in x_idx.iter().enumerate() {
            for (b, &j) in x_idx.iter().enumerate() {
                out[(i, j)] = m[(a, b)];
            }
        }
        out
    };
    let c = rng.random_range(0.5..2.0);
    let mut h = Expr::add(
        quadratic_form(&embed(&p)),
        Expr::mul(Expr::var(p_theta), quadratic_form(&embed(&coupling))),
    );
    h = Expr::add(h, Expr::mul(Expr::constant(0.5 * c), Expr::pow(Expr::var(p_theta), 2)));

    let t = random_symplectic(rng, n, 0.3);
    let t_inv = t.clone().try_inverse().expect("symplectic matrices are invertible");
    let h = h.substitute(&affine_substitution(&t_inv, &DVector::zeros(2 * n)));
    let mut b = DVector::zeros(2 * n);
    b[theta] = 1.0;
    let generator = ActionGenerator::new("theta", DMatrix::zeros(2 * n, 2 * n), &t * b, 0.0);
    let system = SystemDef::new(
        "family-a",
        PhaseSpace::canonical(n),
        liealg::abelian(1),
        vec![generator],
        h,
        Numerics::default(),
    )
    .expect("family (a) systems are valid");
    let mut m = DVector::zeros(2 * n);
    m[p_theta] = s;
    RandomCase { system, point: &t * m, expected: expected_class(&target) }
}

/// Family (b): linear flows commuting with `A = Omega S` and `A^3`, analyzed
/// at the origin where the slice is the whole space and the verdict is the
/// definiteness of `P = a S - b S Omega S Omega S`.
pub fn family_b<R: Rng>(rng: &mut R) -> RandomCase {
    let n = rng.random_range(1..=3);
    let omega = symplectic_matrix(n);
    let s = form_of_class(rng, 2 * n, Expected::Definite);
    let s = if s[(0, 0)] < 0.0 { -s } else { s };
    let a1 = &omega * &s;
    let a2 = &a1 * &a1 * &a1;
    let coef_a = rng.random_range(-1.0..1.0);
    let coef_b = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-0.5..0.5) };
    let p = &s * coef_a - &s * &omega * &s * &omega * &s * coef_b;
    let d = rng.random_range(1..=2);
    let mut generators = vec![ActionGenerator::new("a1", a1, DVector::zeros(2 * n), 0.0)];
    if d == 2 {
        generators.push(ActionGenerator::new("a2", a2, DVector::zeros(2 * n), 0.0));
    }
    let system = SystemDef::new(
        "family-b",
        PhaseSpace::canonical(n),
        liealg::abelian(d),
        generators,
        quadratic_form(&p),
        Numerics::default(),
    )
    .expect("family (b) systems are valid");
    RandomCase { system, point: DVector::zeros(2 * n), expected: expected_class(&p) }
}
