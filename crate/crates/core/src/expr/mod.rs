//! Scalar expressions over phase-space coordinates.
//!
//! Hamiltonians and moment-map components are stored as [`Expr`] trees. The
//! grammar is deliberately small: numerals, coordinate names, `+ - * / ^`,
//! parentheses and the unary functions `sin`, `cos`, `exp`. Division is only
//! allowed by nonzero constants and exponents are non-negative integer
//! literals, so the derivative rules never leave the grammar.
//!
//! Derivatives are exact (symbolic). Evaluation goes through a compiled
//! postfix [`Tape`] because the integrator evaluates gradients and Hessians
//! hundreds of thousands of times per trajectory.

mod diff;
mod parse;
mod print;
mod tape;

pub use diff::Derivatives;
pub use parse::{parse, ParseError, ParseErrorKind, MAX_HEIGHT, MAX_NESTING};
pub use tape::Tape;

use thiserror::Error;

/// Function names that cannot be used as coordinate names.
pub const RESERVED_NAMES: [&str; 3] = ["sin", "cos", "exp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation produced a non-finite value (overflow)")]
    NonFinite,
    #[error("point has {got} coordinates, expression needs at least {need}")]
    Dimension { need: usize, got: usize },
}

/// Unary elementary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }
}

/// Expression tree. Build through the smart constructors ([`Expr::add`],
/// [`Expr::mul`], ...) which fold constants and drop zero terms.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

fn finite_or(v: f64, fallback: impl FnOnce() -> Expr) -> Expr {
    if v.is_finite() {
        Expr::Const(v)
    } else {
        fallback()
    }
}

// Smart constructors take operands by value and fold constants; they are not
// the operator traits.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => {
                let (x, y) = (*x, *y);
                finite_or(x + y, || Expr::Add(Box::new(a), Box::new(b)))
            }
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => {
                let (x, y) = (*x, *y);
                finite_or(x * y, || Expr::Mul(Box::new(a), Box::new(b)))
            }
            _ if a.is_zero() || b.is_zero() => Expr::zero(),
            (Expr::Const(x), _) if *x == 1.0 => b,
            (_, Expr::Const(y)) if *y == 1.0 => a,
            (Expr::Const(x), _) if *x == -1.0 => Expr::neg(b),
            (_, Expr::Const(y)) if *y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(base: Expr, k: u32) -> Expr {
        match (&base, k) {
            (_, 0) => Expr::Const(1.0),
            (_, 1) => base,
            (Expr::Const(c), _) => {
                let c = *c;
                finite_or(powi(c, k), || Expr::Pow(Box::new(base), k))
            }
            _ => Expr::Pow(Box::new(base), k),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        match a {
            Expr::Const(c) => finite_or(f.apply(c), || Expr::Call(f, Box::new(Expr::Const(c)))),
            other => Expr::Call(f, Box::new(other)),
        }
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Mul(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
        }
    }

    pub fn depends_on(&self, i: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(j) => *j == i,
            Expr::Add(a, b) | Expr::Mul(a, b) => a.depends_on(i) || b.depends_on(i),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(i),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Mul(a, b) => 1 + a.size() + b.size(),
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
        }
    }

    /// Replaces every coordinate reference `Var(i)` by `subs[i]`.
    ///
    /// Panics if the expression references an index outside `subs`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => subs[*i].clone(),
            Expr::Add(a, b) => Expr::add(a.substitute(subs), b.substitute(subs)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(subs), b.substitute(subs)),
            Expr::Pow(a, k) => Expr::pow(a.substitute(subs), *k),
            Expr::Neg(a) => Expr::neg(a.substitute(subs)),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(subs)),
        }
    }

    /// Recursive tree-walking evaluation. Prefer [`Tape`] in hot loops.
    pub fn eval(&self, z: &[f64]) -> Result<f64, EvalError> {
        if let Some(need) = self.max_var() {
            if need >= z.len() {
                return Err(EvalError::Dimension { need: need + 1, got: z.len() });
            }
        }
        let v = self.eval_unchecked(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_unchecked(&self, z: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => z[*i],
            Expr::Add(a, b) => a.eval_unchecked(z) + b.eval_unchecked(z),
            Expr::Mul(a, b) => a.eval_unchecked(z) * b.eval_unchecked(z),
            Expr::Pow(a, k) => powi(a.eval_unchecked(z), *k),
            Expr::Neg(a) => -a.eval_unchecked(z),
            Expr::Call(f, a) => f.apply(a.eval_unchecked(z)),
        }
    }

    /// Exact partial derivative with respect to coordinate `i`.
    pub fn differentiate(&self, i: usize) -> Expr {
        diff::differentiate(self, i)
    }

    pub fn compile(&self) -> Tape {
        Tape::compile(self)
    }

    /// Renders with explicit `*` and parentheses; the output reparses to an
    /// equivalent expression.
    pub fn to_text(&self, names: &[String]) -> String {
        print::render(self, names)
    }
}

/// Integer power by repeated squaring; exponents beyond `i32` are allowed.
pub(crate) fn powi(x: f64, k: u32) -> f64 {
    match i32::try_from(k) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(k as f64),
    }
}

/// Gradient of `e` at `z`, differentiating symbolically on every call.
pub fn gradient(e: &Expr, z: &[f64]) -> Result<Vec<f64>, EvalError> {
    (0..z.len()).map(|i| e.differentiate(i).eval(z)).collect()
}

/// Hessian of `e` at `z` as a row-major `n x n` matrix; each unordered pair
/// is computed once so the result is exactly symmetric.
pub fn hessian(e: &Expr, z: &[f64]) -> Result<Vec<f64>, EvalError> {
    let n = z.len();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        let di = e.differentiate(i);
        for j in i..n {
            let v = di.differentiate(j).eval(z)?;
            h[i * n + j] = v;
            h[j * n + i] = v;
        }
    }
    Ok(h)
}
