use super::{EvalError, Expr, Func, Tape};

pub(super) fn differentiate(e: &Expr, i: usize) -> Expr {
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
        Expr::Add(a, b) => Expr::add(differentiate(a, i), differentiate(b, i)),
        Expr::Mul(a, b) => Expr::add(
            Expr::mul(differentiate(a, i), (**b).clone()),
            Expr::mul((**a).clone(), differentiate(b, i)),
        ),
        Expr::Pow(a, k) => {
            let da = differentiate(a, i);
            if da.is_zero() {
                return Expr::zero();
            }
            Expr::mul(
                Expr::mul(Expr::Const(*k as f64), Expr::pow((**a).clone(), k - 1)),
                da,
            )
        }
        Expr::Neg(a) => Expr::neg(differentiate(a, i)),
        Expr::Call(f, a) => {
            let da = differentiate(a, i);
            if da.is_zero() {
                return Expr::zero();
            }
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, (**a).clone()),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, (**a).clone())),
                Func::Exp => e.clone(),
            };
            Expr::mul(outer, da)
        }
    }
}

/// An expression together with its compiled first and second partials.
///
/// The Hessian stores only the upper triangle (one tape per unordered pair),
/// so assembled Hessians are exactly symmetric.
#[derive(Debug, Clone)]
pub struct Derivatives {
    dim: usize,
    value: Tape,
    grad: Vec<Tape>,
    hess: Vec<Tape>,
    grad_exprs: Vec<Expr>,
}

impl Derivatives {
    pub fn new(e: &Expr, dim: usize) -> Derivatives {
        let grad_exprs: Vec<Expr> = (0..dim).map(|i| e.differentiate(i)).collect();
        let mut hess = Vec::with_capacity(dim * (dim + 1) / 2);
        for (i, gi) in grad_exprs.iter().enumerate() {
            for j in i..dim {
                hess.push(gi.differentiate(j).compile());
            }
        }
        Derivatives {
            dim,
            value: e.compile(),
            grad: grad_exprs.iter().map(Expr::compile).collect(),
            hess,
            grad_exprs,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn partial(&self, i: usize) -> &Expr {
        &self.grad_exprs[i]
    }

    pub fn value(&self, z: &[f64]) -> Result<f64, EvalError> {
        self.value.eval(z)
    }

    pub fn gradient_into(&self, z: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, t) in out.iter_mut().zip(&self.grad) {
            *o = t.eval(z)?;
        }
        Ok(())
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dim];
        self.gradient_into(z, &mut out)?;
        Ok(out)
    }

    /// Row-major `dim x dim` Hessian written into `out`.
    pub fn hessian_into(&self, z: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let n = self.dim;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let v = self.hess[k].eval(z)?;
                out[i * n + j] = v;
                out[j * n + i] = v;
                k += 1;
            }
        }
        Ok(())
    }

    pub fn hessian(&self, z: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.hessian_into(z, &mut out)?;
        Ok(out)
    }
}
