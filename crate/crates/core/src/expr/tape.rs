use super::{powi, EvalError, Expr, Func};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Mul,
    Pow(u32),
    Neg,
    Call(Func),
}

/// Postfix program equivalent to an [`Expr`], evaluated on a small stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    ops: Vec<Op>,
    max_stack: usize,
    min_len: usize,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut ops = Vec::with_capacity(e.size());
        emit(e, &mut ops);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Add | Op::Mul => depth -= 1,
                Op::Pow(_) | Op::Neg | Op::Call(_) => {}
            }
            max_stack = max_stack.max(depth);
        }
        Tape { ops, max_stack, min_len: e.max_var().map_or(0, |i| i + 1) }
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64, EvalError> {
        if z.len() < self.min_len {
            return Err(EvalError::Dimension { need: self.min_len, got: z.len() });
        }
        let mut inline = [0.0f64; 32];
        let v = if self.max_stack <= inline.len() {
            run(&self.ops, z, &mut inline)
        } else {
            run(&self.ops, z, &mut vec![0.0; self.max_stack])
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var(i) => ops.push(Op::Var(*i)),
        Expr::Add(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Add);
        }
        Expr::Mul(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Mul);
        }
        Expr::Pow(a, k) => {
            emit(a, ops);
            ops.push(Op::Pow(*k));
        }
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Call(f, a) => {
            emit(a, ops);
            ops.push(Op::Call(*f));
        }
    }
}

fn run(ops: &[Op], z: &[f64], stack: &mut [f64]) -> f64 {
    let mut sp = 0usize;
    for op in ops {
        match *op {
            Op::Const(c) => {
                stack[sp] = c;
                sp += 1;
            }
            Op::Var(i) => {
                stack[sp] = z[i];
                sp += 1;
            }
            Op::Add => {
                sp -= 1;
                stack[sp - 1] += stack[sp];
            }
            Op::Mul => {
                sp -= 1;
                stack[sp - 1] *= stack[sp];
            }
            Op::Pow(k) => stack[sp - 1] = powi(stack[sp - 1], k),
            Op::Neg => stack[sp - 1] = -stack[sp - 1],
            Op::Call(f) => stack[sp - 1] = f.apply(stack[sp - 1]),
        }
    }
    stack[0]
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn tape_matches_tree() {
        let names: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        let e = parse("exp(-x^2) * (y - 3*sin(x*y)) + cos(y)^3 / 7", &names).unwrap();
        let t = e.compile();
        for z in [[0.1, 0.2], [-1.0, 3.0], [2.5, -0.7]] {
            assert_eq!(t.eval(&z).unwrap(), e.eval(&z).unwrap());
        }
    }
}
