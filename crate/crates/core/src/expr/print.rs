use std::fmt::Write;

use super::Expr;

fn number(out: &mut String, c: f64) {
    if c.is_sign_negative() {
        let _ = write!(out, "(-{:?})", -c);
    } else {
        let _ = write!(out, "{c:?}");
    }
}

fn name(out: &mut String, names: &[String], i: usize) {
    match names.get(i) {
        Some(n) => out.push_str(n),
        None => {
            let _ = write!(out, "z{i}");
        }
    }
}

fn go(e: &Expr, names: &[String], out: &mut String) {
    match e {
        Expr::Const(c) => number(out, *c),
        Expr::Var(i) => name(out, names, *i),
        Expr::Add(a, b) => {
            out.push('(');
            go(a, names, out);
            if let Expr::Neg(inner) = &**b {
                out.push_str(" - ");
                go(inner, names, out);
            } else {
                out.push_str(" + ");
                go(b, names, out);
            }
            out.push(')');
        }
        Expr::Mul(a, b) => {
            out.push('(');
            go(a, names, out);
            out.push_str(" * ");
            go(b, names, out);
            out.push(')');
        }
        Expr::Pow(a, k) => {
            // Everything except a bare power already prints as an atom or
            // a parenthesized group.
            if matches!(&**a, Expr::Pow(..)) {
                out.push('(');
                go(a, names, out);
                out.push(')');
            } else {
                go(a, names, out);
            }
            let _ = write!(out, "^{k}");
        }
        Expr::Neg(a) => {
            out.push_str("(-");
            go(a, names, out);
            out.push(')');
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            go(a, names, out);
            out.push(')');
        }
    }
}

pub(super) fn render(e: &Expr, names: &[String]) -> String {
    let mut out = String::new();
    go(e, names, &mut out);
    out
}
