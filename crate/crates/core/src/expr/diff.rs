//! Symbolic partial derivatives with light constant folding.

use super::{Cond, Expr, Func, Var};

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn folded(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Num(v))
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x + y).unwrap_or_else(|| Expr::Add(Box::new(a), Box::new(b))),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x - y).unwrap_or_else(|| Expr::Sub(Box::new(a), Box::new(b))),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => folded(x * y).unwrap_or_else(|| Expr::Mul(Box::new(a), Box::new(b))),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => {
            folded(x / y).unwrap_or_else(|| Expr::Div(Box::new(a), Box::new(b)))
        }
        (Some(x), _) if x == 0.0 => num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => num(1.0),
        1 => a,
        _ => match as_num(&a) {
            Some(x) => folded(x.powi(k)).unwrap_or_else(|| Expr::Pow(Box::new(a), k)),
            None => Expr::Pow(Box::new(a), k),
        },
    }
}

fn call(func: Func, a: Expr) -> Expr {
    Expr::Call(func, Box::new(a))
}

impl Expr {
    /// Partial derivative with respect to `var`. Piecewise expressions are
    /// differentiated branch by branch under the same condition.
    pub fn diff(&self, var: Var) -> Expr {
        if !self.depends_on(var) {
            return num(0.0);
        }
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                if db.is_zero() {
                    div(da, (**b).clone())
                } else {
                    div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        pow((**b).clone(), 2),
                    )
                }
            }
            Expr::Pow(a, k) => mul(
                mul(num(*k as f64), pow((**a).clone(), k - 1)),
                a.diff(var),
            ),
            Expr::Call(func, a) => {
                let inner = (**a).clone();
                let da = a.diff(var);
                let outer = match func {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(num(1.0), inner),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
                };
                mul(outer, da)
            }
            Expr::Piecewise {
                cond,
                then,
                otherwise,
            } => {
                let dt = then.diff(var);
                let de = otherwise.diff(var);
                if dt.is_zero() && de.is_zero() {
                    return num(0.0);
                }
                Expr::Piecewise {
                    cond: Cond {
                        lhs: cond.lhs.clone(),
                        op: cond.op,
                        rhs: cond.rhs.clone(),
                    },
                    then: Box::new(dt),
                    otherwise: Box::new(de),
                }
            }
        }
    }
}
