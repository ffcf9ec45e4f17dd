use std::fmt;

use thiserror::Error;

use super::{CmpOp, Expr, Func, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NonFinite,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogOfNonPositive => "log of a non-positive number",
            EvalErrorKind::SqrtOfNegative => "sqrt of a negative number",
            EvalErrorKind::NonFinite => "non-finite result",
        })
    }
}

/// Evaluation failure, carrying the offending sub-expression.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{node}` at s = {s}, Q = {q}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub node: String,
    pub s: f64,
    pub q: f64,
}

impl Expr {
    pub fn eval(&self, s: f64, q: f64) -> Result<f64, EvalError> {
        let fail = |kind| EvalError {
            kind,
            node: self.to_string(),
            s,
            q,
        };
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::S) => s,
            Expr::Var(Var::Q) => q,
            Expr::Neg(a) => -a.eval(s, q)?,
            Expr::Add(a, b) => a.eval(s, q)? + b.eval(s, q)?,
            Expr::Sub(a, b) => a.eval(s, q)? - b.eval(s, q)?,
            Expr::Mul(a, b) => a.eval(s, q)? * b.eval(s, q)?,
            Expr::Div(a, b) => {
                let num = a.eval(s, q)?;
                let den = b.eval(s, q)?;
                if den == 0.0 {
                    return Err(fail(EvalErrorKind::DivisionByZero));
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(s, q)?;
                if base == 0.0 && *k < 0 {
                    return Err(fail(EvalErrorKind::DivisionByZero));
                }
                base.powi(*k)
            }
            Expr::Call(func, a) => {
                let x = a.eval(s, q)?;
                match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(fail(EvalErrorKind::LogOfNonPositive));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(fail(EvalErrorKind::SqrtOfNegative));
                        }
                        x.sqrt()
                    }
                }
            }
            Expr::Piecewise {
                cond,
                then,
                otherwise,
            } => {
                let l = cond.lhs.eval(s, q)?;
                let r = cond.rhs.eval(s, q)?;
                if cond.op.holds(l, r) {
                    then.eval(s, q)?
                } else {
                    otherwise.eval(s, q)?
                }
            }
        };
        if !v.is_finite() {
            return Err(fail(EvalErrorKind::NonFinite));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    /// `s`-only subtree, sampled at the grid nodes.
    Fixed(Vec<f64>),
    Q,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
    Piecewise {
        lhs: Box<Node>,
        op: CmpOp,
        rhs: Box<Node>,
        then: Box<Node>,
        otherwise: Box<Node>,
    },
}

/// An expression specialised to a fixed set of `s` nodes, evaluated for a
/// whole vector of `Q` values at once.
///
/// Sub-expressions free of `Q` are sampled once at construction. Domain
/// failures propagate as NaN and are re-diagnosed with the scalar evaluator
/// only if they survive branch selection.
#[derive(Debug, Clone)]
pub struct GridExpr {
    expr: Expr,
    nodes: Vec<f64>,
    root: Node,
}

fn sample_fixed(e: &Expr, nodes: &[f64]) -> Node {
    if let Expr::Num(v) = e {
        return Node::Const(*v);
    }
    Node::Fixed(
        nodes
            .iter()
            .map(|&s| e.eval(s, 0.0).unwrap_or(f64::NAN))
            .collect(),
    )
}

fn compile(e: &Expr, nodes: &[f64]) -> Node {
    if !e.depends_on(Var::Q) {
        return sample_fixed(e, nodes);
    }
    let c = |x: &Expr| Box::new(compile(x, nodes));
    match e {
        Expr::Num(v) => Node::Const(*v),
        Expr::Var(Var::Q) => Node::Q,
        Expr::Var(Var::S) => sample_fixed(e, nodes),
        Expr::Neg(a) => Node::Neg(c(a)),
        Expr::Add(a, b) => Node::Add(c(a), c(b)),
        Expr::Sub(a, b) => Node::Sub(c(a), c(b)),
        Expr::Mul(a, b) => Node::Mul(c(a), c(b)),
        Expr::Div(a, b) => Node::Div(c(a), c(b)),
        Expr::Pow(a, k) => Node::Pow(c(a), *k),
        Expr::Call(f, a) => Node::Call(*f, c(a)),
        Expr::Piecewise {
            cond,
            then,
            otherwise,
        } => Node::Piecewise {
            lhs: c(&cond.lhs),
            op: cond.op,
            rhs: c(&cond.rhs),
            then: c(then),
            otherwise: c(otherwise),
        },
    }
}

fn unary(mut a: Vec<f64>, f: impl Fn(f64) -> f64) -> Vec<f64> {
    for x in &mut a {
        *x = f(*x);
    }
    a
}

fn binary(mut a: Vec<f64>, b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = f(*x, y);
    }
    a
}

impl Node {
    fn eval(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Node::Const(v) => vec![*v; q.len()],
            Node::Fixed(v) => v.clone(),
            Node::Q => q.to_vec(),
            Node::Neg(a) => unary(a.eval(q), |x| -x),
            Node::Add(a, b) => binary(a.eval(q), &b.eval(q), |x, y| x + y),
            Node::Sub(a, b) => binary(a.eval(q), &b.eval(q), |x, y| x - y),
            Node::Mul(a, b) => match (&**a, &**b) {
                (Node::Const(k), other) | (other, Node::Const(k)) => unary(other.eval(q), |x| k * x),
                _ => binary(a.eval(q), &b.eval(q), |x, y| x * y),
            },
            Node::Div(a, b) => binary(a.eval(q), &b.eval(q), |x, y| {
                if y == 0.0 {
                    f64::NAN
                } else {
                    x / y
                }
            }),
            Node::Pow(a, k) => {
                let k = *k;
                unary(a.eval(q), |x| {
                    if x == 0.0 && k < 0 {
                        f64::NAN
                    } else {
                        x.powi(k)
                    }
                })
            }
            Node::Call(f, a) => {
                let x = a.eval(q);
                match f {
                    Func::Exp => unary(x, f64::exp),
                    Func::Log => unary(x, |v| if v <= 0.0 { f64::NAN } else { v.ln() }),
                    Func::Sin => unary(x, f64::sin),
                    Func::Cos => unary(x, f64::cos),
                    Func::Sqrt => unary(x, |v| if v < 0.0 { f64::NAN } else { v.sqrt() }),
                }
            }
            Node::Piecewise {
                lhs,
                op,
                rhs,
                then,
                otherwise,
            } => {
                let l = lhs.eval(q);
                let r = rhs.eval(q);
                let t = then.eval(q);
                let o = otherwise.eval(q);
                l.iter()
                    .zip(&r)
                    .zip(t.into_iter().zip(o))
                    .map(|((&l, &r), (t, o))| {
                        if l.is_nan() || r.is_nan() {
                            f64::NAN
                        } else if op.holds(l, r) {
                            t
                        } else {
                            o
                        }
                    })
                    .collect()
            }
        }
    }
}

impl GridExpr {
    pub fn new(expr: &Expr, nodes: &[f64]) -> Self {
        GridExpr {
            expr: expr.clone(),
            nodes: nodes.to_vec(),
            root: compile(expr, nodes),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values at every node for environment samples `q` (one per node).
    pub fn eval(&self, q: &[f64]) -> Result<Vec<f64>, EvalError> {
        assert_eq!(q.len(), self.nodes.len(), "one Q sample per node");
        let out = self.root.eval(q);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            let (s, qi) = (self.nodes[i], q[i]);
            return Err(match self.expr.eval(s, qi) {
                Err(e) => e,
                Ok(_) => EvalError {
                    kind: EvalErrorKind::NonFinite,
                    node: self.expr.to_string(),
                    s,
                    q: qi,
                },
            });
        }
        Ok(out)
    }
}
