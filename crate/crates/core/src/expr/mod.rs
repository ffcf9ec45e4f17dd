//! Vital-rate expressions in the size `s` and the environment `Q`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr      = term { ("+" | "-") term } ;
//! term      = unary { ("*" | "/") unary } ;
//! unary     = "-" unary | power ;
//! power     = primary [ "^" exponent ] ;
//! exponent  = [ "-" ] integer | "(" [ "-" ] integer ")" ;
//! primary   = number | "s" | "Q"
//!           | func "(" expr ")"
//!           | "piecewise" "(" cond "," expr "," expr ")"
//!           | "(" expr ")" ;
//! func      = "exp" | "log" | "sin" | "cos" | "sqrt" ;
//! cond      = expr ("<" | "<=" | ">" | ">=") expr ;
//! number    = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!           | "." digits [ exponent part ] ;
//! ```
//!
//! A piecewise condition may depend on `s` or on `Q` but not on both. When
//! the two sides of a condition are equal the `then` branch is taken,
//! whatever the comparison operator. Literals that overflow `f64` are
//! rejected.

mod diff;
mod eval;
mod parse;

use std::fmt;

pub use eval::{EvalError, EvalErrorKind, GridExpr};
pub use parse::{parse, ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    S,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// Ties select the `then` branch.
    pub(crate) fn holds(self, lhs: f64, rhs: f64) -> bool {
        if lhs == rhs {
            return true;
        }
        match self {
            CmpOp::Lt | CmpOp::Le => lhs < rhs,
            CmpOp::Gt | CmpOp::Ge => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cond {
    pub lhs: Box<Expr>,
    pub op: CmpOp,
    pub rhs: Box<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power.
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    Piecewise {
        cond: Cond,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
}

impl Expr {
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
            Expr::Piecewise {
                cond,
                then,
                otherwise,
            } => {
                cond.lhs.depends_on(var)
                    || cond.rhs.depends_on(var)
                    || then.depends_on(var)
                    || otherwise.depends_on(var)
            }
        }
    }

    /// True for the literal `0`, which the derivative simplifier produces
    /// whenever a partial vanishes symbolically.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Expr::Piecewise {
                cond,
                then,
                otherwise,
            } => 1 + cond.lhs.node_count() + cond.rhs.node_count() + then.node_count() + otherwise.node_count(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 0,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) | Expr::Piecewise { .. } => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints source text that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::S) => f.write_str("s"),
            Expr::Var(Var::Q) => f.write_str("Q"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                // `--a` parses as nested negation; parentheses would add depth
                write_child(f, a, if matches!(**a, Expr::Neg(_)) { 3 } else { 4 })
            }
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("/")?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, k) => {
                write_child(f, a, 5)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Piecewise {
                cond,
                then,
                otherwise,
            } => write!(
                f,
                "piecewise({} {} {}, {then}, {otherwise})",
                cond.lhs,
                cond.op.symbol(),
                cond.rhs
            ),
        }
    }
}
