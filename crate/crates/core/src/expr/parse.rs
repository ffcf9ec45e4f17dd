use std::fmt;

use thiserror::Error;

use super::{CmpOp, Cond, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnknownIdentifier(String),
    BadNumber(String),
    NonIntegerExponent,
    MixedCondition,
    TrailingInput,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected {t}"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::BadNumber(text) => write!(f, "malformed number `{text}`"),
            ParseErrorKind::NonIntegerExponent => f.write_str("exponent must be an integer literal"),
            ParseErrorKind::MixedCondition => {
                f.write_str("piecewise condition may not depend on both s and Q")
            }
            ParseErrorKind::TrailingInput => f.write_str("trailing input after expression"),
        }
    }
}

/// Syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Cmp(CmpOp),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                Tok::Cmp(match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (_, false) => CmpOp::Gt,
                    (_, true) => CmpOp::Ge,
                })
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let value = text.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                })?;
                i = j;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let name = src[i..j].to_string();
                i = j;
                out.push((Tok::Ident(name), start));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

// Deeply nested input would otherwise overflow the stack.
const MAX_DEPTH: usize = 256;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        let kind = match self.peek() {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            t => ParseErrorKind::UnexpectedToken(t.describe()),
        };
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError {
                offset: self.offset(),
                kind: ParseErrorKind::UnexpectedToken("nesting deeper than 256 levels".into()),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = self.exponent()?;
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.bump();
        }
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let offset = self.offset();
        let value = match self.peek() {
            Tok::Num(v) => *v,
            _ => return Err(self.unexpected()),
        };
        if value.fract() != 0.0 || value > 1024.0 {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::NonIntegerExponent,
            });
        }
        self.bump();
        if paren {
            self.expect(Tok::RParen)?;
        }
        let k = value as i32;
        Ok(if negative { -k } else { k })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "s" => Ok(Expr::Var(Var::S)),
                    "Q" => Ok(Expr::Var(Var::Q)),
                    "piecewise" => self.piecewise(offset),
                    other => match Func::from_name(other) {
                        Some(func) => {
                            self.expect(Tok::LParen)?;
                            let arg = self.expr()?;
                            self.expect(Tok::RParen)?;
                            Ok(Expr::Call(func, Box::new(arg)))
                        }
                        None => Err(ParseError {
                            offset,
                            kind: ParseErrorKind::UnknownIdentifier(name),
                        }),
                    },
                }
            }
            _ => Err(self.unexpected()),
        }
    }

    fn piecewise(&mut self, offset: usize) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen)?;
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.unexpected()),
        };
        self.bump();
        let rhs = self.expr()?;
        let mixed = (lhs.depends_on(Var::S) || rhs.depends_on(Var::S))
            && (lhs.depends_on(Var::Q) || rhs.depends_on(Var::Q));
        if mixed {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::MixedCondition,
            });
        }
        self.expect(Tok::Comma)?;
        let then = self.expr()?;
        self.expect(Tok::Comma)?;
        let otherwise = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(Expr::Piecewise {
            cond: Cond {
                lhs: Box::new(lhs),
                op,
                rhs: Box::new(rhs),
            },
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        })
    }
}

/// Parses an expression in `s` and `Q`.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(ParseError {
            offset: p.offset(),
            kind: ParseErrorKind::TrailingInput,
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        // unary minus binds looser than ^
        let e = parse("-s^2").unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(Var::S)), 2))));
        let e = parse("1 + 2*s").unwrap();
        assert!(matches!(e, Expr::Add(..)));
        let e = parse("1 - s - Q").unwrap();
        match e {
            Expr::Sub(a, _) => assert!(matches!(*a, Expr::Sub(..))),
            other => panic!("{other:?}"),
        }
        let e = parse("s^-2").unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Var(Var::S)), -2));
        let e = parse("s^(-2)").unwrap();
        assert_eq!(e, Expr::Pow(Box::new(Expr::Var(Var::S)), -2));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1e-3").unwrap(), Expr::Num(1e-3));
        assert_eq!(parse(".5").unwrap(), Expr::Num(0.5));
        assert_eq!(parse("2.5E+2").unwrap(), Expr::Num(250.0));
        assert!(matches!(
            parse("1.2.3").unwrap_err().kind,
            ParseErrorKind::BadNumber(_)
        ));
        assert!(matches!(parse("4e888").unwrap_err().kind, ParseErrorKind::BadNumber(_)));
    }

    #[test]
    fn deep_negation_prints_back() {
        let src = format!("{}s", "-".repeat(200));
        let e = parse(&src).unwrap();
        assert_eq!(e.to_string(), src);
        assert_eq!(parse("-(-(s))").unwrap().to_string(), "--s");
    }

    #[test]
    fn syntax_error_offsets() {
        let err = parse("exp(s*").unwrap_err();
        assert_eq!(err.offset, 6);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);

        let err = parse("1 + x").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("x".into()));

        let err = parse("s $ 2").unwrap_err();
        assert_eq!(err.offset, 2);

        let err = parse("s 2").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::TrailingInput);

        let err = parse("s^1.5").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonIntegerExponent);

        let err = parse("s^2^2").unwrap_err();
        assert_eq!(err.offset, 3);

        assert!(parse("").is_err());
        assert!(parse("exp s").is_err());
    }

    #[test]
    fn piecewise_condition_rules() {
        assert!(parse("piecewise(Q <= 3/4, 1, 2)").is_ok());
        assert!(parse("piecewise(s > 0.5, Q, 2*Q)").is_ok());
        let err = parse("piecewise(s < Q, 1, 2)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MixedCondition);
        assert_eq!(err.offset, 0);
        assert!(parse("piecewise(s, 1, 2)").is_err());
    }

    #[test]
    fn nesting_is_bounded() {
        let deep = "(".repeat(10_000) + "s" + &")".repeat(10_000);
        assert!(parse(&deep).is_err());
        let deep = "-".repeat(10_000) + "s";
        assert!(parse(&deep).is_err());
    }

    #[test]
    fn non_ascii_input() {
        let err = parse("s × 2").unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('×'));
    }
}
