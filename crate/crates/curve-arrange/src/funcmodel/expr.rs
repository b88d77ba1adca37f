//! Expression trees for bivariate analytic functions, their parser, and
//! symbolic differentiation.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' integer)?
//! base   := number | 'x' | 'y' | '(' expr ')' | func '(' expr ')' | '-' factor
//! func   := 'sin' | 'cos' | 'exp'
//! number := digits ('.' digits)?
//! ```
//!
//! Decimal literals become exact rationals (`0.05` is 1/20, not a float), and
//! constant subexpressions are folded at build time, so `1/3` parses through
//! the division rule and lands as the rational 1/3.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    X,
    Y,
    Const(BigRational),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

/// Differentiation variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

// Smart constructors with local constant folding. These keep derivative trees
// from drowning in `* 1` and `+ 0` noise; they never change the function.
pub fn c_int(v: i64) -> Expr {
    Expr::Const(BigRational::from_integer(BigInt::from(v)))
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(x), b) if x.is_zero() => b,
        (a, Expr::Const(y)) if y.is_zero() => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, Expr::Const(y)) if y.is_zero() => a,
        (Expr::Const(x), b) if x.is_zero() => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(x), _) | (_, Expr::Const(x)) if x.is_zero() => Expr::Const(x),
        (Expr::Const(x), b) if x.is_one() => b,
        (a, Expr::Const(y)) if y.is_one() => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if !y.is_zero() => Expr::Const(x / y),
        (a, Expr::Const(y)) if y.is_one() => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => Expr::Const(-x),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub fn pow(a: Expr, n: u32) -> Expr {
    match (a, n) {
        (_, 0) => c_int(1),
        (a, 1) => a,
        (Expr::Const(x), n) => {
            let mut acc = BigRational::one();
            for _ in 0..n {
                acc *= x.clone();
            }
            Expr::Const(acc)
        }
        (a, n) => Expr::Pow(Box::new(a), n),
    }
}

impl Expr {
    /// Parse expression text; errors carry a byte offset into the input.
    pub fn parse(input: &str) -> Result<Expr> {
        let mut p = Parser { input: input.as_bytes(), pos: 0 };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.input.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Partial derivative with local simplification.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::X => c_int(if v == Var::X { 1 } else { 0 }),
            Expr::Y => c_int(if v == Var::Y { 1 } else { 0 }),
            Expr::Const(_) => c_int(0),
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.diff(v), (**b).clone()),
                    mul((**a).clone(), b.diff(v)),
                ),
                pow((**b).clone(), 2),
            ),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Pow(a, n) => mul(
                mul(c_int(*n as i64), pow((**a).clone(), n - 1)),
                a.diff(v),
            ),
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.diff(v)),
            Expr::Cos(a) => neg(mul(Expr::Sin(a.clone()), a.diff(v))),
            Expr::Exp(a) => mul(Expr::Exp(a.clone()), a.diff(v)),
        }
    }

    /// Does the tree contain sin/cos/exp? (Gates the exact-rational sign path.)
    pub fn has_transcendental(&self) -> bool {
        match self {
            Expr::X | Expr::Y | Expr::Const(_) => false,
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.has_transcendental() || b.has_transcendental()
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.has_transcendental(),
        }
    }

    /// Does the tree contain a division by a non-constant? (Gates the startup
    /// denominator check.)
    pub fn has_division(&self) -> bool {
        match self {
            Expr::X | Expr::Y | Expr::Const(_) => false,
            Expr::Div(_, _) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.has_division() || b.has_division()
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.has_division()
            }
        }
    }

    /// All denominator subtrees, for the startup sign-definiteness check.
    pub fn denominators(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out
    }

    fn collect_denominators<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::X | Expr::Y | Expr::Const(_) => {}
            Expr::Div(a, b) => {
                out.push(b);
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_denominators(out);
                b.collect_denominators(out);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.collect_denominators(out);
            }
        }
    }
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { offset: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = add(acc, self.term()?);
            } else if self.eat(b'-') {
                acc = sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = mul(acc, self.factor()?);
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                if matches!(&rhs, Expr::Const(c) if c.is_zero()) {
                    return Err(self.err("division by constant zero"));
                }
                acc = div(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let b = self.base()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            return Ok(pow(b, n));
        }
        Ok(b)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            // Exponentiation binds tighter than unary minus: -x^2 is -(x^2).
            Some(b'-') => {
                self.pos += 1;
                self.skip_ws();
                Ok(neg(self.factor()?))
            }
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, variable, function or '('")),
        }
    }

    fn integer(&mut self) -> Result<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a nonnegative integer exponent"));
        }
        let text = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
        let n: u32 = text
            .parse()
            .map_err(|_| self.err("exponent out of range"))?;
        self.skip_ws();
        Ok(n)
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let int_end = self.pos;
        let mut frac_len = 0usize;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let fs = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            frac_len = self.pos - fs;
            if frac_len == 0 {
                return Err(self.err("expected digits after decimal point"));
            }
        }
        let text = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
        let digits: String = text.chars().filter(|c| *c != '.').collect();
        let n: BigInt = digits
            .parse()
            .map_err(|_| Error::Parse { offset: start, message: "bad number".into() })?;
        let _ = int_end;
        let den = BigInt::from(10u32).pow(frac_len as u32);
        self.skip_ws();
        Ok(Expr::Const(BigRational::new(n, den)))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.input[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        match name.as_str() {
            "x" => Ok(Expr::X),
            "y" => Ok(Expr::Y),
            "sin" | "cos" | "exp" => {
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(match name.as_str() {
                    "sin" => Expr::Sin(Box::new(arg)),
                    "cos" => Expr::Cos(Box::new(arg)),
                    _ => Expr::Exp(Box::new(arg)),
                })
            }
            _ => Err(Error::Parse {
                offset: start,
                message: format!("unknown identifier '{name}' (expected x, y, sin, cos, exp)"),
            }),
        }
    }
}

// Display is only used in diagnostics; a compact fully parenthesized form is
// fine and round-trips through the parser.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Const(c) => {
                if c.is_integer() && !c.is_negative() {
                    write!(f, "{}", c.numer())
                } else if c.is_negative() {
                    write!(f, "(0 - {}/{})", -c.numer(), c.denom())
                } else {
                    write!(f, "{}/{}", c.numer(), c.denom())
                }
            }
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(0 - {a})"),
            Expr::Pow(a, n) => write!(f, "{a}^{n}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}
