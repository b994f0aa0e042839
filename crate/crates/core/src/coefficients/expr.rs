//! Closed-form expressions in `x`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := number | 'x' | 'i' | 'exp(' expr ')' | 'sin(' expr ')'
//!         | 'cos(' expr ')' | 'H(' expr ')' | '(' expr ')'
//! ```
//!
//! There is no unary minus; write `0-x`. `H` is the right-continuous unit step,
//! `H(z) = 1` for `Re z ≥ 0`.

use std::fmt;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    X,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Step(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EvalFault {
    DivisionByZero,
    NonFinite,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr> {
        let mut p = Parser {
            input,
            bytes: input.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn constant(c: C64) -> Expr {
        Expr::Const(c)
    }

    pub fn real(v: f64) -> Expr {
        Expr::Const(C64::new(v, 0.0))
    }

    pub(crate) fn eval_raw(&self, x: f64) -> std::result::Result<C64, EvalFault> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::X => C64::new(x, 0.0),
            Expr::Add(a, b) => a.eval_raw(x)? + b.eval_raw(x)?,
            Expr::Sub(a, b) => a.eval_raw(x)? - b.eval_raw(x)?,
            Expr::Mul(a, b) => a.eval_raw(x)? * b.eval_raw(x)?,
            Expr::Div(a, b) => {
                let num = a.eval_raw(x)?;
                let den = b.eval_raw(x)?;
                if den == zero() {
                    return Err(EvalFault::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval_raw(x)?;
                if *k < 0 && base == zero() {
                    return Err(EvalFault::DivisionByZero);
                }
                base.powi(*k)
            }
            Expr::Exp(a) => a.eval_raw(x)?.exp(),
            Expr::Sin(a) => a.eval_raw(x)?.sin(),
            Expr::Cos(a) => a.eval_raw(x)?.cos(),
            Expr::Step(a) => {
                if a.eval_raw(x)?.re >= 0.0 {
                    one()
                } else {
                    zero()
                }
            }
        };
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalFault::NonFinite)
        }
    }

    /// Evaluates at `x`, reporting failures against the printed expression.
    pub fn eval(&self, x: f64) -> Result<C64> {
        self.eval_raw(x).map_err(|fault| match fault {
            EvalFault::DivisionByZero => Error::DivisionByZero {
                expr: self.to_string(),
                x,
            },
            EvalFault::NonFinite => Error::NonFinite {
                expr: self.to_string(),
                x,
            },
        })
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::X => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on_x() || b.depends_on_x()
            }
            Expr::Pow(a, _) | Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Step(a) => {
                a.depends_on_x()
            }
        }
    }

    /// True when no step has an `x`-dependent argument.
    pub fn is_continuous(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::X => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_continuous() && b.is_continuous()
            }
            Expr::Pow(a, _) | Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) => a.is_continuous(),
            Expr::Step(a) => !a.depends_on_x(),
        }
    }

    /// Structurally zero after constant folding.
    pub fn is_zero(&self) -> bool {
        matches!(self.clone().simplify(), Expr::Const(c) if c == zero())
    }

    pub fn as_constant(&self) -> Option<C64> {
        match self.clone().simplify() {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Symbolic `d/dx`, folded.
    pub fn derivative(&self) -> Result<Expr> {
        let d = match self {
            Expr::Const(_) => Expr::Const(zero()),
            Expr::X => Expr::Const(one()),
            Expr::Add(a, b) => add(a.derivative()?, b.derivative()?),
            Expr::Sub(a, b) => sub(a.derivative()?, b.derivative()?),
            Expr::Mul(a, b) => add(
                mul(a.derivative()?, (**b).clone()),
                mul((**a).clone(), b.derivative()?),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative()?, (**b).clone()),
                    mul((**a).clone(), b.derivative()?),
                ),
                pow((**b).clone(), 2),
            ),
            Expr::Pow(a, k) => mul(
                mul(Expr::real(*k as f64), pow((**a).clone(), k - 1)),
                a.derivative()?,
            ),
            Expr::Exp(a) => mul(Expr::Exp(a.clone()), a.derivative()?),
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.derivative()?),
            Expr::Cos(a) => mul(
                mul(Expr::real(-1.0), Expr::Sin(a.clone())),
                a.derivative()?,
            ),
            Expr::Step(a) => {
                if a.depends_on_x() {
                    return Err(Error::NotDifferentiable(self.to_string()));
                }
                Expr::Const(zero())
            }
        };
        Ok(d.simplify())
    }

    pub fn nth_derivative(&self, k: usize) -> Result<Expr> {
        let mut e = self.clone();
        for _ in 0..k {
            e = e.derivative()?;
        }
        Ok(e)
    }

    /// Bottom-up constant folding and removal of additive zeros and unit factors.
    pub fn simplify(self) -> Expr {
        match self {
            Expr::Add(a, b) => add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => div(a.simplify(), b.simplify()),
            Expr::Pow(a, k) => pow(a.simplify(), k),
            Expr::Exp(a) => unary(a.simplify(), Expr::Exp, C64::exp),
            Expr::Sin(a) => unary(a.simplify(), Expr::Sin, C64::sin),
            Expr::Cos(a) => unary(a.simplify(), Expr::Cos, C64::cos),
            Expr::Step(a) => unary(a.simplify(), Expr::Step, |z| {
                if z.re >= 0.0 {
                    one()
                } else {
                    zero()
                }
            }),
            e => e,
        }
    }
}

fn unary(a: Expr, wrap: fn(Box<Expr>) -> Expr, f: fn(C64) -> C64) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(f(c)),
        a => wrap(Box::new(a)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(z), e) | (e, Expr::Const(z)) if z == zero() => e,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (e, Expr::Const(z)) if z == zero() => e,
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == zero() => Expr::Const(zero()),
        (Expr::Const(u), e) | (e, Expr::Const(u)) if u == one() => e,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if y != zero() => Expr::Const(x / y),
        (Expr::Const(z), b) if z == zero() && !matches!(b, Expr::Const(_)) => {
            Expr::Const(zero())
        }
        (e, Expr::Const(u)) if u == one() => e,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, k: i32) -> Expr {
    match (a, k) {
        (_, 0) => Expr::Const(one()),
        (e, 1) => e,
        (Expr::Const(c), k) if k > 0 || c != zero() => Expr::Const(c.powi(k)),
        (a, k) => Expr::Pow(Box::new(a), k),
    }
}

fn fmt_number(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v < 0.0 {
        write!(f, "(0-{})", -v)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Expr {
    /// Prints a fully parenthesised string that parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    fmt_number(c.re, f)
                } else if c.re == 0.0 {
                    write!(f, "(")?;
                    fmt_number(c.im, f)?;
                    write!(f, "*i)")
                } else {
                    write!(f, "(")?;
                    fmt_number(c.re, f)?;
                    write!(f, "+")?;
                    fmt_number(c.im, f)?;
                    write!(f, "*i)")
                }
            }
            Expr::X => write!(f, "x"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, k) => {
                if *k < 0 {
                    write!(f, "(1/({a})^{})", -k)
                } else {
                    write!(f, "({a})^{k}")
                }
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Step(a) => write!(f, "H({a})"),
        }
    }
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            input: self.input.to_string(),
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        if self.bytes.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            self.pos = start;
            return Err(self.error("expected an integer exponent"));
        }
        self.input[start..self.pos]
            .parse()
            .map_err(|_| self.error("exponent out of range"))
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let b = self.bytes;
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < b.len() && b[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - s
        };
        let mut p = self.pos;
        let mut count = digits(&mut p);
        if p < b.len() && b[p] == b'.' {
            p += 1;
            count += digits(&mut p);
        }
        if count == 0 {
            return Err(self.error("malformed number"));
        }
        if p < b.len() && (b[p] == b'e' || b[p] == b'E') {
            let mut q = p + 1;
            if q < b.len() && (b[q] == b'+' || b[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) > 0 {
                p = q;
            }
        }
        self.pos = p;
        let v: f64 = self.input[start..p].parse().map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })?;
        Ok(Expr::real(v))
    }

    fn call(&mut self, wrap: fn(Box<Expr>) -> Expr) -> Result<Expr> {
        self.expect(b'(')?;
        let inner = self.expr()?;
        self.expect(b')')?;
        Ok(wrap(Box::new(inner)))
    }

    fn base(&mut self) -> Result<Expr> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of input"));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        match &self.input[start..self.pos] {
            "x" => Ok(Expr::X),
            "i" => Ok(Expr::Const(C64::new(0.0, 1.0))),
            "exp" => self.call(Expr::Exp),
            "sin" => self.call(Expr::Sin),
            "cos" => self.call(Expr::Cos),
            "H" => self.call(Expr::Step),
            "" => Err(self.error("expected a number, `x`, `i`, a function or `(`")),
            _ => {
                self.pos = start;
                Err(self.error("unknown identifier"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> C64 {
        Expr::parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", 0.0), C64::new(7.0, 0.0));
        assert_eq!(ev("8/4/2", 0.0), C64::new(1.0, 0.0));
        assert_eq!(ev("5-2-1", 0.0), C64::new(2.0, 0.0));
        assert_eq!(ev("2*x^3", 2.0), C64::new(16.0, 0.0));
        assert_eq!(ev("x^2+1", 1.0), C64::new(2.0, 0.0));
        assert_eq!(ev("(x+1)^-1", 1.0), C64::new(0.5, 0.0));
        assert_eq!(ev(" 1.5e1 + .5 ", 0.0), C64::new(15.5, 0.0));
    }

    #[test]
    fn complex_constants() {
        let v = ev("1/(2*i)", 0.0);
        assert!((v - C64::new(0.0, -0.5)).norm() < 1e-15);
        let w = ev("exp(i*x)", std::f64::consts::PI);
        assert!((w + 1.0).norm() < 1e-15);
    }

    #[test]
    fn step_is_right_continuous() {
        let e = Expr::parse("H(x-0.5)").unwrap();
        let vals: Vec<f64> = [0.0, 0.5, 1.0].iter().map(|&x| e.eval(x).unwrap().re).collect();
        assert_eq!(vals, vec![0.0, 1.0, 1.0]);
        assert!(!e.is_continuous());
        assert!(Expr::parse("H(1)*x").unwrap().is_continuous());
    }

    #[test]
    fn evaluation_errors() {
        let e = Expr::parse("1/x").unwrap();
        assert!(matches!(e.eval(0.0), Err(Error::DivisionByZero { .. })));
        assert!(matches!(
            Expr::parse("x^-2").unwrap().eval(0.0),
            Err(Error::DivisionByZero { .. })
        ));
        assert!(matches!(
            Expr::parse("exp(exp(x))").unwrap().eval(10.0),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "-x", "x+", "sin x", "foo(x)", "(x", "x)", "x^", "x^1.5", "2x", "1..2"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn derivatives() {
        let d = Expr::parse("x^3*exp(x)").unwrap().derivative().unwrap();
        for x in [0.0, 0.3, 1.0] {
            let expected = (3.0 * x * x + x * x * x) * f64::exp(x);
            assert!((d.eval(x).unwrap().re - expected).abs() < 1e-13);
        }
        let d2 = Expr::parse("sin(2*x)").unwrap().nth_derivative(2).unwrap();
        assert!((d2.eval(0.7).unwrap().re + 4.0 * (1.4f64).sin()).abs() < 1e-13);
        let q = Expr::parse("1/(1+x)").unwrap().derivative().unwrap();
        assert!((q.eval(1.0).unwrap().re + 0.25).abs() < 1e-15);
        assert!(Expr::parse("1/(2*i)").unwrap().derivative().unwrap().is_zero());
        assert!(Expr::parse("cos(x)").unwrap().nth_derivative(2).unwrap().eval(0.0).unwrap().re == -1.0);
        assert!(matches!(
            Expr::parse("H(x-0.5)").unwrap().derivative(),
            Err(Error::NotDifferentiable(_))
        ));
        assert!(Expr::parse("x").unwrap().nth_derivative(2).unwrap().is_zero());
    }

    #[test]
    fn display_round_trips() {
        for s in ["x^2+1", "1/(2*i)", "H(x-0.5)*sin(3*x)", "(x+1)^-2", "exp(0-x)/(x+2)"] {
            let e = Expr::parse(s).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            for x in [0.1, 0.6, 0.9] {
                assert!((e.eval(x).unwrap() - back.eval(x).unwrap()).norm() < 1e-14, "{s}");
            }
        }
        let neg = Expr::real(-2.5);
        assert_eq!(Expr::parse(&neg.to_string()).unwrap().eval(0.0).unwrap().re, -2.5);
    }
}
