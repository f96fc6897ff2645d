//! Closed-form envelopes over the block index.
//!
//! An envelope is a small expression in the variables `n` (block index) and
//! optionally `q` (within-block singular-value rank). The grammar covers
//! numeric constants, `pi`, `e`, the variables, `+ - * /`, `^` (right
//! associative), unary minus and the functions `log`/`ln`, `sqrt` and `abs`.
//!
//! Besides evaluation, every expression admits a leading-term analysis
//! `c * n^a * (ln n)^b` as `n -> inf`. That analysis decides limits and
//! series convergence symbolically; the tail integrals below turn it into
//! numeric upper and lower bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("envelope `{source_text}` is not nonincreasing: value at n={at} exceeds the value before it")]
    NotMonotone { source_text: String, at: f64 },
    #[error("envelope `{source_text}` is not finite at n={at}")]
    NotFinite { source_text: String, at: f64 },
    #[error("envelope `{source_text}` has no decidable leading term")]
    NoAsymptotics { source_text: String },
    #[error("lower envelope exceeds upper envelope at n={at}")]
    LowerAboveUpper { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    N,
    Q,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Log(Box<Expr>),
    Abs(Box<Expr>),
}

/// Leading term `coef * n^power * (ln n)^log_power` of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub coef: f64,
    pub power: f64,
    pub log_power: f64,
}

/// Eventual behavior of an expression in `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Asymptotic {
    /// Identically zero.
    Zero,
    Term(Growth),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Limit {
    Zero,
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

const EXP_TOL: f64 = 1e-12;

impl Expr {
    pub fn eval(&self, n: f64, q: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::N) => n,
            Expr::Var(Var::Q) => q,
            Expr::Neg(a) => -a.eval(n, q),
            Expr::Add(a, b) => a.eval(n, q) + b.eval(n, q),
            Expr::Sub(a, b) => a.eval(n, q) - b.eval(n, q),
            Expr::Mul(a, b) => a.eval(n, q) * b.eval(n, q),
            Expr::Div(a, b) => a.eval(n, q) / b.eval(n, q),
            Expr::Pow(a, b) => a.eval(n, q).powf(b.eval(n, q)),
            Expr::Log(a) => a.eval(n, q).ln(),
            Expr::Abs(a) => a.eval(n, q).abs(),
        }
    }

    pub fn mentions(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Log(a) | Expr::Abs(a) => a.mentions(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.mentions(var) || b.mentions(var),
        }
    }

    pub fn is_constant(&self) -> bool {
        !self.mentions(Var::N) && !self.mentions(Var::Q)
    }

    /// Replaces `q` by a constant.
    pub fn substitute_q(&self, q: f64) -> Expr {
        self.map_vars(&|v| match v {
            Var::Q => Expr::Const(q),
            Var::N => Expr::Var(Var::N),
        })
    }

    fn map_vars(&self, f: &dyn Fn(Var) -> Expr) -> Expr {
        let b = |e: &Expr| Box::new(e.map_vars(f));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => f(*v),
            Expr::Neg(a) => Expr::Neg(b(a)),
            Expr::Add(x, y) => Expr::Add(b(x), b(y)),
            Expr::Sub(x, y) => Expr::Sub(b(x), b(y)),
            Expr::Mul(x, y) => Expr::Mul(b(x), b(y)),
            Expr::Div(x, y) => Expr::Div(b(x), b(y)),
            Expr::Pow(x, y) => Expr::Pow(b(x), b(y)),
            Expr::Log(a) => Expr::Log(b(a)),
            Expr::Abs(a) => Expr::Abs(b(a)),
        }
    }

    /// Leading-term analysis in `n`. `None` when the expression mentions `q`,
    /// leaves the power-log class (e.g. `2^n`), or cancels at leading order.
    pub fn asymptotic(&self) -> Option<Asymptotic> {
        use Asymptotic::{Term, Zero};
        let term = |coef: f64, power: f64, log_power: f64| {
            Some(Term(Growth {
                coef,
                power,
                log_power,
            }))
        };
        match self {
            Expr::Const(c) => {
                if !c.is_finite() {
                    None
                } else if *c == 0.0 {
                    Some(Zero)
                } else {
                    term(*c, 0.0, 0.0)
                }
            }
            Expr::Var(Var::N) => term(1.0, 1.0, 0.0),
            Expr::Var(Var::Q) => None,
            Expr::Neg(a) => match a.asymptotic()? {
                Zero => Some(Zero),
                Term(g) => term(-g.coef, g.power, g.log_power),
            },
            Expr::Add(a, b) => add_asym(a.asymptotic()?, b.asymptotic()?),
            Expr::Sub(a, b) => {
                let neg_b = match b.asymptotic()? {
                    Zero => Zero,
                    Term(g) => Term(Growth {
                        coef: -g.coef,
                        ..g
                    }),
                };
                add_asym(a.asymptotic()?, neg_b)
            }
            Expr::Mul(a, b) => match (a.asymptotic()?, b.asymptotic()?) {
                (Zero, _) | (_, Zero) => Some(Zero),
                (Term(x), Term(y)) => {
                    term(x.coef * y.coef, x.power + y.power, x.log_power + y.log_power)
                }
            },
            Expr::Div(a, b) => match (a.asymptotic()?, b.asymptotic()?) {
                (_, Zero) => None,
                (Zero, _) => Some(Zero),
                (Term(x), Term(y)) => {
                    term(x.coef / y.coef, x.power - y.power, x.log_power - y.log_power)
                }
            },
            Expr::Pow(a, b) => {
                if !b.is_constant() {
                    return None;
                }
                let k = b.eval(0.0, 0.0);
                if !k.is_finite() {
                    return None;
                }
                match a.asymptotic()? {
                    Zero => {
                        if k > 0.0 {
                            Some(Zero)
                        } else {
                            None
                        }
                    }
                    Term(g) => {
                        let integral = k.fract() == 0.0;
                        if g.coef < 0.0 && !integral {
                            return None;
                        }
                        term(g.coef.powf(k), g.power * k, g.log_power * k)
                    }
                }
            }
            Expr::Log(a) => match a.asymptotic()? {
                Zero => None,
                Term(g) => {
                    if g.coef <= 0.0 {
                        None
                    } else if g.power.abs() > EXP_TOL {
                        term(g.power, 0.0, 1.0)
                    } else if g.log_power.abs() > EXP_TOL {
                        // ln ln n growth is outside the class
                        None
                    } else if (g.coef - 1.0).abs() <= EXP_TOL {
                        // ln(1 + o(1)) needs the second-order term
                        None
                    } else {
                        term(g.coef.ln(), 0.0, 0.0)
                    }
                }
            },
            Expr::Abs(a) => match a.asymptotic()? {
                Zero => Some(Zero),
                Term(g) => term(g.coef.abs(), g.power, g.log_power),
            },
        }
    }
}

fn add_asym(a: Asymptotic, b: Asymptotic) -> Option<Asymptotic> {
    use Asymptotic::{Term, Zero};
    match (a, b) {
        (Zero, x) | (x, Zero) => Some(x),
        (Term(x), Term(y)) => {
            let dp = x.power - y.power;
            let dl = x.log_power - y.log_power;
            if dp.abs() > EXP_TOL {
                Some(Term(if dp > 0.0 { x } else { y }))
            } else if dl.abs() > EXP_TOL {
                Some(Term(if dl > 0.0 { x } else { y }))
            } else {
                let coef = x.coef + y.coef;
                if coef.abs() <= 1e-12 * x.coef.abs().max(y.coef.abs()) {
                    None
                } else {
                    Some(Term(Growth { coef, ..x }))
                }
            }
        }
    }
}

impl Asymptotic {
    pub fn limit(&self) -> Limit {
        match self {
            Asymptotic::Zero => Limit::Zero,
            Asymptotic::Term(g) => {
                let grows = g.power > EXP_TOL
                    || (g.power.abs() <= EXP_TOL && g.log_power > EXP_TOL);
                let decays = g.power < -EXP_TOL
                    || (g.power.abs() <= EXP_TOL && g.log_power < -EXP_TOL);
                if grows {
                    if g.coef > 0.0 {
                        Limit::PosInfinity
                    } else {
                        Limit::NegInfinity
                    }
                } else if decays {
                    Limit::Zero
                } else {
                    Limit::Finite(g.coef)
                }
            }
        }
    }

    /// Whether `sum_n f(n)^p` converges, for an eventually positive `f`.
    /// `None` when the leading coefficient is not positive.
    pub fn series_converges(&self, p: f64) -> Option<bool> {
        match self {
            Asymptotic::Zero => Some(true),
            Asymptotic::Term(g) => {
                if g.coef <= 0.0 {
                    return None;
                }
                let a = g.power * p;
                let b = g.log_power * p;
                if (a + 1.0).abs() > EXP_TOL {
                    Some(a < -1.0)
                } else {
                    Some(b < -1.0 - EXP_TOL)
                }
            }
        }
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, EnvelopeError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| EnvelopeError::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if "+-*/^".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Token::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Token::RParen));
            i += 1;
        } else {
            return Err(EnvelopeError::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.len, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, EnvelopeError> {
        Err(EnvelopeError::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, EnvelopeError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, EnvelopeError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, EnvelopeError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.at += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.at += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, EnvelopeError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.at += 1;
            // right associative, binds tighter than unary minus on the left
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, EnvelopeError> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.at += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.at += 1;
                        Ok(e)
                    }
                    _ => self.err("expected `)`"),
                }
            }
            Some(Token::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "n" => Ok(Expr::Var(Var::N)),
                    "q" => Ok(Expr::Var(Var::Q)),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => Ok(Expr::Const(std::f64::consts::E)),
                    "log" | "ln" | "sqrt" | "abs" => {
                        match self.peek() {
                            Some(Token::LParen) => {}
                            _ => return self.err(format!("expected `(` after `{name}`")),
                        }
                        let arg = Box::new(self.atom()?);
                        Ok(match name.as_str() {
                            "sqrt" => Expr::Pow(arg, Box::new(Expr::Const(0.5))),
                            "abs" => Expr::Abs(arg),
                            _ => Expr::Log(arg),
                        })
                    }
                    other => {
                        self.at -= 1;
                        self.err(format!("unknown identifier `{other}`"))
                    }
                }
            }
            Some(_) => self.err("expected a number, variable, function or `(`"),
            None => self.err("unexpected end of expression"),
        }
    }
}

impl FromStr for Expr {
    type Err = EnvelopeError;

    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            at: 0,
            len: src.len(),
        };
        let e = p.expr()?;
        if p.at != p.tokens.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }
}

// --------------------------------------------------------------- envelope

/// A parsed envelope that remembers its source text.
#[derive(Clone, PartialEq)]
pub struct Envelope {
    source: String,
    expr: Expr,
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Envelope({:?})", self.source)
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for Envelope {
    type Err = EnvelopeError;

    fn from_str(src: &str) -> Result<Self, Self::Err> {
        Ok(Envelope {
            source: src.trim().to_string(),
            expr: src.parse()?,
        })
    }
}

impl Serialize for Envelope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Envelope {
    pub fn parse(src: &str) -> Result<Self, EnvelopeError> {
        src.parse()
    }

    /// Wraps an already built expression; `source` is used for display only.
    pub fn from_expr(source: impl Into<String>, expr: Expr) -> Self {
        Envelope {
            source: source.into(),
            expr,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.expr.eval(n, 1.0)
    }

    pub fn eval_nq(&self, n: f64, q: f64) -> f64 {
        self.expr.eval(n, q)
    }

    pub fn asymptotic(&self) -> Option<Asymptotic> {
        self.expr.asymptotic()
    }

    pub fn limit(&self) -> Option<Limit> {
        self.asymptotic().map(|a| a.limit())
    }

    /// `f(n)^p` as a new envelope.
    pub fn powf(&self, p: f64) -> Envelope {
        if p == 1.0 {
            return self.clone();
        }
        Envelope {
            source: format!("({})^{}", self.source, p),
            expr: Expr::Pow(Box::new(self.expr.clone()), Box::new(Expr::Const(p))),
        }
    }

    /// Sampled check that the envelope is finite and nonincreasing on
    /// `n >= from`: every integer up to `from + 512`, then geometric points
    /// out to `1e15`.
    pub fn check_nonincreasing(&self, from: f64) -> Result<(), EnvelopeError> {
        let mut prev: Option<f64> = None;
        for x in sample_points(from) {
            let v = self.eval(x);
            if !v.is_finite() {
                return Err(EnvelopeError::NotFinite {
                    source_text: self.source.clone(),
                    at: x,
                });
            }
            if let Some(p) = prev {
                if v > p + 1e-12 * p.abs().max(f64::MIN_POSITIVE) {
                    return Err(EnvelopeError::NotMonotone {
                        source_text: self.source.clone(),
                        at: x,
                    });
                }
            }
            prev = Some(v);
        }
        Ok(())
    }

    /// Sampled check that the envelope is finite on `n >= from`.
    pub fn check_finite(&self, from: f64) -> Result<(), EnvelopeError> {
        for x in sample_points(from) {
            if !self.eval(x).is_finite() {
                return Err(EnvelopeError::NotFinite {
                    source_text: self.source.clone(),
                    at: x,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn sample_points(from: f64) -> impl Iterator<Item = f64> {
    let from = from.max(1.0);
    let ints = (0..=512).map(move |k| from + k as f64);
    let last = from + 512.0;
    let geo = (1..)
        .map(move |k| last * 1.05f64.powi(k))
        .take_while(|x| *x <= 1e15);
    ints.chain(geo)
}

const PANEL_RATIO: f64 = 1.0 + 1e-4;
const PANEL_SPAN: f64 = 1e6;

/// Upper bound on `int_from^inf f(x) dx` for a nonnegative, nonincreasing
/// `f` whose leading term decays faster than `1/x`.
///
/// Left-endpoint Riemann sums over geometric panels up to `from * 1e6`,
/// then a power-law remainder `f(X) X / (s - 1)` with `s` strictly between
/// 1 and the decay exponent. The remainder needs `x^s f(x)` nonincreasing
/// beyond `X`, which is checked on samples. Returns `None` when the decay
/// class does not admit this certificate.
pub fn upper_tail_integral(f: &Envelope, from: f64) -> Option<f64> {
    let from = from.max(1.0);
    let decay = match f.asymptotic()? {
        Asymptotic::Zero => return Some(0.0),
        Asymptotic::Term(g) => {
            if g.coef <= 0.0 {
                return None;
            }
            -g.power
        }
    };
    if decay <= 1.0 + 1e-9 {
        return None;
    }
    let s = 1.0 + (decay - 1.0).min(4.0) / 2.0;
    let end = from * PANEL_SPAN;
    let mut total = 0.0;
    let mut x = from;
    while x < end {
        let next = (x * PANEL_RATIO).min(end);
        let v = f.eval(x);
        if !(v.is_finite() && v >= 0.0) {
            return None;
        }
        total += (next - x) * v;
        x = next;
    }
    let fx = f.eval(end);
    let mut prev = fx * end.powf(s);
    let mut t = end;
    for _ in 0..160 {
        t *= 2f64.powf(0.25);
        let cur = f.eval(t) * t.powf(s);
        if !cur.is_finite() || cur > prev * (1.0 + 1e-9) {
            return None;
        }
        prev = cur;
    }
    Some(total + fx * end / (s - 1.0))
}

/// Lower bound on `int_from^inf f(x) dx` for a nonnegative, nonincreasing
/// `f`: right-endpoint Riemann sums over `[from, from * 1e6]`.
pub fn lower_tail_integral(f: &Envelope, from: f64) -> f64 {
    lower_integral_between(f, from.max(1.0), from.max(1.0) * PANEL_SPAN)
}

pub(crate) fn lower_integral_between(f: &Envelope, from: f64, to: f64) -> f64 {
    let mut total = 0.0;
    let mut x = from;
    while x < to {
        let next = (x * PANEL_RATIO).min(to);
        let v = f.eval(next);
        if v.is_finite() && v > 0.0 {
            total += (next - x) * v;
        }
        x = next;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(s: &str) -> Envelope {
        s.parse().unwrap()
    }

    #[test]
    fn parses_and_evaluates() {
        assert_eq!(env("1/n").eval(4.0), 0.25);
        assert_eq!(env("2^3^2").eval(1.0), 512.0);
        assert_eq!(env("-n^2").eval(3.0), -9.0);
        assert!((env("log(e)").eval(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(env("sqrt(n)").eval(16.0), 4.0);
        assert_eq!(env("abs(1 - n)").eval(3.0), 2.0);
        assert_eq!(env("q/n").eval_nq(2.0, 3.0), 1.5);
        assert_eq!(env("1.5e1").eval(0.0), 15.0);
    }

    #[test]
    fn parse_errors_carry_position() {
        match "1 + * n".parse::<Expr>() {
            Err(EnvelopeError::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!("foo(n)".parse::<Expr>().is_err());
        assert!("(n".parse::<Expr>().is_err());
        assert!("n n".parse::<Expr>().is_err());
        assert!("n $ 2".parse::<Expr>().is_err());
    }

    #[test]
    fn limits() {
        assert_eq!(env("1/n").limit(), Some(Limit::Zero));
        assert_eq!(env("1 - 1/n").limit(), Some(Limit::Finite(1.0)));
        assert_eq!(env("n").limit(), Some(Limit::PosInfinity));
        assert_eq!(env("log(n)/n").limit(), Some(Limit::Zero));
        assert_eq!(env("n/log(n)^3").limit(), Some(Limit::PosInfinity));
        assert_eq!(env("0").limit(), Some(Limit::Zero));
        assert_eq!(env("1/log(n)").limit(), Some(Limit::Zero));
        // leading-order cancellation is undecided
        assert_eq!(env("n - n").limit(), None);
        assert_eq!(env("2^n").limit(), None);
    }

    #[test]
    fn series_convergence() {
        let conv = |s: &str, p: f64| env(s).asymptotic().unwrap().series_converges(p);
        assert_eq!(conv("1/n", 1.0), Some(false));
        assert_eq!(conv("1/n", 2.0), Some(true));
        assert_eq!(conv("1/sqrt(n)", 2.0), Some(false));
        assert_eq!(conv("1/(n*log(n)^2)", 1.0), Some(true));
        assert_eq!(conv("1/(n*log(n))", 1.0), Some(false));
        assert_eq!(conv("1", 3.0), Some(false));
    }

    #[test]
    fn monotonicity_sampling() {
        assert!(env("1/n").check_nonincreasing(1.0).is_ok());
        assert!(env("1").check_nonincreasing(1.0).is_ok());
        assert!(env("1 - 1/n").check_nonincreasing(1.0).is_err());
        assert!(env("1/(n-3)").check_nonincreasing(1.0).is_err());
    }

    #[test]
    fn inverse_square_tail_integrals_bracket_one_over_n() {
        // int_100^inf x^-2 dx = 0.01 exactly
        let f = env("1/n^2");
        let hi = upper_tail_integral(&f, 100.0).unwrap();
        let lo = lower_tail_integral(&f, 100.0);
        assert!(lo <= 0.01 && 0.01 <= hi, "{lo} {hi}");
        assert!(hi - lo < 2e-5, "{lo} {hi}");
        // slow decay has no certificate
        assert!(upper_tail_integral(&env("1/n"), 10.0).is_none());
        assert_eq!(upper_tail_integral(&env("0"), 10.0), Some(0.0));
    }

    #[test]
    fn envelope_serde_uses_source_text() {
        let e = env("1/n^2");
        let js = serde_json::to_string(&e).unwrap();
        assert_eq!(js, "\"1/n^2\"");
        let back: Envelope = serde_json::from_str(&js).unwrap();
        assert_eq!(back, e);
    }
}
