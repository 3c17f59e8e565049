//! Closed-form expressions in the variables `x` and `y`.
//!
//! Coefficients, right-hand sides and boundary data enter the library as
//! expression strings rather than tabulated values, so that gradients and
//! Laplacians of the coefficients can be produced *exactly* by symbolic
//! differentiation instead of finite differences. The grammar is deliberately
//! small: literals, `x`, `y`, the operators `+ - * / ^`, and the functions
//! `sin`, `cos`, `exp`, `abs`, `min`, `max`.
//!
//! Precedence is `^` > unary minus > `* /` > `+ -`, with `^` right
//! associative, so `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.
//!
//! `abs`, `min` and `max` (and fractional exponents on bases that the caller
//! certifies nonnegative) are allowed for evaluation only; differentiating
//! through them is an error. Values are immutable after parsing and safe to
//! evaluate from many threads.

use std::fmt;
use thiserror::Error;

/// One of the two spatial variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

/// Unary functions of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Exp,
    Abs,
}

impl Func1 {
    fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Exp => "exp",
            Func1::Abs => "abs",
        }
    }
}

/// Binary functions of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Min,
    Max,
}

impl Func2 {
    fn name(self) -> &'static str {
        match self {
            Func2::Min => "min",
            Func2::Max => "max",
        }
    }
}

/// Abstract syntax tree of a parsed expression.
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
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero at ({x}, {y})")]
    DivisionByZero { x: f64, y: f64 },
    #[error("invalid power {base}^{exponent} at ({x}, {y})")]
    InvalidPower { base: f64, exponent: f64, x: f64, y: f64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffError {
    #[error("not differentiable: {0}")]
    NonDifferentiable(String),
}

impl Expr {
    /// Parses `text` into an AST. Whitespace is ignored; constant
    /// sub-expressions are folded when the operation is defined and finite.
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        Parser::new(text).parse()
    }

    /// Evaluates at the point `(x, y)`. One-dimensional callers pass `y = 0`.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(Var::X) => Ok(x),
            Expr::Var(Var::Y) => Ok(y),
            Expr::Neg(e) => Ok(-e.evaluate(x, y)?),
            Expr::Add(a, b) => Ok(a.evaluate(x, y)? + b.evaluate(x, y)?),
            Expr::Sub(a, b) => Ok(a.evaluate(x, y)? - b.evaluate(x, y)?),
            Expr::Mul(a, b) => Ok(a.evaluate(x, y)? * b.evaluate(x, y)?),
            Expr::Div(a, b) => {
                let den = b.evaluate(x, y)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero { x, y });
                }
                Ok(a.evaluate(x, y)? / den)
            }
            Expr::Pow(a, b) => {
                let base = a.evaluate(x, y)?;
                let expo = b.evaluate(x, y)?;
                eval_pow(base, expo, x, y)
            }
            Expr::Call1(f, a) => {
                let v = a.evaluate(x, y)?;
                Ok(match f {
                    Func1::Sin => v.sin(),
                    Func1::Cos => v.cos(),
                    Func1::Exp => v.exp(),
                    Func1::Abs => v.abs(),
                })
            }
            Expr::Call2(f, a, b) => {
                let u = a.evaluate(x, y)?;
                let v = b.evaluate(x, y)?;
                Ok(match f {
                    Func2::Min => u.min(v),
                    Func2::Max => u.max(v),
                })
            }
        }
    }

    /// Exact derivative with respect to `var`.
    ///
    /// The result is built with simplifying constructors (zero terms dropped,
    /// constants folded), so polynomial derivatives stay polynomial. `abs`,
    /// `min`, `max` and variable exponents are rejected.
    pub fn differentiate(&self, var: Var) -> Result<Expr, DiffError> {
        Ok(match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.differentiate(var)?),
            Expr::Add(a, b) => add(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Sub(a, b) => sub(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Mul(a, b) => {
                let da = a.differentiate(var)?;
                let db = b.differentiate(var)?;
                add(mul(da, (**b).clone()), mul((**a).clone(), db))
            }
            Expr::Div(a, b) => {
                let da = a.differentiate(var)?;
                let db = b.differentiate(var)?;
                let num = sub(mul(da, (**b).clone()), mul((**a).clone(), db));
                div(num, pow((**b).clone(), Expr::Const(2.0)))
            }
            Expr::Pow(base, expo) => {
                let c = match **expo {
                    Expr::Const(c) => c,
                    _ => {
                        return Err(DiffError::NonDifferentiable(
                            "power with non-constant exponent".into(),
                        ))
                    }
                };
                let dbase = base.differentiate(var)?;
                mul(
                    mul(Expr::Const(c), pow((**base).clone(), Expr::Const(c - 1.0))),
                    dbase,
                )
            }
            Expr::Call1(f, a) => {
                let da = a.differentiate(var)?;
                match f {
                    Func1::Sin => mul(Expr::Call1(Func1::Cos, a.clone()), da),
                    Func1::Cos => neg(mul(Expr::Call1(Func1::Sin, a.clone()), da)),
                    Func1::Exp => mul(Expr::Call1(Func1::Exp, a.clone()), da),
                    Func1::Abs => {
                        return Err(DiffError::NonDifferentiable("abs".into()));
                    }
                }
            }
            Expr::Call2(f, _, _) => {
                return Err(DiffError::NonDifferentiable(f.name().into()));
            }
        })
    }

    /// Convenience: second derivative.
    pub fn differentiate2(&self, first: Var, second: Var) -> Result<Expr, DiffError> {
        self.differentiate(first)?.differentiate(second)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn eval_pow(base: f64, expo: f64, x: f64, y: f64) -> Result<f64, EvalError> {
    let invalid = || EvalError::InvalidPower { base, exponent: expo, x, y };
    if expo.fract() == 0.0 && expo.abs() <= i32::MAX as f64 {
        if base == 0.0 && expo < 0.0 {
            return Err(invalid());
        }
        return Ok(base.powi(expo as i32));
    }
    // Fractional exponent: defined for positive bases only. 0^p with p > 0 is 0.
    if base > 0.0 {
        Ok(base.powf(expo))
    } else if base == 0.0 && expo > 0.0 {
        Ok(0.0)
    } else {
        Err(invalid())
    }
}

// Simplifying constructors. The parser folds fully-constant operations when
// they are defined and finite; `differentiate` additionally drops neutral
// elements so derivative trees stay small.

fn fold2(a: &Expr, b: &Expr, op: impl Fn(f64, f64) -> f64) -> Option<Expr> {
    if let (Expr::Const(x), Expr::Const(y)) = (a, b) {
        let v = op(*x, *y);
        if v.is_finite() {
            return Some(Expr::Const(v));
        }
    }
    None
}

pub(crate) fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        e => Expr::Neg(Box::new(e)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold2(&a, &b, |x, y| x + y) {
        return c;
    }
    match (a, b) {
        (Expr::Const(z), e) if z == 0.0 => e,
        (e, Expr::Const(z)) if z == 0.0 => e,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold2(&a, &b, |x, y| x - y) {
        return c;
    }
    match (a, b) {
        (e, Expr::Const(z)) if z == 0.0 => e,
        (Expr::Const(z), e) if z == 0.0 => neg(e),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if let Some(c) = fold2(&a, &b, |x, y| x * y) {
        return c;
    }
    match (a, b) {
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
        (Expr::Const(o), e) if o == 1.0 => e,
        (e, Expr::Const(o)) if o == 1.0 => e,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if let Expr::Const(z) = b {
        if z != 0.0 {
            if let Expr::Const(x) = a {
                let v = x / z;
                if v.is_finite() {
                    return Expr::Const(v);
                }
            }
            if z == 1.0 {
                return a;
            }
        }
    }
    Expr::Div(Box::new(a), Box::new(b))
}

pub(crate) fn pow(a: Expr, b: Expr) -> Expr {
    if let Expr::Const(c) = b {
        if c == 1.0 {
            return a;
        }
        if c == 0.0 {
            return Expr::Const(1.0);
        }
        if let Expr::Const(x) = a {
            if let Ok(v) = eval_pow(x, c, 0.0, 0.0) {
                if v.is_finite() {
                    return Expr::Const(v);
                }
            }
        }
    }
    Expr::Pow(Box::new(a), Box::new(b))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Parenthesization keeps the printed form reparsable to a structurally
        // equal tree: left operands need parens below the node's precedence,
        // right operands at or below it (the chain operators associate left).
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, need: bool) -> fmt::Result {
            if need {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, e.precedence() < 3)
            }
            Expr::Add(a, b) => {
                wrap(f, a, a.precedence() < 1)?;
                write!(f, " + ")?;
                wrap(f, b, b.precedence() <= 1)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, a.precedence() < 1)?;
                write!(f, " - ")?;
                wrap(f, b, b.precedence() <= 1)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, a.precedence() < 2)?;
                write!(f, " * ")?;
                wrap(f, b, b.precedence() <= 2)
            }
            Expr::Div(a, b) => {
                wrap(f, a, a.precedence() < 2)?;
                write!(f, " / ")?;
                wrap(f, b, b.precedence() <= 2)
            }
            Expr::Pow(a, b) => {
                wrap(f, a, a.precedence() <= 4)?;
                write!(f, "^")?;
                wrap(f, b, b.precedence() < 3)
            }
            Expr::Call1(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Call2(func, a, b) => write!(f, "{}({a}, {b})", func.name()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, tokens: Vec::new(), pos: 0 }
    }

    fn parse(mut self) -> Result<Expr, ParseError> {
        self.lex()?;
        let e = self.expr()?;
        if let Some((_, off)) = self.tokens.get(self.pos) {
            return Err(ParseError::Syntax {
                offset: *off,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(e)
    }

    fn lex(&mut self) -> Result<(), ParseError> {
        let bytes = self.text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => i += 1,
                b'+' => { self.tokens.push((Token::Plus, i)); i += 1 }
                b'-' => { self.tokens.push((Token::Minus, i)); i += 1 }
                b'*' => { self.tokens.push((Token::Star, i)); i += 1 }
                b'/' => { self.tokens.push((Token::Slash, i)); i += 1 }
                b'^' => { self.tokens.push((Token::Caret, i)); i += 1 }
                b'(' => { self.tokens.push((Token::LParen, i)); i += 1 }
                b')' => { self.tokens.push((Token::RParen, i)); i += 1 }
                b',' => { self.tokens.push((Token::Comma, i)); i += 1 }
                b'0'..=b'9' | b'.' => {
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
                            i = j;
                            while i < bytes.len() && bytes[i].is_ascii_digit() {
                                i += 1;
                            }
                        }
                    }
                    let lit = &self.text[start..i];
                    let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                        offset: start,
                        message: format!("bad numeric literal `{lit}`"),
                    })?;
                    self.tokens.push((Token::Num(v), start));
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let start = i;
                    while i < bytes.len()
                        && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    self.tokens.push((Token::Ident(self.text[start..i].to_string()), start));
                }
                _ => {
                    return Err(ParseError::Syntax {
                        offset: i,
                        message: format!("unexpected character `{}`", self.text[i..].chars().next().unwrap()),
                    })
                }
            }
        }
        Ok(())
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_offset(&self) -> usize {
        self.text.len()
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some((t, _)) if t == want => Ok(()),
            Some((_, off)) => Err(ParseError::Syntax { offset: off, message: format!("expected {what}") }),
            None => Err(ParseError::Syntax {
                offset: self.end_offset(),
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = add(lhs, rhs);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = mul(lhs, rhs);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(neg(e));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            // The exponent re-enters at unary level so `x^-2` parses, while
            // `-x^2` still binds as `-(x^2)`.
            let expo = self.unary()?;
            return Ok(pow(base, expo));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Some((Token::Num(v), _)) => Ok(Expr::Const(v)),
            Some((Token::LParen, _)) => {
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Some((Token::Ident(name), off)) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "sin" | "cos" | "exp" | "abs" => {
                    self.expect(Token::LParen, "`(`")?;
                    let a = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    let f = match name.as_str() {
                        "sin" => Func1::Sin,
                        "cos" => Func1::Cos,
                        "exp" => Func1::Exp,
                        _ => Func1::Abs,
                    };
                    Ok(Expr::Call1(f, Box::new(a)))
                }
                "min" | "max" => {
                    self.expect(Token::LParen, "`(`")?;
                    let a = self.expr()?;
                    self.expect(Token::Comma, "`,`")?;
                    let b = self.expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    let f = if name == "min" { Func2::Min } else { Func2::Max };
                    Ok(Expr::Call2(f, Box::new(a), Box::new(b)))
                }
                _ => Err(ParseError::UnknownIdentifier { name, offset: off }),
            },
            Some((_, off)) => Err(ParseError::Syntax {
                offset: off,
                message: "expected a number, variable, function or `(`".into(),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end_offset(),
                message: "unexpected end of input".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval(text: &str, x: f64, y: f64) -> f64 {
        Expr::parse(text).unwrap().evaluate(x, y).unwrap()
    }

    #[test]
    fn literal_parses_to_constant() {
        assert_eq!(Expr::parse("2").unwrap(), Expr::Const(2.0));
    }

    #[test]
    fn saddle_evaluates() {
        assert_eq!(eval("x^2 - y^2", 3.0, 1.0), 8.0);
    }

    #[test]
    fn malformed_input_reports_offset() {
        match Expr::parse("sin(") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_rejected() {
        match Expr::parse("2*z + 1") {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "z");
                assert_eq!(offset, 2);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(eval("2+3*4", 0.0, 0.0), 14.0);
        assert_eq!(eval("-x^2", 2.0, 0.0), -4.0);
        assert_eq!(eval("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(eval("x^-2", 2.0, 0.0), 0.25);
    }

    #[test]
    fn evaluate_basics() {
        assert_relative_eq!(eval("1 + 0.5*x", 0.2, 0.0), 1.1);
        assert_eq!(eval("exp(0)", 0.0, 0.0), 1.0);
        assert_eq!(eval("min(2, x)", 5.0, 0.0), 2.0);
        assert_eq!(eval("abs(0-x)", 3.0, 0.0), 3.0);
    }

    #[test]
    fn division_by_zero_errors() {
        let e = Expr::parse("1/x").unwrap();
        assert!(matches!(e.evaluate(0.0, 0.0), Err(EvalError::DivisionByZero { .. })));
        assert_eq!(e.evaluate(2.0, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn zero_to_negative_power_errors() {
        let e = Expr::parse("x^-1").unwrap();
        assert!(matches!(e.evaluate(0.0, 0.0), Err(EvalError::InvalidPower { .. })));
    }

    #[test]
    fn fractional_power_of_negative_base_errors() {
        let e = Expr::parse("x^0.5").unwrap();
        assert!(e.evaluate(-1.0, 0.0).is_err());
        assert_relative_eq!(e.evaluate(4.0, 0.0).unwrap(), 2.0);
        assert_eq!(e.evaluate(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_of_saddle() {
        let e = Expr::parse("x^2 - y^2").unwrap();
        let dx = e.differentiate(Var::X).unwrap();
        assert_eq!(dx.evaluate(1.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn derivative_of_product() {
        let e = Expr::parse("x*y").unwrap();
        let dy = e.differentiate(Var::Y).unwrap();
        assert_eq!(dy.evaluate(2.0, 3.0).unwrap(), 2.0);
    }

    #[test]
    fn abs_not_differentiable() {
        let e = Expr::parse("abs(x)").unwrap();
        assert!(matches!(e.differentiate(Var::X), Err(DiffError::NonDifferentiable(_))));
    }

    #[test]
    fn quotient_rule() {
        let e = Expr::parse("1/(1+x)").unwrap();
        let dx = e.differentiate(Var::X).unwrap();
        assert_relative_eq!(dx.evaluate(1.0, 0.0).unwrap(), -0.25);
    }

    #[test]
    fn chain_rule_through_functions() {
        let e = Expr::parse("sin(x^2)").unwrap();
        let dx = e.differentiate(Var::X).unwrap();
        let x = 0.7;
        assert_relative_eq!(dx.evaluate(x, 0.0).unwrap(), 2.0 * x * (x * x).cos(), epsilon = 1e-14);
    }

    #[test]
    fn fractional_exponent_differentiates() {
        let e = Expr::parse("((x+1.2)^2)^0.25").unwrap();
        let dx = e.differentiate(Var::X).unwrap();
        // d/dx (x+1.2)^(1/2) = (1/2)(x+1.2)^(-1/2)
        let x = 0.3;
        assert_relative_eq!(
            dx.evaluate(x, 0.0).unwrap(),
            0.5 * (x + 1.2f64).powf(-0.5),
            epsilon = 1e-12
        );
    }

    #[test]
    fn roundtrip_examples() {
        for text in [
            "x^2 - y^2",
            "-x^2",
            "1 + 0.25*abs(x)^0.5",
            "min(x, max(y, 0.5))",
            "(x + y)*(x - y)/(1 + x^2)",
            "2*x^-3",
            "-(x + y)",
            "1.5+0.25*((x+1.2)^2)^0.25",
            "exp(-x)*sin(3*y)",
        ] {
            let e = Expr::parse(text).unwrap();
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed).unwrap_or_else(|err| {
                panic!("failed to reparse `{printed}` from `{text}`: {err}")
            });
            assert_eq!(reparsed, e, "round trip of `{text}` via `{printed}`");
        }
    }

    proptest::proptest! {
        // Derivative oracle: centered finite differences on random polynomials
        // of degree <= 6 agree with the symbolic derivative to 1e-6 relative
        // error at step 1e-5.
        #[test]
        fn derivative_matches_finite_difference(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 1..7),
            pts in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 100),
        ) {
            // Build sum_k c_k x^k y^(deg-k) style polynomial from the coeffs.
            let mut text = String::from("0");
            for (k, c) in coeffs.iter().enumerate() {
                text.push_str(&format!(" + {c}*x^{k}*y^{}", coeffs.len() - 1 - k));
            }
            let e = Expr::parse(&text).unwrap();
            let dx = e.differentiate(Var::X).unwrap();
            let h = 1e-5;
            for (x, y) in pts {
                let exact = dx.evaluate(x, y).unwrap();
                let fd = (e.evaluate(x + h, y).unwrap() - e.evaluate(x - h, y).unwrap()) / (2.0 * h);
                let scale = exact.abs().max(1.0);
                proptest::prop_assert!((exact - fd).abs() <= 1e-6 * scale,
                    "exact {exact} vs fd {fd} at ({x},{y})");
            }
        }

        #[test]
        fn pretty_print_roundtrips(seed_expr in arb_expr(4)) {
            let printed = seed_expr.to_string();
            let reparsed = Expr::parse(&printed).unwrap();
            proptest::prop_assert_eq!(reparsed, seed_expr);
        }
    }

    // Random ASTs built through the same simplifying constructors the parser
    // uses, so they are in canonical (reparsable) form.
    fn arb_expr(depth: u32) -> impl proptest::strategy::Strategy<Value = Expr> {
        use proptest::prelude::*;
        let leaf = prop_oneof![
            (-4.0f64..4.0).prop_map(Expr::Const),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
        ];
        leaf.prop_recursive(depth, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| div(a, b)),
                (inner.clone(), 1u32..4).prop_map(|(a, k)| pow(a, Expr::Const(k as f64))),
                inner.clone().prop_map(neg),
                inner.clone().prop_map(|a| Expr::Call1(Func1::Sin, Box::new(a))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call2(Func2::Max, Box::new(a), Box::new(b))),
            ]
        })
    }
}
