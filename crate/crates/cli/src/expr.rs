//! A small arithmetic grammar for metric components given in configuration files.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the coordinates `x1 .. xn`, the constant `pi`, and any named
//! parameter supplied at compile time. Functions: `sin cos exp sqrt`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Compiled expression tree; coordinates are 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parses `source` for a chart of dimension `dim`.
    pub fn parse(source: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<Self, CliError> {
        let tokens = tokenize(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            dim,
            params,
            source,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Coord(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let e = b.eval(x);
                // integer powers keep negative bases finite
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    a.eval(x).powi(e as i32)
                } else {
                    a.eval(x).powf(e)
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) if *v < 0.0 => write!(f, "({v})"),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Coord(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", format!("{func:?}").to_lowercase()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Token>, CliError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent, only when followed by digits
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number '{text}' in expression '{s}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(CliError::Usage(format!("unexpected character '{c}' in expression '{s}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    params: &'a BTreeMap<String, f64>,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> CliError {
        CliError::Usage(format!("{msg} at token {} in expression '{}'", self.pos, self.source))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<(), CliError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{op}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, CliError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, CliError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            // right associative; -x^2 parses as -(x^2) via `unary`
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, CliError> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                if let Some(v) = self.params.get(&name) {
                    return Ok(Expr::Const(*v));
                }
                if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                    if (1..=self.dim).contains(&k) {
                        return Ok(Expr::Coord(k - 1));
                    }
                    return Err(self.error(&format!("coordinate x{k} outside dimension {}", self.dim)));
                }
                Err(self.error(&format!("unknown identifier '{name}'")))
            }
            _ => Err(self.error("expected a number, identifier or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s, x.len(), &BTreeMap::new()).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[0.0]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[0.0]), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[0.0]), 512.0);
        assert_eq!(eval("-2 ^ 2", &[0.0]), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0]), 1.0);
        assert_eq!(eval("1 - 2 - 3", &[0.0]), -4.0);
        assert_eq!(eval("2 * -3", &[0.0]), -6.0);
    }

    #[test]
    fn coordinates_functions_and_constants() {
        let x = [0.3, -0.7];
        assert_eq!(eval("x1 * x2", &x), 0.3 * -0.7);
        assert!((eval("sin(x1)^2 + cos(x1)^2", &x) - 1.0).abs() < 1e-15);
        assert_eq!(eval("exp(0) + sqrt(4)", &x), 3.0);
        assert_eq!(eval("pi", &x), std::f64::consts::PI);
        assert_eq!(eval("1.5e-1 + 2E1", &x), 20.15);
        assert_eq!(eval("(-0.5)^2", &x), 0.25);
        assert_eq!(eval("4 / (1 + x1^2 + x2^2)^2", &x), 4.0 / (1.0f64 + 0.09 + 0.49).powi(2));
    }

    #[test]
    fn parameters_resolve() {
        let mut p = BTreeMap::new();
        p.insert("c".to_string(), 0.4);
        let e = Expr::parse("-c/2 * x2", 2, &p).unwrap();
        assert!((e.eval(&[0.0, 1.0]) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_input() {
        let p = BTreeMap::new();
        for bad in ["", "1 +", "x3", "x0", "foo", "sin 1", "(1", "1)", "2 $ 3", "tan(1)"] {
            assert!(Expr::parse(bad, 2, &p).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        let p = BTreeMap::new();
        let e = Expr::parse("-x1^2 + sqrt(x2) / 3 - cos(2*x1)", 2, &p).unwrap();
        let again = Expr::parse(&e.to_string(), 2, &p).unwrap();
        for x in [[0.1, 0.4], [1.0, 2.0]] {
            assert_eq!(e.eval(&x), again.eval(&x));
        }
    }
}
