//! A small expression language for log-densities given on the command line
//! or in target files.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x0`, `x1`, ...; `x` is shorthand for `x0`. Constants are
//! `pi`, `e` and `inf`. Functions: `exp`, `ln` (alias `log`), `log1p`,
//! `sin`, `cos`, `sqrt`, `abs` and the two-argument `logaddexp`.

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::target::{Domain, Generic, LogTarget, ScalarFn};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Exp,
    Ln,
    Ln1p,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    LogAddExp(Box<Node>, Box<Node>),
}

/// A parsed expression in the variables `x0 .. x{dims-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str, dims: usize) -> Result<Self> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, dims };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!("unexpected {:?}", p.tokens[p.pos])));
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        eval(&self.root, x)
    }
}

fn eval<S: Scalar>(n: &Node, x: &[S]) -> S {
    match n {
        Node::Num(v) => S::from_f64(*v),
        Node::Var(i) => x[*i].clone(),
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Pow(a, b) => match b.as_ref() {
            Node::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => eval(a, x).powi(*e as i32),
            Node::Num(e) => eval(a, x).powf(*e),
            _ => eval(a, x).pow(&eval(b, x)),
        },
        Node::Call(f, a) => {
            let v = eval(a, x);
            match f {
                Func::Exp => v.exp(),
                Func::Ln => v.ln(),
                Func::Ln1p => v.ln_1p(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => v.abs(),
            }
        }
        Node::LogAddExp(a, b) => eval(a, x).ln_add_exp(&eval(b, x)),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
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
            let s: String = chars[start..i].iter().collect();
            let v = s.parse().map_err(|_| Error::Expr(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Name(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
    dims: usize,
}

impl Parser {
    fn peek_op(&self, c: char) -> bool {
        self.tokens.get(self.pos) == Some(&Tok::Op(c))
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expr(format!("expected {c:?}")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.peek_op('/') {
                self.pos += 1;
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek_op('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.peek_op('^') {
            self.pos += 1;
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| Error::Expr("unexpected end".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Name(name) if self.peek_op('(') => {
                self.pos += 1;
                let a = self.expr()?;
                let node = if name == "logaddexp" {
                    self.expect(',')?;
                    let b = self.expr()?;
                    Node::LogAddExp(Box::new(a), Box::new(b))
                } else {
                    let f = match name.as_str() {
                        "exp" => Func::Exp,
                        "ln" | "log" => Func::Ln,
                        "log1p" => Func::Ln1p,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        _ => return Err(Error::Expr(format!("unknown function {name:?}"))),
                    };
                    Node::Call(f, Box::new(a))
                };
                self.expect(')')?;
                Ok(node)
            }
            Tok::Name(name) => match name.as_str() {
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                "inf" => Ok(Node::Num(f64::INFINITY)),
                "x" => self.var(0),
                _ => match name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    Some(i) => self.var(i),
                    None => Err(Error::Expr(format!("unknown name {name:?}"))),
                },
            },
            Tok::Op(c) => Err(Error::Expr(format!("unexpected {c:?}"))),
        }
    }

    fn var(&self, i: usize) -> Result<Node> {
        if i >= self.dims {
            return Err(Error::Expr(format!("x{i} out of range for {} dimensions", self.dims)));
        }
        Ok(Node::Var(i))
    }
}

impl ScalarFn for Expr {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        Expr::eval(self, x)
    }
}

/// A target file: dimension, optional bounds (`null` for infinite) and the
/// log-density expression.
///
/// ```json
/// {"dims": 1, "lower": [0.0], "upper": [null], "log_density": "-x0 - 2*log1p(x0)"}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFile {
    pub dims: usize,
    #[serde(default)]
    pub lower: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub upper: Option<Vec<Option<f64>>>,
    pub log_density: String,
}

impl TargetFile {
    pub fn domain(&self) -> Result<Domain> {
        let bound = |b: &Option<Vec<Option<f64>>>, inf: f64| -> Result<Vec<f64>> {
            match b {
                None => Ok(vec![inf; self.dims]),
                Some(v) if v.len() == self.dims => Ok(v.iter().map(|x| x.unwrap_or(inf)).collect()),
                Some(v) => Err(Error::Dimension {
                    expected: self.dims,
                    got: v.len(),
                }),
            }
        };
        Domain::new(bound(&self.lower, f64::NEG_INFINITY)?, bound(&self.upper, f64::INFINITY)?)
    }

    pub fn target(&self) -> Result<LogTarget> {
        let e = Expr::parse(&self.log_density, self.dims)?;
        Ok(LogTarget::new(Generic(e), self.domain()?))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, x.len()).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("10 - 4 - 3", &[]), 3.0);
        assert_eq!(ev("1.5e2 + 2E-1", &[]), 150.2);
    }

    #[test]
    fn functions_and_variables() {
        assert!((ev("-0.5*x^2 - log(sqrt(2*pi))", &[0.0]) + 0.918_938_533_204_672_8).abs() < 1e-15);
        assert_eq!(ev("x0 * x1 + abs(x1)", &[3.0, -2.0]), -4.0);
        assert!((ev("logaddexp(0, 0)", &[]) - 2f64.ln()).abs() < 1e-15);
        assert!((ev("exp(1) - e", &[]) + 0.0).abs() < 1e-15);
        assert!((ev("sin(pi/2) + cos(0) + log1p(0)", &[]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_through_duals() {
        let e = Expr::parse("-x0 - 3*log1p(x0) + x1^2 * sin(x0)", 2).unwrap();
        let g = e.eval(&Dual::variables(&[1.0, 2.0])).gradient(2);
        assert!((g[0] - (-1.0 - 1.5 + 4.0 * 1f64.cos())).abs() < 1e-14);
        assert!((g[1] - 4.0 * 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("x1", 1).is_err());
        assert!(Expr::parse("foo(1)", 1).is_err());
        assert!(Expr::parse("1 +", 1).is_err());
        assert!(Expr::parse("(1", 1).is_err());
        assert!(Expr::parse("1 2", 1).is_err());
        assert!(Expr::parse("1 $ 2", 1).is_err());
    }

    #[test]
    fn target_file_round_trip() {
        let json = r#"{"dims": 1, "lower": [0.0], "upper": [null], "log_density": "-x0 - 2*log1p(x0)"}"#;
        let f: TargetFile = serde_json::from_str(json).unwrap();
        let t = f.target().unwrap();
        assert_eq!(t.domain().lower(), &[0.0]);
        assert_eq!(t.domain().upper(), &[f64::INFINITY]);
        assert!((t.log_density(&[1.0]).unwrap() + 1.0 + 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.log_density(&[-1.0]).unwrap(), f64::NEG_INFINITY);
        let g = t.grad_log_density(&[1.0]).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-15);
    }
}
