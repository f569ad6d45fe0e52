//! Closed-form data functions `f(x, y)` for problem right-hand sides.
//!
//! A data function is either a constant or an arithmetic expression over the
//! coordinates `x`, `y` and the radius `r = sqrt(x^2 + y^2)`, e.g.
//! `1 + 0.5*cos(pi*r)` or `max(0, 1 - 4*r^2)`. Supported operators are
//! `+ - * / ^`, functions `sin cos tan exp ln sqrt abs min max`, and the
//! constants `pi` and `e`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    R,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

impl Node {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Y => y,
            Node::R => x.hypot(y),
            Node::Neg(a) => -a.eval(x, y),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
            Node::Call(f, args) => {
                let a = args[0].eval(x, y);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(x, y)),
                    Func::Max => a.max(args[1].eval(x, y)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
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
            // exponent part, e.g. 1e-3
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
                .map_err(|_| Error::Input(format!("bad number `{text}` in `{src}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Token::Sym(c));
            i += 1;
        } else {
            return Err(Error::Input(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Input(format!("{msg} in expression `{}`", self.src))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            // right associative, binds tighter than unary minus on the left
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => return Ok(Node::X),
                    "y" => return Ok(Node::Y),
                    "r" => return Ok(Node::R),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    _ => {}
                }
                let (func, arity) =
                    Func::lookup(&name).ok_or_else(|| self.err(&format!("unknown name `{name}`")))?;
                if !self.eat('(') {
                    return Err(self.err(&format!("`{name}` must be called")));
                }
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                if !self.eat(')') {
                    return Err(self.err("missing `)`"));
                }
                if args.len() != arity {
                    return Err(self.err(&format!("`{name}` takes {arity} argument(s)")));
                }
                Ok(Node::Call(func, args))
            }
            Some(Token::Sym('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("missing `)`"));
                }
                Ok(inner)
            }
            _ => Err(self.err("unexpected end or symbol")),
        }
    }
}

/// A scalar data function on the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum DataFn {
    Constant(f64),
    Expr { source: String, root: ExprRoot },
}

/// Opaque parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprRoot(Node);

impl DataFn {
    pub fn constant(c: f64) -> Self {
        DataFn::Constant(c)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            DataFn::Constant(c) => *c,
            DataFn::Expr { root, .. } => root.0.eval(x, y),
        }
    }

    /// True only for the literal constant zero; expressions are checked at
    /// quadrature nodes by the caller.
    pub fn is_identically_zero(&self) -> bool {
        matches!(self, DataFn::Constant(c) if *c == 0.0)
    }

    /// `t · f`.
    pub fn scaled(&self, t: f64) -> DataFn {
        match self {
            DataFn::Constant(c) => DataFn::Constant(t * c),
            DataFn::Expr { source, root } => DataFn::Expr {
                source: format!("{t}*({source})"),
                root: ExprRoot(Node::Bin(
                    Op::Mul,
                    Box::new(Node::Num(t)),
                    Box::new(root.0.clone()),
                )),
            },
        }
    }
}

impl FromStr for DataFn {
    type Err = Error;

    fn from_str(src: &str) -> Result<Self> {
        let trimmed = src.trim();
        if let Ok(c) = trimmed.parse::<f64>() {
            return Ok(DataFn::Constant(c));
        }
        let tokens = tokenize(trimmed)?;
        if tokens.is_empty() {
            return Err(Error::Input("empty data expression".into()));
        }
        let mut parser = Parser {
            tokens,
            pos: 0,
            src: trimmed,
        };
        let node = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(parser.err("trailing input"));
        }
        Ok(DataFn::Expr {
            source: trimmed.to_string(),
            root: ExprRoot(node),
        })
    }
}

impl fmt::Display for DataFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataFn::Constant(c) => write!(f, "{c}"),
            DataFn::Expr { source, .. } => f.write_str(source),
        }
    }
}

impl Serialize for DataFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DataFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, y: f64) -> f64 {
        src.parse::<DataFn>().unwrap().eval(x, y)
    }

    #[test]
    fn constants_and_arithmetic() {
        assert_eq!("2.5".parse::<DataFn>().unwrap(), DataFn::Constant(2.5));
        assert_eq!(ev("1 + 2*3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2)*3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("1e-3*1000", 0.0, 0.0), 1.0);
        assert_eq!(ev("x - y/2", 3.0, 4.0), 1.0);
        assert_eq!(ev("r", 3.0, 4.0), 5.0);
    }

    #[test]
    fn functions() {
        assert!((ev("sin(pi/2)", 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(ev("max(0, 1 - 4*r^2)", 1.0, 0.0), 0.0);
        assert_eq!(ev("min(x, y)", 1.0, 2.0), 1.0);
        assert!((ev("ln(e)", 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        for bad in ["", "1 +", "foo(1)", "sin 1", "max(1)", "(1", "1 $ 2", "x y"] {
            assert!(bad.parse::<DataFn>().is_err(), "{bad}");
        }
    }

    #[test]
    fn scaling_and_display() {
        let f: DataFn = "1 + x".parse().unwrap();
        assert_eq!(f.scaled(2.0).eval(1.0, 0.0), 4.0);
        assert_eq!(f.to_string(), "1 + x");
        assert!(DataFn::Constant(0.0).is_identically_zero());
        assert!(!f.is_identically_zero());
    }
}
