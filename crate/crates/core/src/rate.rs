//! Tiny expression language for rate sequences a_n.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | "n" | "pi" | "e" | call | "(" expr ")" ;
//! call    = ident "(" expr { "," expr } ")" ;
//! ident   = "sqrt" | "log" | "exp" | "pow" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::RateError;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    N,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sqrt,
    Log,
    Exp,
    Pow,
}

impl Func {
    fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }
}

/// A parsed rate expression; serializes as its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct RateExpr {
    source: String,
    root: Node,
}

impl RateExpr {
    pub fn parse(src: &str) -> Result<Self, RateError> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self { source: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, n: f64) -> f64 {
        eval(&self.root, n)
    }
}

fn eval(node: &Node, n: f64) -> f64 {
    match node {
        Node::Num(x) => *x,
        Node::N => n,
        Node::Neg(a) => -eval(a, n),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, n), eval(b, n));
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                '/' => x / y,
                _ => x.powf(y),
            }
        }
        Node::Call(f, args) => {
            let x = eval(&args[0], n);
            match f {
                Func::Sqrt => x.sqrt(),
                Func::Log => x.ln(),
                Func::Exp => x.exp(),
                Func::Pow => x.powf(eval(&args[1], n)),
            }
        }
    }
}

impl fmt::Display for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for RateExpr {
    type Err = RateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for RateExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for RateExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> RateError {
        RateError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, RateError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(c @ (b'+' | b'-')) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, RateError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(c @ (b'*' | b'/')) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, RateError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, RateError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, RateError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let id = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
                let func = match id {
                    "n" => return Ok(Node::N),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    "sqrt" => Func::Sqrt,
                    "log" => Func::Log,
                    "exp" => Func::Exp,
                    "pow" => Func::Pow,
                    _ => {
                        self.pos = start;
                        return Err(self.err(&format!("unknown identifier '{id}'")));
                    }
                };
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                if args.len() != func.arity() {
                    return Err(self.err(&format!("'{id}' takes {} argument(s)", func.arity())));
                }
                Ok(Node::Call(func, args))
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, RateError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.s.len() && p.s[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.s.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.s.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.s.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let before = self.pos;
            digits(self);
            if self.pos == before {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.err("malformed number")
        })
    }
}
