//! Tiny arithmetic expression grammar for config-defined fields.
//!
//! Supported: `+ - * / ^`, unary minus, parentheses, the functions
//! `sin cos exp abs`, numeric literals, and the variables `x`, `y`
//! (spatial point) and `xi` (kernel argument). `^` is right-associative
//! and binds tighter than `*`/`/`.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Num(f64),
    X,
    Y,
    Xi,
    Sin,
    Cos,
    Exp,
    Abs,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] == b'+'
                            || bytes[i + 1] == b'-')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal `{text}`")))?;
                out.push(Token::Num(value));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                let word = &src[start..i];
                out.push(match word {
                    "x" => Token::X,
                    "y" => Token::Y,
                    "xi" => Token::Xi,
                    "sin" => Token::Sin,
                    "cos" => Token::Cos,
                    "exp" => Token::Exp,
                    "abs" => Token::Abs,
                    other => return Err(Error::Expr(format!("unknown identifier `{other}`"))),
                });
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    X,
    Y,
    Xi,
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, token: Token) -> Result<()> {
        match self.bump() {
            Some(t) if t == token => Ok(()),
            other => Err(Error::Expr(format!("expected {token:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            match t {
                Token::Plus => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        while let Some(t) = self.peek() {
            match t {
                Token::Star => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek() == Some(Token::Minus) {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(Token::Caret) {
            self.bump();
            // right-associative; allow a unary minus in the exponent
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Node::Const(v)),
            Some(Token::X) => Ok(Node::X),
            Some(Token::Y) => Ok(Node::Y),
            Some(Token::Xi) => Ok(Node::Xi),
            Some(tok @ (Token::Sin | Token::Cos | Token::Exp | Token::Abs)) => {
                let func = match tok {
                    Token::Sin => Func::Sin,
                    Token::Cos => Func::Cos,
                    Token::Exp => Func::Exp,
                    _ => Func::Abs,
                };
                self.expect(Token::LParen)?;
                let arg = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

fn eval(node: &Node, x: f64, y: f64, xi: f64) -> f64 {
    match node {
        Node::Const(v) => *v,
        Node::X => x,
        Node::Y => y,
        Node::Xi => xi,
        Node::Neg(a) => -eval(a, x, y, xi),
        Node::Call(f, a) => {
            let v = eval(a, x, y, xi);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Abs => v.abs(),
            }
        }
        Node::Add(a, b) => eval(a, x, y, xi) + eval(b, x, y, xi),
        Node::Sub(a, b) => eval(a, x, y, xi) - eval(b, x, y, xi),
        Node::Mul(a, b) => eval(a, x, y, xi) * eval(b, x, y, xi),
        Node::Div(a, b) => eval(a, x, y, xi) / eval(b, x, y, xi),
        Node::Pow(a, b) => eval(a, x, y, xi).powf(eval(b, x, y, xi)),
    }
}

/// A parsed expression over `(x, y, xi)`.
#[derive(Clone)]
pub struct Expression {
    root: Arc<Node>,
    source: String,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::Expr("empty expression".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "trailing tokens after position {} in `{src}`",
                parser.pos
            )));
        }
        Ok(Self {
            root: Arc::new(root),
            source: src.to_string(),
        })
    }

    pub fn eval(&self, x: f64, y: f64, xi: f64) -> f64 {
        eval(&self.root, x, y, xi)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({})", self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, y: f64, xi: f64) -> f64 {
        Expression::parse(src).unwrap().eval(x, y, xi)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("2 + 3 * 4", 0.0, 0.0, 0.0), 14.0);
        assert_eq!(ev("(2 + 3) * 4", 0.0, 0.0, 0.0), 20.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0, 0.0), 512.0); // right-assoc
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("2 * x ^ 2", 3.0, 0.0, 0.0), 18.0);
    }

    #[test]
    fn variables_and_functions() {
        assert!(
            (ev("sin(x) + cos(y)", 0.5, 0.25, 0.0) - (0.5f64.sin() + 0.25f64.cos())).abs() < 1e-15
        );
        assert_eq!(ev("abs(0 - xi)", 0.0, 0.0, 2.5), 2.5);
        assert!((ev("exp(1)", 0.0, 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(ev("1e-3 + 2E2", 0.0, 0.0, 0.0), 200.001);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expression::parse("").is_err());
        assert!(Expression::parse("2 +").is_err());
        assert!(Expression::parse("foo(x)").is_err());
        assert!(Expression::parse("sin x").is_err());
        assert!(Expression::parse("(1 + 2").is_err());
        assert!(Expression::parse("1 2").is_err());
    }
}
