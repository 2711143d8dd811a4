//! Scalar expressions for user-defined tensor fields.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers resolve at evaluation time against coordinate and parameter
//! bindings; the callable functions are `sin cos tan exp sqrt`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hyperdual::HyperDual;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Tan,
    Exp,
    Sqrt,
}

impl Function {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "exp" => Self::Exp,
            "sqrt" => Self::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Exp => "exp",
            Self::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Number(f64),
    Ident(String),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Function, Box<Node>),
}

/// A syntax-tree node with the byte offset of the token that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Plain evaluation without derivatives.
    pub fn eval(&self, bindings: &Bindings) -> Result<f64> {
        let ctx = Ctx {
            bindings,
            n: 0,
            values_only: true,
        };
        Ok(ctx.eval(&self.root)?.value())
    }

    /// Value, gradient and Hessian with respect to the bound variables.
    pub fn eval_with_partials(&self, bindings: &Bindings) -> Result<Partials> {
        let n = bindings.variables.len();
        let ctx = Ctx {
            bindings,
            n,
            values_only: false,
        };
        let r = ctx.eval(&self.root)?;
        Ok(Partials {
            value: r.value(),
            gradient: r.gradient(),
            hessian: r.hessian(),
        })
    }

    /// Every identifier referenced outside a call position.
    pub fn identifiers(&self) -> Vec<String> {
        fn walk(node: &Node, out: &mut Vec<String>) {
            match &node.kind {
                NodeKind::Number(_) => {}
                NodeKind::Ident(name) => {
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
                NodeKind::Neg(a) | NodeKind::Call(_, a) => walk(a, out),
                NodeKind::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Names visible to an expression: differentiable variables (in order) and
/// constant parameters.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    variables: Vec<(String, f64)>,
    params: BTreeMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variables(names: &[String], values: &[f64]) -> Self {
        assert_eq!(names.len(), values.len());
        Self {
            variables: names.iter().cloned().zip(values.iter().copied()).collect(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_variable(mut self, name: &str, value: f64) -> Self {
        self.variables.push((name.to_string(), value));
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_params(mut self, params: &BTreeMap<String, f64>) -> Self {
        self.params
            .extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.variables.iter().any(|(n, _)| n == name) || self.params.contains_key(name)
    }
}

pub fn parse_expression(text: &str) -> Result<Expression> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        len: text.len(),
    };
    let root = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(Error::Syntax {
            offset: t.offset,
            message: format!("unexpected {}", t.tok),
        });
    }
    Ok(Expression {
        source: text.to_string(),
        root,
    })
}

pub fn eval_with_partials(expr: &Expression, bindings: &Bindings) -> Result<Partials> {
    expr.eval_with_partials(bindings)
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
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
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
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{lexeme}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(Error::Syntax {
                offset: start,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().is_some_and(|t| &t.tok == tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.len, |t| t.offset)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().map(|t| &t.tok) {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            let offset = self.next().map_or(self.len, |t| t.offset);
            let rhs = self.term()?;
            lhs = Node {
                kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().map(|t| &t.tok) {
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            let offset = self.next().map_or(self.len, |t| t.offset);
            let rhs = self.factor()?;
            lhs = Node {
                kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn factor(&mut self) -> Result<Node> {
        let offset = self.here();
        if self.eat(&Tok::Minus) {
            let inner = self.factor()?;
            return Ok(Node {
                kind: NodeKind::Neg(Box::new(inner)),
                offset,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        let offset = self.here();
        if self.eat(&Tok::Caret) {
            let exponent = self.factor()?;
            return Ok(Node {
                kind: NodeKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
                offset,
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let offset = self.here();
        let Some(token) = self.next() else {
            return Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            });
        };
        match token.tok {
            Tok::Num(x) => Ok(Node {
                kind: NodeKind::Number(x),
                offset,
            }),
            Tok::Ident(name) => {
                if self.eat(&Tok::LParen) {
                    let func = Function::from_name(&name).ok_or_else(|| Error::Syntax {
                        offset,
                        message: format!("unknown function `{name}`"),
                    })?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Node {
                        kind: NodeKind::Call(func, Box::new(arg)),
                        offset,
                    })
                } else {
                    Ok(Node {
                        kind: NodeKind::Ident(name),
                        offset,
                    })
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(Error::Syntax {
                offset,
                message: format!("expected a number, identifier or `(`, found {other}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let offset = self.here();
        if self.eat(&Tok::RParen) {
            Ok(())
        } else {
            Err(Error::Syntax {
                offset,
                message: "expected `)`".into(),
            })
        }
    }
}

struct Ctx<'a> {
    bindings: &'a Bindings,
    n: usize,
    values_only: bool,
}

impl Ctx<'_> {
    fn domain(offset: usize, message: impl Into<String>) -> Error {
        Error::ExpressionDomain {
            offset,
            message: message.into(),
        }
    }

    fn eval(&self, node: &Node) -> Result<HyperDual> {
        let r = match &node.kind {
            NodeKind::Number(x) => HyperDual::constant(*x, self.n),
            NodeKind::Ident(name) => {
                if let Some(i) = self.bindings.variables.iter().position(|(n, _)| n == name) {
                    let v = self.bindings.variables[i].1;
                    if self.values_only {
                        HyperDual::constant(v, 0)
                    } else {
                        HyperDual::variable(v, i, self.n)
                    }
                } else if let Some(v) = self.bindings.params.get(name) {
                    HyperDual::constant(*v, self.n)
                } else {
                    return Err(Error::UnknownIdentifier {
                        name: name.clone(),
                        offset: node.offset,
                    });
                }
            }
            NodeKind::Neg(a) => -self.eval(a)?,
            NodeKind::Binary(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                match op {
                    BinaryOp::Add => &a + &b,
                    BinaryOp::Sub => &a - &b,
                    BinaryOp::Mul => &a * &b,
                    BinaryOp::Div => {
                        if b.value() == 0.0 {
                            return Err(Self::domain(node.offset, "division by zero"));
                        }
                        &a / &b
                    }
                    BinaryOp::Pow => self.pow(&a, &b, node.offset)?,
                }
            }
            NodeKind::Call(func, arg) => {
                let x = self.eval(arg)?;
                match func {
                    Function::Sin => x.sin(),
                    Function::Cos => x.cos(),
                    Function::Exp => x.exp(),
                    Function::Tan => {
                        if x.value().cos().abs() < 1e-12 {
                            return Err(Self::domain(node.offset, "tan evaluated at a pole"));
                        }
                        x.tan()
                    }
                    Function::Sqrt => {
                        if x.value() < 0.0 {
                            return Err(Self::domain(
                                node.offset,
                                format!("sqrt of negative value {}", x.value()),
                            ));
                        }
                        if x.value() == 0.0 && !self.values_only {
                            return Err(Self::domain(
                                node.offset,
                                "sqrt is not differentiable at 0",
                            ));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if !r.is_finite() {
            let what = match &node.kind {
                NodeKind::Call(f, _) => format!("{} produced a non-finite result", f.name()),
                _ => "non-finite result".to_string(),
            };
            return Err(Self::domain(node.offset, what));
        }
        Ok(r)
    }

    fn pow(&self, base: &HyperDual, exponent: &HyperDual, offset: usize) -> Result<HyperDual> {
        let x = base.value();
        if exponent.is_constant() {
            let p = exponent.value();
            if p.fract() != 0.0 && x < 0.0 {
                return Err(Self::domain(
                    offset,
                    "negative base with non-integer exponent",
                ));
            }
            if x == 0.0 && p < 0.0 {
                return Err(Self::domain(offset, "zero raised to a negative power"));
            }
            if x == 0.0 && p.fract() != 0.0 && p < 2.0 && !self.values_only {
                return Err(Self::domain(
                    offset,
                    "power is not twice differentiable at 0",
                ));
            }
            Ok(base.powf(p))
        } else {
            if x <= 0.0 {
                return Err(Self::domain(
                    offset,
                    "variable exponent requires a positive base",
                ));
            }
            Ok(base.pow(exponent))
        }
    }
}
