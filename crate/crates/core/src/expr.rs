//! Arithmetic expressions over coordinate variables.
//!
//! Grammar (whitespace between tokens is ignored):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' factor)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt
//! ```
//!
//! Identifiers are `x1..xn` for an `n`-dimensional chart. Weight expressions
//! may additionally use `y1..yn` (see [`Variables::with_directions`]). There is
//! no unary minus; write `0 - x1`.
//!
//! ```
//! use randers::expr::{Expr, Variables};
//!
//! let e = Expr::parse("1 + 0.1*x1^2", &Variables::coordinates(2)).unwrap();
//! assert!((e.eval(&[2.0, 0.0]) - 1.4).abs() < 1e-15);
//! let again = Expr::parse(&e.to_string(), &Variables::coordinates(2)).unwrap();
//! assert_eq!(e, again);
//! ```

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

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

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
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

/// A variable reference. `slot` indexes the evaluation environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(Var),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// The set of identifiers an expression may reference.
///
/// Slots are laid out group by group: for `with_directions(n)` the
/// environment is `[x1..xn, y1..yn]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variables {
    groups: Vec<(char, usize)>,
}

impl Variables {
    pub fn coordinates(n: usize) -> Self {
        Variables {
            groups: vec![('x', n)],
        }
    }

    pub fn with_directions(n: usize) -> Self {
        Variables {
            groups: vec![('x', n), ('y', n)],
        }
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn resolve(&self, ident: &str) -> Option<usize> {
        let mut base = 0;
        for &(prefix, count) in &self.groups {
            if let Some(rest) = ident.strip_prefix(prefix) {
                if !rest.is_empty() && !rest.starts_with('0') && rest.bytes().all(|b| b.is_ascii_digit()) {
                    if let Ok(i) = rest.parse::<usize>() {
                        if (1..=count).contains(&i) {
                            return Some(base + i - 1);
                        }
                    }
                }
            }
            base += count;
        }
        None
    }
}

impl Expr {
    /// Parses `source`, rejecting identifiers outside `vars`.
    pub fn parse(source: &str, vars: &Variables) -> Result<Expr> {
        Self::parse_at(source, vars, 1, 1)
    }

    /// Like [`Expr::parse`] but reports positions relative to `(line, column)`,
    /// the location of the expression inside an enclosing document.
    pub fn parse_at(source: &str, vars: &Variables, line: usize, column: usize) -> Result<Expr> {
        let tokens = tokenize(source, line, column)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            vars,
        };
        let expr = parser.expr()?;
        match parser.peek() {
            Token { kind: Kind::End, .. } => Ok(expr),
            t => Err(t.error(format!("unexpected {}", t.kind.describe()))),
        }
    }

    /// Evaluates the expression. `env` must hold at least as many values as
    /// the variable set used at parse time.
    pub fn eval(&self, env: &[f64]) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Var(v) => env[v.slot],
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(env), r.eval(env));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, arg) => f.apply(arg.eval(env)),
        }
    }

    /// Returns the value if the expression contains no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.has_vars() {
            None
        } else {
            Some(self.eval(&[]))
        }
    }

    fn has_vars(&self) -> bool {
        match self {
            Expr::Number(_) => false,
            Expr::Var(_) => true,
            Expr::Binary(_, l, r) => l.has_vars() || r.has_vars(),
            Expr::Call(_, a) => a.has_vars(),
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v:?}"),
            Expr::Var(v) => f.write_str(&v.name),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Number(v) => format!("number {v}"),
            Kind::Ident(s) => format!("identifier '{s}'"),
            Kind::Op(c) => format!("operator '{c}'"),
            Kind::LParen => "'('".into(),
            Kind::RParen => "')'".into(),
            Kind::End => "end of expression".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    line: usize,
    column: usize,
}

impl Token {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }
}

fn tokenize(src: &str, line0: usize, col0: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (line0, col0);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() || c == '.' {
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
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("malformed number '{text}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: tl,
                    column: tc,
                    message: format!("number '{text}' is out of range"),
                });
            }
            Kind::Number(v)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Kind::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Kind::Op(c),
                '(' => Kind::LParen,
                ')' => Kind::RParen,
                _ => {
                    return Err(Error::Parse {
                        line: tl,
                        column: tc,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            }
        };
        col += i - start;
        out.push(Token {
            kind,
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        kind: Kind::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a Variables,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn peek_op(&self, ops: &[char]) -> Option<char> {
        match self.peek().kind {
            Kind::Op(c) if ops.contains(&c) => Some(c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek_op(&['+', '-']) {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek_op(&['*', '/']) {
            self.bump();
            let rhs = self.factor()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek_op(&['^']).is_some() {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let tok = self.bump();
        match tok.kind {
            Kind::Number(v) => Ok(Expr::Number(v)),
            Kind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Kind::Ident(ref name) => {
                if let Some(func) = Func::from_name(name) {
                    let open = self.bump();
                    if open.kind != Kind::LParen {
                        return Err(open.error(format!("expected '(' after '{name}'")));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if let Some(slot) = self.vars.resolve(name) {
                    Ok(Expr::Var(Var {
                        name: name.clone(),
                        slot,
                    }))
                } else {
                    Err(tok.error(format!("unknown identifier '{name}'")))
                }
            }
            ref k => Err(tok.error(format!("expected a number, identifier or '(', found {}", k.describe()))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let t = self.bump();
        if t.kind == Kind::RParen {
            Ok(())
        } else {
            Err(t.error(format!("expected ')', found {}", t.kind.describe())))
        }
    }
}
