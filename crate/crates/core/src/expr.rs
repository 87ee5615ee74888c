//! Expression language for φ(r, s) and the single-variable profile and
//! coefficient functions.
//!
//! Grammar (precedence low to high; `^` is right-associative and its exponent
//! must be a literal rational such as `2`, `-1`, `1.5` or `(1/3)`):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" exponent ] ;
//! atom    = number | var | func "(" expr ")" | "(" expr ")" ;
//! var     = "r" | "s" | "v" ;
//! func    = "sqrt" | "exp" | "log" | "sin" | "cos" | "tan" | "sinh" | "cosh" | "atan" ;
//! ```

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::jets::{Jet2, JetShape};
use crate::scalar::Scalar;

pub type Span = Range<usize>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at {}..{}", span.start, span.end)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl ParseError {
    fn new(span: Span, message: impl Into<String>) -> Self {
        ParseError { span, message: message.into() }
    }

    /// Renders the source with a caret line under the offending span.
    pub fn render(&self, src: &str) -> String {
        let start = self.span.start.min(src.len());
        let width = self.span.end.saturating_sub(self.span.start).max(1);
        format!("{}\n{}\n{}{}", self.message, src, " ".repeat(start), "^".repeat(width))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    R,
    S,
    V,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::R => "r",
            Var::S => "s",
            Var::V => "v",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Atan,
}

impl Func {
    const ALL: [Func; 9] = [
        Func::Sqrt,
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Atan => "atan",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// `base ^ exponent`; `value` is the exponent's numeric value.
    Pow { base: Box<Expr>, exponent: Box<Expr>, value: f64 },
    Call(Func, Box<Expr>),
}

/// Structural equality; spans are ignored.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    /// Whether the expression mentions `var`.
    pub fn uses(&self, var: Var) -> bool {
        match &self.kind {
            ExprKind::Num(_) => false,
            ExprKind::Var(v) => *v == var,
            ExprKind::Neg(e) | ExprKind::Call(_, e) => e.uses(var),
            ExprKind::Bin(_, a, b) => a.uses(var) || b.uses(var),
            ExprKind::Pow { base, .. } => base.uses(var),
        }
    }

    /// First occurrence of any variable outside `allowed`, with its span.
    pub fn foreign_var(&self, allowed: &[Var]) -> Option<(Var, Span)> {
        match &self.kind {
            ExprKind::Num(_) => None,
            ExprKind::Var(v) => (!allowed.contains(v)).then(|| (*v, self.span.clone())),
            ExprKind::Neg(e) | ExprKind::Call(_, e) => e.foreign_var(allowed),
            ExprKind::Bin(_, a, b) => a.foreign_var(allowed).or_else(|| b.foreign_var(allowed)),
            ExprKind::Pow { base, .. } => base.foreign_var(allowed),
        }
    }

    /// True when the expression is the literal zero.
    pub fn is_literal_zero(&self) -> bool {
        matches!(self.kind, ExprKind::Num(v) if v == 0.0)
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            ExprKind::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            ExprKind::Neg(_) => 3,
            ExprKind::Pow { .. } => 4,
            _ => 5,
        }
    }

    /// Evaluates as a jet, given jets for the variables the expression uses.
    pub fn eval_jet<T: Scalar>(&self, env: &JetEnv<T>) -> Result<Jet2<T>> {
        Ok(match &self.kind {
            ExprKind::Num(v) => Jet2::constant(T::lit(*v), env.at, env.shape),
            ExprKind::Var(v) => env
                .get(*v)
                .cloned()
                .ok_or_else(|| Error::InvalidModel(format!("variable `{}` is not bound here", v.name())))?,
            ExprKind::Neg(e) => -e.eval_jet(env)?,
            ExprKind::Bin(op, a, b) => {
                let a = a.eval_jet(env)?;
                let b = b.eval_jet(env)?;
                match op {
                    BinOp::Add => a.try_add(&b)?,
                    BinOp::Sub => a.try_sub(&b)?,
                    BinOp::Mul => a.try_mul(&b)?,
                    BinOp::Div => a.div_eps(&b, env.div_epsilon)?,
                }
            }
            ExprKind::Pow { base, value, .. } => {
                let b = base.eval_jet(env)?;
                if value.fract() == 0.0 && value.abs() <= 64.0 {
                    let n = *value as i32;
                    if n < 0 {
                        b.powi(-n)?.recip()?
                    } else {
                        b.powi(n)?
                    }
                } else {
                    b.powf(T::lit(*value))?
                }
            }
            ExprKind::Call(f, arg) => {
                let a = arg.eval_jet(env)?;
                match f {
                    Func::Sqrt => a.sqrt()?,
                    Func::Exp => a.exp(),
                    Func::Log => a.ln()?,
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan()?,
                    Func::Sinh => a.sinh(),
                    Func::Cosh => a.cosh(),
                    Func::Atan => a.atan(),
                }
            }
        })
    }

    /// Plain value at the given variable values (unbound variables are errors).
    pub fn eval<T: Scalar>(&self, r: Option<T>, s: Option<T>, v: Option<T>) -> Result<T> {
        let shape = JetShape::new(0, 0);
        let at = (T::zero(), T::zero());
        let mk = |x: Option<T>| x.map(|x| Jet2::constant(x, at, shape));
        let env = JetEnv { at, shape, r: mk(r), s: mk(s), v: mk(v), div_epsilon: T::zero() };
        Ok(self.eval_jet(&env)?.value())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Children are parenthesised whenever their precedence could rebind,
        // so printing then reparsing gives back the same tree.
        let wrap = |e: &Expr, min: u8, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v}"),
            ExprKind::Var(v) => f.write_str(v.name()),
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                wrap(e, 4, f)
            }
            ExprKind::Bin(op, a, b) => {
                let p = self.precedence();
                wrap(a, p, f)?;
                write!(f, " {} ", op.symbol())?;
                wrap(b, p + 1, f)
            }
            ExprKind::Pow { base, exponent, .. } => {
                wrap(base, 5, f)?;
                f.write_str("^")?;
                wrap(exponent, 5, f)
            }
            ExprKind::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// Variable bindings for jet evaluation.
#[derive(Debug, Clone)]
pub struct JetEnv<T> {
    pub at: (T, T),
    pub shape: JetShape,
    pub r: Option<Jet2<T>>,
    pub s: Option<Jet2<T>>,
    pub v: Option<Jet2<T>>,
    pub div_epsilon: T,
}

impl<T: Scalar> JetEnv<T> {
    pub fn new(at: (T, T), shape: JetShape) -> Self {
        JetEnv {
            at,
            shape,
            r: None,
            s: None,
            v: None,
            div_epsilon: T::lit(crate::jets::DEFAULT_DIV_EPSILON),
        }
    }

    fn get(&self, var: Var) -> Option<&Jet2<T>> {
        match var {
            Var::R => self.r.as_ref(),
            Var::S => self.s.as_ref(),
            Var::V => self.v.as_ref(),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

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
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            i += 1;
            out.push(Token { tok, span: start..i });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::new(start..i, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), span: start..i });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), span: start..i });
            continue;
        }
        let len = c.len_utf8();
        let ch = src[start..].chars().next().unwrap_or(c);
        return Err(ParseError::new(start..start + ch.len_utf8().max(len), format!("unexpected character `{ch}`")));
    }
    out.push(Token { tok: Tok::Eof, span: src.len()..src.len() });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pratt parser

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

impl Parser {
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

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek().tok {
                Tok::Plus => (Some(BinOp::Add), BP_ADD, BP_ADD + 1),
                Tok::Minus => (Some(BinOp::Sub), BP_ADD, BP_ADD + 1),
                Tok::Star => (Some(BinOp::Mul), BP_MUL, BP_MUL + 1),
                Tok::Slash => (Some(BinOp::Div), BP_MUL, BP_MUL + 1),
                // right-associative
                Tok::Caret => (None, BP_POW, BP_POW),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            let op_tok = self.bump();
            let rhs = self.expr(rbp)?;
            let span = lhs.span.start..rhs.span.end;
            lhs = match op {
                Some(op) => Expr { kind: ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span },
                None => {
                    let value = literal_rational(&rhs).ok_or_else(|| {
                        ParseError::new(
                            rhs.span.clone(),
                            format!(
                                "exponent after `^` at {} must be a literal rational",
                                op_tok.span.start
                            ),
                        )
                    })?;
                    Expr {
                        kind: ExprKind::Pow { base: Box::new(lhs), exponent: Box::new(rhs), value },
                        span,
                    }
                }
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr { kind: ExprKind::Num(v), span: t.span }),
            Tok::Minus => {
                let e = self.expr(BP_NEG)?;
                let span = t.span.start..e.span.end;
                Ok(Expr { kind: ExprKind::Neg(Box::new(e)), span })
            }
            Tok::LParen => {
                let inner = self.expr(0)?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(ParseError::new(t.span, "unbalanced parenthesis: `(` is never closed"));
                }
                // the parenthesised span keeps error carets on the whole group
                Ok(Expr { kind: inner.kind, span: t.span.start..close.span.end })
            }
            Tok::Ident(name) => match name.as_str() {
                "r" => Ok(Expr { kind: ExprKind::Var(Var::R), span: t.span }),
                "s" => Ok(Expr { kind: ExprKind::Var(Var::S), span: t.span }),
                "v" => Ok(Expr { kind: ExprKind::Var(Var::V), span: t.span }),
                _ => {
                    let Some(func) = Func::lookup(&name) else {
                        return Err(ParseError::new(t.span, format!("unknown identifier `{name}`")));
                    };
                    self.call(func, t.span)
                }
            },
            Tok::RParen => Err(ParseError::new(t.span, "unbalanced parenthesis: unexpected `)`")),
            Tok::Eof => Err(ParseError::new(t.span, "unexpected end of input")),
            other => Err(ParseError::new(t.span, format!("unexpected token {}", describe(&other)))),
        }
    }

    fn call(&mut self, func: Func, name_span: Span) -> Result<Expr, ParseError> {
        let open = self.bump();
        if open.tok != Tok::LParen {
            return Err(ParseError::new(name_span, format!("`{}` must be called with one argument", func.name())));
        }
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                args.push(self.expr(0)?);
                if self.peek().tok == Tok::Comma {
                    self.bump();
                    continue;
                }
                break;
            }
        }
        let close = self.bump();
        if close.tok != Tok::RParen {
            return Err(ParseError::new(open.span, "unbalanced parenthesis: `(` is never closed"));
        }
        let span = name_span.start..close.span.end;
        if args.len() != 1 {
            return Err(ParseError::new(
                span,
                format!("arity mismatch: `{}` takes 1 argument, got {}", func.name(), args.len()),
            ));
        }
        let arg = args.pop().expect("one argument");
        Ok(Expr { kind: ExprKind::Call(func, Box::new(arg)), span })
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Numeric value of a literal rational exponent: `n`, `-n`, `p/q`, `-(p/q)`.
fn literal_rational(e: &Expr) -> Option<f64> {
    match &e.kind {
        ExprKind::Num(v) => Some(*v),
        ExprKind::Neg(inner) => literal_rational(inner).map(|v| -v),
        ExprKind::Bin(BinOp::Div, a, b) => {
            let p = literal_rational(a)?;
            let q = literal_rational(b)?;
            (q != 0.0).then(|| p / q)
        }
        ExprKind::Pow { base, value, .. } => {
            let v = literal_rational(base)?.powf(*value);
            v.is_finite().then_some(v)
        }
        _ => None,
    }
}

/// Parses a φ, profile or coefficient expression.
pub fn parse_phi(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr(0)?;
    let t = p.peek().clone();
    match t.tok {
        Tok::Eof => Ok(e),
        Tok::RParen => Err(ParseError::new(t.span, "unbalanced parenthesis: unexpected `)`")),
        other => Err(ParseError::new(t.span, format!("unexpected token {}", describe(&other)))),
    }
}
