//! Scalar expressions over chart coordinates.
//!
//! Grammar (whitespace between tokens is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' uint)?
//! atom   := number | 'x' uint | fn '(' expr ')' | '(' expr ')' | '-' atom
//! fn     := sin | cos | exp
//! ```
//!
//! There is no division, so differentiation stays inside the grammar. Nodes are
//! reference counted and immutable; cloning an expression is cheap and sharing
//! subtrees between derived expressions is the norm.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{count, lit, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("coordinate x{index} at column {column} is outside 1..{dim}")]
    CoordinateOutOfRange {
        index: usize,
        dim: usize,
        column: usize,
    },
    #[error("chart dimension must be at least 2, got {0}")]
    Dimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
        }
    }
}

/// One node of an expression tree. Coordinates are stored zero-based.
#[derive(Debug)]
pub enum Node<T> {
    Const(T),
    Coord(usize),
    Neg(ExprAst<T>),
    Add(ExprAst<T>, ExprAst<T>),
    Sub(ExprAst<T>, ExprAst<T>),
    Mul(ExprAst<T>, ExprAst<T>),
    Pow(ExprAst<T>, u32),
    Call(Func, ExprAst<T>),
}

/// Immutable, shareable scalar expression.
#[derive(Debug, Clone)]
pub struct ExprAst<T = f64>(Arc<Node<T>>);

impl<T: Real> Default for ExprAst<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> ExprAst<T> {
    fn from_node(node: Node<T>) -> Self {
        ExprAst(Arc::new(node))
    }

    pub fn node(&self) -> &Node<T> {
        &self.0
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        if dim < 2 {
            return Err(ExprError::Dimension(dim));
        }
        let mut parser = Parser {
            src: text.as_bytes(),
            pos: 0,
            dim,
        };
        let ast = parser.expr()?;
        parser.skip_ws();
        if parser.pos < parser.src.len() {
            return Err(parser.syntax("unexpected trailing input"));
        }
        Ok(ast)
    }

    pub fn constant(value: T) -> Self {
        Self::from_node(Node::Const(value))
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    /// Coordinate function `x^k`, `k` one-based.
    pub fn coord(k: usize) -> Self {
        assert!(k >= 1, "coordinates are one-based");
        Self::from_node(Node::Coord(k - 1))
    }

    pub fn as_const(&self) -> Option<T> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c == T::zero())
    }

    fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c == T::one())
    }

    /// Largest one-based coordinate index referenced, or 0 for a constant.
    pub fn max_coord(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Coord(i) => i + 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.max_coord(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => a.max_coord().max(b.max_coord()),
        }
    }

    /// Number of nodes, counting shared subtrees once per reference.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Coord(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + a.size(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Const(c) => Self::constant(-*c),
            Node::Neg(a) => a.clone(),
            _ => Self::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Self::constant(a + b);
        }
        Self::from_node(Node::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Self::constant(a - b);
        }
        Self::from_node(Node::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Self::constant(a * b);
        }
        Self::from_node(Node::Mul(self.clone(), other.clone()))
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::constant(factor).mul(self)
    }

    pub fn powi(&self, exponent: u32) -> Self {
        match exponent {
            0 => Self::one(),
            1 => self.clone(),
            _ => match self.as_const() {
                Some(c) => Self::constant(c.powi(exponent as i32)),
                None => Self::from_node(Node::Pow(self.clone(), exponent)),
            },
        }
    }

    pub fn call(func: Func, arg: &Self) -> Self {
        match arg.as_const() {
            Some(c) => Self::constant(func.apply(c)),
            None => Self::from_node(Node::Call(func, arg.clone())),
        }
    }

    /// Sum of a sequence of expressions, folding constants and zeros.
    pub fn sum<'a, I>(terms: I) -> Self
    where
        I: IntoIterator<Item = &'a Self>,
        T: 'a,
    {
        terms.into_iter().fold(Self::zero(), |acc, t| acc.add(t))
    }

    /// `Σ_{a<n} f(a)`, the usual index contraction.
    pub fn sum_by(n: usize, mut f: impl FnMut(usize) -> Self) -> Self {
        (0..n).fold(Self::zero(), |acc, a| acc.add(&f(a)))
    }

    /// Kronecker symbol as an expression.
    pub fn delta(i: usize, j: usize) -> Self {
        if i == j {
            Self::one()
        } else {
            Self::zero()
        }
    }

    pub fn eval(&self, point: &[T]) -> T {
        match self.node() {
            Node::Const(c) => *c,
            Node::Coord(i) => point[*i],
            Node::Neg(a) => -a.eval(point),
            Node::Add(a, b) => a.eval(point) + b.eval(point),
            Node::Sub(a, b) => a.eval(point) - b.eval(point),
            Node::Mul(a, b) => a.eval(point) * b.eval(point),
            Node::Pow(a, n) => a.eval(point).powi(*n as i32),
            Node::Call(f, a) => f.apply(a.eval(point)),
        }
    }

    /// Exact partial derivative with respect to `x^k` (one-based).
    pub fn diff(&self, k: usize) -> Self {
        assert!(k >= 1, "coordinates are one-based");
        self.diff0(k - 1)
    }

    fn diff0(&self, k: usize) -> Self {
        match self.node() {
            Node::Const(_) => Self::zero(),
            Node::Coord(i) => {
                if *i == k {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Neg(a) => a.diff0(k).neg(),
            Node::Add(a, b) => a.diff0(k).add(&b.diff0(k)),
            Node::Sub(a, b) => a.diff0(k).sub(&b.diff0(k)),
            Node::Mul(a, b) => a.diff0(k).mul(b).add(&a.mul(&b.diff0(k))),
            Node::Pow(a, n) => {
                let da = a.diff0(k);
                if da.is_zero() {
                    return Self::zero();
                }
                a.powi(n - 1).scale(count(*n as usize)).mul(&da)
            }
            Node::Call(f, a) => {
                let da = a.diff0(k);
                if da.is_zero() {
                    return Self::zero();
                }
                match f {
                    Func::Sin => Self::call(Func::Cos, a).mul(&da),
                    Func::Cos => Self::call(Func::Sin, a).mul(&da).neg(),
                    Func::Exp => self.mul(&da),
                }
            }
        }
    }

    /// Central difference `(f(x + h e_k) - f(x - h e_k)) / 2h`, `k` one-based.
    pub fn diff_fd(&self, k: usize, point: &[T], h: T) -> T {
        central_difference(|p| self.eval(p), k, point, h)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) => 2,
            Node::Pow(..) => 3,
            Node::Neg(_) => 4,
            Node::Const(c) if c.is_sign_negative() => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self.node() {
            Node::Const(c) => write!(f, "{c:?}")?,
            Node::Coord(i) => write!(f, "x{}", i + 1)?,
            Node::Neg(a) => {
                f.write_str("-")?;
                a.write_prec(f, 4)?;
            }
            Node::Add(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" + ")?;
                b.write_prec(f, 2)?;
            }
            Node::Sub(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" - ")?;
                b.write_prec(f, 2)?;
            }
            Node::Mul(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("*")?;
                b.write_prec(f, 3)?;
            }
            Node::Pow(a, n) => {
                a.write_prec(f, 5)?;
                write!(f, "^{n}")?;
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Prints text that parses back into an expression with identical evaluations.
impl<T: Real> fmt::Display for ExprAst<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

pub(crate) fn central_difference<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    k: usize,
    point: &[T],
    h: T,
) -> T {
    let mut shifted = point.to_vec();
    shifted[k - 1] = point[k - 1] + h;
    let plus = f(&shifted);
    shifted[k - 1] = point[k - 1] - h;
    let minus = f(&shifted);
    (plus - minus) / (lit::<T>(2.0) * h)
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl<T: Real> std::ops::$trait<&ExprAst<T>> for &ExprAst<T> {
            type Output = ExprAst<T>;
            fn $method(self, rhs: &ExprAst<T>) -> ExprAst<T> {
                self.$inner(rhs)
            }
        }
        impl<T: Real> std::ops::$trait<ExprAst<T>> for ExprAst<T> {
            type Output = ExprAst<T>;
            fn $method(self, rhs: ExprAst<T>) -> ExprAst<T> {
                ExprAst::$inner(&self, &rhs)
            }
        }
        impl<T: Real> std::ops::$trait<&ExprAst<T>> for ExprAst<T> {
            type Output = ExprAst<T>;
            fn $method(self, rhs: &ExprAst<T>) -> ExprAst<T> {
                ExprAst::$inner(&self, rhs)
            }
        }
        impl<T: Real> std::ops::$trait<ExprAst<T>> for &ExprAst<T> {
            type Output = ExprAst<T>;
            fn $method(self, rhs: ExprAst<T>) -> ExprAst<T> {
                self.$inner(&rhs)
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);

impl<T: Real> std::ops::Neg for &ExprAst<T> {
    type Output = ExprAst<T>;
    fn neg(self) -> ExprAst<T> {
        ExprAst::neg(self)
    }
}

impl<T: Real> std::ops::Neg for ExprAst<T> {
    type Output = ExprAst<T>;
    fn neg(self) -> ExprAst<T> {
        ExprAst::neg(&self)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<(), ExprError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{}'", byte as char)))
        }
    }

    fn expr<T: Real>(&mut self) -> Result<ExprAst<T>, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term<T: Real>(&mut self) -> Result<ExprAst<T>, ExprError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor<T: Real>(&mut self) -> Result<ExprAst<T>, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let exponent = self
                .uint()?
                .ok_or_else(|| self.syntax("expected a non-negative integer exponent"))?;
            let exponent =
                u32::try_from(exponent).map_err(|_| self.syntax("exponent too large"))?;
            return Ok(base.powi(exponent));
        }
        Ok(base)
    }

    fn uint(&mut self) -> Result<Option<usize>, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse::<usize>()
            .map(Some)
            .map_err(|_| self.syntax("integer too large"))
    }

    fn atom<T: Real>(&mut self) -> Result<ExprAst<T>, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(self.atom::<T>()?.neg())
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(b'x') => {
                let column = self.pos + 1;
                self.pos += 1;
                let index = self
                    .uint()?
                    .ok_or_else(|| self.syntax("expected coordinate index after 'x'"))?;
                if index == 0 || index > self.dim {
                    return Err(ExprError::CoordinateOutOfRange {
                        index,
                        dim: self.dim,
                        column,
                    });
                }
                Ok(ExprAst::coord(index))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let func = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => {
                        self.pos = start;
                        return Err(self.syntax(&format!("unknown function '{name}'")));
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(ExprAst::call(func, &arg))
            }
            Some(c) => Err(self.syntax(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number<T: Real>(&mut self) -> Result<ExprAst<T>, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| {
            self.pos = start;
            self.syntax("malformed number")
        })?;
        Ok(ExprAst::constant(lit(value)))
    }
}
