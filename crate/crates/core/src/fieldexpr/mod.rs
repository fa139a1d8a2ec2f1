//! Scalar coefficient fields on chart coordinates `(t, x2, ..., xm)`.
//!
//! Fields are small expression trees. They are parsed from text, evaluated
//! pointwise or as [`Jet`]s (value plus exact first partials, forward mode),
//! and assembled programmatically by the constructions in
//! [`crate::constructor`]. Variable index `0` is `t`, index `k` is `x{k+1}`.
//!
//! Besides the user grammar (`+ - * / ^int`, `sin cos exp sqrt`) the tree has
//! one internal node, `cutoff(q, r0, r1)`: the smooth radial profile evaluated
//! at `sqrt(q)`. Constructed systems use it for their bump blends; it prints
//! and parses like any other call so constructed documents reload exactly.

mod calculus;
mod eval;
mod jet;
mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

pub use calculus::{check_t_periodicity, NotDifferentiable};
pub use eval::smooth_step;
pub use jet::Jet;
pub use parse::parse;

/// Largest supported chart dimension.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Expr),
    Call(Func, Expr),
    Binary(BinOp, Expr, Expr),
    Pow(Expr, i32),
    /// Smooth radial cutoff of `sqrt(arg)`: 1 below `inner`, 0 above `outer`.
    Cutoff { arg: Expr, inner: f64, outer: f64 },
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("variable `{name}` at {pos} is out of range for chart dimension {dim}")]
    DimensionOutOfRange { name: String, pos: usize, dim: usize },
    #[error("chart dimension {0} unsupported (expected 2..={MAX_DIM})")]
    InvalidDimension(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    NegativeSqrt(f64),
    #[error("square root is not differentiable at 0")]
    SqrtAtZero,
    #[error("cutoff argument must be a nonnegative squared radius, got {0}")]
    NegativeCutoffArg(f64),
    #[error("point has {got} coordinates, expression needs at least {need}")]
    PointTooShort { got: usize, need: usize },
}

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Expr::new(Node::Const(value))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn var(index: usize) -> Self {
        Expr::new(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const(&self, value: f64) -> bool {
        self.as_const() == Some(value)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(e) | Node::Call(_, e) | Node::Pow(e, _) => e.max_var(),
            Node::Cutoff { arg, .. } => arg.max_var(),
            Node::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn depends_on(&self, index: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(i) => *i == index,
            Node::Neg(e) | Node::Call(_, e) | Node::Pow(e, _) => e.depends_on(index),
            Node::Cutoff { arg, .. } => arg.depends_on(index),
            Node::Binary(_, a, b) => a.depends_on(index) || b.depends_on(index),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + match self.node() {
            Node::Const(_) | Node::Var(_) => 0,
            Node::Neg(e) | Node::Call(_, e) | Node::Pow(e, _) => e.node_count(),
            Node::Cutoff { arg, .. } => arg.node_count(),
            Node::Binary(_, a, b) => a.node_count() + b.node_count(),
        }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            let folded = match func {
                Func::Sin => Some(c.sin()),
                Func::Cos => Some(c.cos()),
                Func::Exp => Some(c.exp()),
                Func::Sqrt if c >= 0.0 => Some(c.sqrt()),
                Func::Sqrt => None,
            };
            if let Some(v) = folded {
                return Expr::constant(v);
            }
        }
        Expr::new(Node::Call(func, arg))
    }

    pub fn sin(&self) -> Expr {
        Expr::call(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::call(Func::Cos, self.clone())
    }

    pub fn exp(&self) -> Expr {
        Expr::call(Func::Exp, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        Expr::call(Func::Sqrt, self.clone())
    }

    pub fn powi(&self, exponent: i32) -> Expr {
        match exponent {
            0 => return Expr::one(),
            1 => return self.clone(),
            _ => {}
        }
        if let Some(c) = self.as_const() {
            if c != 0.0 || exponent > 0 {
                return Expr::constant(c.powi(exponent));
            }
        }
        Expr::new(Node::Pow(self.clone(), exponent))
    }

    /// Smooth cutoff of `sqrt(self)` with plateau `[0, inner]` and support `[0, outer)`.
    pub fn cutoff(&self, inner: f64, outer: f64) -> Expr {
        if let Some(q) = self.as_const() {
            if q >= 0.0 {
                return Expr::constant(smooth_step(q.sqrt(), inner, outer).0);
            }
        }
        Expr::new(Node::Cutoff {
            arg: self.clone(),
            inner,
            outer,
        })
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            let v = match op {
                BinOp::Add => Some(a + b),
                BinOp::Sub => Some(a - b),
                BinOp::Mul => Some(a * b),
                BinOp::Div if b != 0.0 => Some(a / b),
                BinOp::Div => None,
            };
            if let Some(v) = v {
                return Expr::constant(v);
            }
        }
        match op {
            BinOp::Add if lhs.is_const(0.0) => return rhs,
            BinOp::Add | BinOp::Sub if rhs.is_const(0.0) => return lhs,
            BinOp::Sub if lhs.is_const(0.0) => return -rhs,
            BinOp::Mul if lhs.is_const(0.0) || rhs.is_const(0.0) => return Expr::zero(),
            BinOp::Mul if lhs.is_const(1.0) => return rhs,
            BinOp::Mul | BinOp::Div if rhs.is_const(1.0) => return lhs,
            BinOp::Div if lhs.is_const(0.0) => return Expr::zero(),
            _ => {}
        }
        Expr::new(Node::Binary(op, lhs, rhs))
    }

    /// Sum of an iterator of expressions (zero when empty).
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc + t)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Binary(op, _, _) => op.precedence(),
            Node::Const(c) if c.is_sign_negative() => 3,
            Node::Neg(_) => 3,
            Node::Pow(_, _) => 4,
            _ => 5,
        }
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(0) => write!(f, "t"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(e) => {
                write!(f, "-")?;
                e.write_operand(f, e.precedence() < 3)
            }
            Node::Call(func, e) => write!(f, "{}({e})", func.name()),
            Node::Cutoff { arg, inner, outer } => write!(f, "cutoff({arg}, {inner}, {outer})"),
            Node::Pow(base, n) => {
                base.write_operand(f, base.precedence() < 5)?;
                write!(f, "^{n}")
            }
            Node::Binary(op, a, b) => {
                let p = op.precedence();
                a.write_operand(f, a.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                b.write_operand(f, b.precedence() <= p || b.precedence() == 3)
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl From<f64> for Expr {
    fn from(value: f64) -> Self {
        Expr::constant(value)
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs)
            }
        }
    };
}

expr_binop!(Add, add, BinOp::Add);
expr_binop!(Sub, sub, BinOp::Sub);
expr_binop!(Mul, mul, BinOp::Mul);
expr_binop!(Div, div, BinOp::Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(self)),
        }
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_folds_constants() {
        let x = Expr::var(1);
        assert_eq!(x.clone() * 0.0, Expr::zero());
        assert_eq!(1.0 * x.clone(), x);
        assert_eq!(Expr::constant(2.0) + Expr::constant(3.0), Expr::constant(5.0));
        assert_eq!(-(-x.clone()), x);
    }

    #[test]
    fn printing_respects_precedence() {
        let x2 = Expr::var(1);
        let x3 = Expr::var(2);
        let e = x2.clone() - (x3.clone() - x2.clone());
        assert_eq!(e.to_string(), "x2 - (x3 - x2)");
        let e = (x2.clone() + x3.clone()).powi(2);
        assert_eq!(e.to_string(), "(x2 + x3)^2");
        let e = Expr::constant(-3.0) * x2;
        assert_eq!(e.to_string(), "-3 * x2");
    }
}
