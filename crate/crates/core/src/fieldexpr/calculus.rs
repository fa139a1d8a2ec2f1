use thiserror::Error;

use super::{BinOp, Expr, Func, Node};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot differentiate `{0}` symbolically (cutoff argument depends on the variable)")]
pub struct NotDifferentiable(pub String);

impl Expr {
    /// Symbolic partial derivative with respect to variable `index`.
    ///
    /// Built with the folding constructors, so derivatives of expressions that
    /// do not mention the variable collapse to `0`.
    pub fn derivative(&self, index: usize) -> Result<Expr, NotDifferentiable> {
        if !self.depends_on(index) {
            return Ok(Expr::zero());
        }
        Ok(match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => Expr::constant(if *i == index { 1.0 } else { 0.0 }),
            Node::Neg(e) => -e.derivative(index)?,
            Node::Binary(op, a, b) => {
                let da = a.derivative(index)?;
                let db = b.derivative(index)?;
                match op {
                    BinOp::Add => da + db,
                    BinOp::Sub => da - db,
                    BinOp::Mul => da * b.clone() + a.clone() * db,
                    BinOp::Div => (da * b.clone() - a.clone() * db) / b.powi(2),
                }
            }
            Node::Pow(base, n) => {
                let db = base.derivative(index)?;
                Expr::constant(*n as f64) * base.powi(n - 1) * db
            }
            Node::Call(func, e) => {
                let de = e.derivative(index)?;
                let outer = match func {
                    Func::Sin => e.cos(),
                    Func::Cos => -e.sin(),
                    Func::Exp => e.exp(),
                    Func::Sqrt => 0.5 / e.sqrt(),
                };
                outer * de
            }
            Node::Cutoff { .. } => return Err(NotDifferentiable(self.to_string())),
        })
    }

    /// Replace every occurrence of variable `index` with `value`, refolding.
    pub fn substitute(&self, index: usize, value: &Expr) -> Expr {
        if !self.depends_on(index) {
            return self.clone();
        }
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) if *i == index => value.clone(),
            Node::Var(_) => self.clone(),
            Node::Neg(e) => -e.substitute(index, value),
            Node::Binary(op, a, b) => {
                Expr::binary(*op, a.substitute(index, value), b.substitute(index, value))
            }
            Node::Pow(base, n) => base.substitute(index, value).powi(*n),
            Node::Call(func, e) => Expr::call(*func, e.substitute(index, value)),
            Node::Cutoff { arg, inner, outer } => arg.substitute(index, value).cutoff(*inner, *outer),
        }
    }

    /// Restriction to the core loop: all transverse coordinates set to zero.
    pub fn on_axis(&self, dim: usize) -> Expr {
        (1..dim).fold(self.clone(), |e, i| e.substitute(i, &Expr::zero()))
    }
}

fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Max of `|f(t + T, x) - f(t, x)|` over `samples` quasi-random points with
/// `t` in `[0, T)` and `x` in `[-1, 1]^(m-1)`.
///
/// A small value only certifies the sample set. Points where both sides fail
/// to evaluate are skipped; a one-sided failure counts as an infinite residual.
pub fn check_t_periodicity(expr: &Expr, period: f64, samples: usize) -> f64 {
    let dim = expr.max_var().map_or(1, |i| i + 1);
    let mut worst: f64 = 0.0;
    let mut point = vec![0.0; dim];
    let mut shifted = vec![0.0; dim];
    for k in 0..samples {
        point[0] = period * (k as f64 + 0.5) / samples as f64;
        for j in 1..dim {
            point[j] = 2.0 * halton(k + 1, PRIMES[j - 1]) - 1.0;
        }
        shifted.copy_from_slice(&point);
        shifted[0] += period;
        let residual = match (expr.eval(&point), expr.eval(&shifted)) {
            (Ok(a), Ok(b)) => (a - b).abs(),
            (Err(_), Err(_)) => continue,
            _ => f64::INFINITY,
        };
        worst = worst.max(residual);
    }
    worst
}
