use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::MAX_DIM;

/// Value of a scalar field together with its first partial derivatives
/// with respect to the chart coordinates `(t, x2, ..., xm)`.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    value: f64,
    grad: [f64; MAX_DIM],
    dim: u8,
}

impl Jet {
    pub fn constant(value: f64, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        Jet {
            value,
            grad: [0.0; MAX_DIM],
            dim: dim as u8,
        }
    }

    /// Seed jet for coordinate `index`: unit partial in that slot.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut jet = Jet::constant(value, dim);
        jet.grad[index] = 1.0;
        jet
    }

    pub fn from_parts(value: f64, partials: &[f64]) -> Self {
        let mut jet = Jet::constant(value, partials.len());
        jet.grad[..partials.len()].copy_from_slice(partials);
        jet
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn partials(&self) -> &[f64] {
        &self.grad[..self.dim as usize]
    }

    #[inline]
    pub fn partial(&self, index: usize) -> f64 {
        self.partials()[index]
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Chain rule for a scalar function with value `f` and slope `df` at `self.value`.
    #[inline]
    pub(crate) fn chain(&self, f: f64, df: f64) -> Jet {
        let mut out = *self;
        out.value = f;
        for g in out.grad[..self.dim as usize].iter_mut() {
            *g *= df;
        }
        out
    }

    #[inline]
    fn zip(self, rhs: Jet, value: f64, a: f64, b: f64) -> Jet {
        let dim = self.dim.max(rhs.dim);
        let mut grad = [0.0; MAX_DIM];
        for (i, g) in grad[..dim as usize].iter_mut().enumerate() {
            *g = a * self.grad[i] + b * rhs.grad[i];
        }
        Jet { value, grad, dim }
    }

    pub fn scale(self, factor: f64) -> Jet {
        self.chain(self.value * factor, factor)
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("value", &self.value)
            .field("partials", &self.partials())
            .finish()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.zip(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let q = self.value / rhs.value;
        self.zip(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.chain(-self.value, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Jet::variable(2.0, 1, 3);
        let y = Jet::variable(5.0, 2, 3);
        let p = x * y;
        assert_eq!(p.value(), 10.0);
        assert_eq!(p.partials(), &[0.0, 5.0, 2.0]);
    }

    #[test]
    fn quotient_rule() {
        let x = Jet::variable(3.0, 0, 2);
        let q = Jet::constant(1.0, 2) / x;
        assert!((q.partial(0) + 1.0 / 9.0).abs() < 1e-15);
    }
}
