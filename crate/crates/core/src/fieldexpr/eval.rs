use super::{BinOp, EvalError, Expr, Func, Jet, Node};

/// Smooth monotone step with plateau 1 on `[0, inner]` and 0 on `[outer, inf)`.
///
/// `chi(s) = h(outer - s) / (h(outer - s) + h(s - inner))` with
/// `h(u) = exp(-1/u)` for `u > 0`, evaluated in logistic form so narrow bands
/// do not underflow. Returns `(chi(s), chi'(s))`.
pub fn smooth_step(s: f64, inner: f64, outer: f64) -> (f64, f64) {
    if s <= inner {
        return (1.0, 0.0);
    }
    if s >= outer {
        return (0.0, 0.0);
    }
    let a = outer - s;
    let b = s - inner;
    // chi = 1 / (1 + exp(z)),  z = 1/a - 1/b
    let z = 1.0 / a - 1.0 / b;
    let chi = if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    };
    let spread = chi * (1.0 - chi);
    let slope = if spread == 0.0 {
        0.0
    } else {
        -spread * (1.0 / (a * a) + 1.0 / (b * b))
    };
    (chi, slope)
}

/// Arithmetic needed to walk an expression tree: plain values and jets.
pub(crate) trait Scalar: Copy {
    fn lift(&self, c: f64) -> Self;
    fn val(&self) -> f64;
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
    fn div(self, rhs: Self) -> Self;
    fn neg(self) -> Self;
    fn apply(self, f: f64, df: impl FnOnce() -> f64) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn val(&self) -> f64 {
        *self
    }
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    fn div(self, rhs: Self) -> Self {
        self / rhs
    }
    fn neg(self) -> Self {
        -self
    }
    fn apply(self, f: f64, _df: impl FnOnce() -> f64) -> Self {
        f
    }
}

impl Scalar for Jet {
    fn lift(&self, c: f64) -> Self {
        Jet::constant(c, self.dim())
    }
    fn val(&self) -> f64 {
        self.value()
    }
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    fn div(self, rhs: Self) -> Self {
        self / rhs
    }
    fn neg(self) -> Self {
        -self
    }
    fn apply(self, f: f64, df: impl FnOnce() -> f64) -> Self {
        self.chain(f, df())
    }
}

fn powi<S: Scalar>(x: S, n: i32) -> Result<S, EvalError> {
    let v = x.val();
    if n < 0 && v == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(x.apply(v.powi(n), || n as f64 * v.powi(n - 1)))
}

fn walk<S: Scalar>(expr: &Expr, vars: &[S], probe: S, wants_slope: bool) -> Result<S, EvalError> {
    Ok(match expr.node() {
        Node::Const(c) => probe.lift(*c),
        Node::Var(i) => *vars.get(*i).ok_or(EvalError::PointTooShort {
            got: vars.len(),
            need: i + 1,
        })?,
        Node::Neg(e) => walk(e, vars, probe, wants_slope)?.neg(),
        Node::Binary(op, a, b) => {
            let a = walk(a, vars, probe, wants_slope)?;
            let b = walk(b, vars, probe, wants_slope)?;
            match op {
                BinOp::Add => a.add(b),
                BinOp::Sub => a.sub(b),
                BinOp::Mul => a.mul(b),
                BinOp::Div => {
                    if b.val() == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a.div(b)
                }
            }
        }
        Node::Pow(base, n) => powi(walk(base, vars, probe, wants_slope)?, *n)?,
        Node::Call(func, e) => {
            let x = walk(e, vars, probe, wants_slope)?;
            let v = x.val();
            match func {
                Func::Sin => x.apply(v.sin(), || v.cos()),
                Func::Cos => x.apply(v.cos(), || -v.sin()),
                Func::Exp => {
                    let ev = v.exp();
                    x.apply(ev, || ev)
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError::NegativeSqrt(v));
                    }
                    if v == 0.0 && wants_slope {
                        return Err(EvalError::SqrtAtZero);
                    }
                    let r = v.sqrt();
                    x.apply(r, || 0.5 / r)
                }
            }
        }
        Node::Cutoff { arg, inner, outer } => {
            let q = walk(arg, vars, probe, wants_slope)?;
            let qv = q.val();
            if qv < 0.0 {
                return Err(EvalError::NegativeCutoffArg(qv));
            }
            let s = qv.sqrt();
            let (chi, dchi) = smooth_step(s, *inner, *outer);
            // d chi / d q = chi'(s) / (2 s); chi' vanishes on the plateau.
            q.apply(chi, || if dchi == 0.0 { 0.0 } else { dchi / (2.0 * s) })
        }
    })
}

impl Expr {
    /// Pointwise value at `point = (t, x2, ..., xm)`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        walk(self, point, 0.0, false)
    }

    /// Value and exact first partials at `point` (forward mode).
    pub fn eval_jet(&self, point: &[f64]) -> Result<Jet, EvalError> {
        let dim = point.len();
        let seeds: Vec<Jet> = point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(v, i, dim))
            .collect();
        self.eval_jet_seeded(&seeds)
    }

    /// Jet evaluation with caller-provided seed jets, one per coordinate.
    pub fn eval_jet_seeded(&self, seeds: &[Jet]) -> Result<Jet, EvalError> {
        let probe = Jet::constant(0.0, seeds.first().map_or(0, |j| j.dim()));
        walk(self, seeds, probe, true)
    }
}
