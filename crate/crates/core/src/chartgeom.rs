//! The tubular chart `S^1 x {|x| <= R}` carrying a metric field `G` and the
//! Euclidean dual `V` of the primitive `alpha`, and every pointwise object
//! derived from them.
//!
//! Conventions: coordinates are `(t, x2, ..., xm)`, the core loop is
//! `t -> (t, 0)` with velocity `e1`. The two-form matrix is
//! `Sigma_ij = d_i V_j - d_j V_i`, so `sigma(u, v) = u^T Sigma v`, and the
//! Lorentz force is fixed by `g(Yu, v) = sigma(u, v)`, i.e. `G Y = Sigma^T`.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::fieldexpr::{EvalError, Expr, Jet};
use crate::sampling::{ball_grid, GridSpec};

/// Slack when testing `|x| <= R`.
const CHART_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("point with transverse radius {radius} lies outside the chart ball of radius {limit}")]
    OutOfChart { radius: f64, limit: f64 },
    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("point has {got} coordinates, chart dimension is {dim}")]
    DimensionMismatch { got: usize, dim: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Declared global topology of the core loop; not computable from chart data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFlags {
    #[serde(default)]
    pub gamma_nullhomologous: bool,
    #[serde(default)]
    pub gamma_contractible: bool,
}

/// Chart data shared by every field on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartFrame {
    pub name: String,
    pub dim: usize,
    pub period: f64,
    pub radius: f64,
    pub flags: TopologyFlags,
    /// Declared bound on `|alpha|_g` outside the modelled chart ball.
    pub exterior_alpha_bound: Option<f64>,
}

impl ChartFrame {
    pub fn transverse_radius(&self, p: &[f64]) -> f64 {
        p[1..].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn check_point(&self, p: &[f64]) -> Result<(), GeomError> {
        if p.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                got: p.len(),
                dim: self.dim,
            });
        }
        let radius = self.transverse_radius(p);
        if radius > self.radius * (1.0 + CHART_SLACK) + CHART_SLACK {
            return Err(GeomError::OutOfChart {
                radius,
                limit: self.radius,
            });
        }
        Ok(())
    }

    /// Point on the core loop at parameter `t`.
    pub fn axis_point(&self, t: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        p[0] = t;
        p
    }
}

/// Symmetric metric field; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    dim: usize,
    upper: Vec<Expr>,
}

fn upper_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl MetricField {
    pub fn from_fn(dim: usize, mut entry: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(entry(i, j));
            }
        }
        MetricField { dim, upper }
    }

    pub fn identity(dim: usize) -> Self {
        MetricField::from_fn(dim, |i, j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `g_ij` (0-based indices, symmetric).
    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.upper[upper_index(self.dim, i, j)]
    }

    pub fn map(&self, mut f: impl FnMut(&Expr) -> Expr) -> Self {
        MetricField {
            dim: self.dim,
            upper: self.upper.iter().map(|e| f(e)).collect(),
        }
    }

    /// Upper-triangle entries `((i, j), g_ij)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Expr)> {
        let dim = self.dim;
        (0..dim)
            .flat_map(move |i| (i..dim).map(move |j| (i, j)))
            .zip(self.upper.iter())
    }

    pub fn value_at(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for ((i, j), e) in self.entries() {
            let v = e.eval(p)?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        Ok(g)
    }

    /// `G(p)` and `d_k G(p)` for every coordinate `k`.
    pub fn jets_at(&self, seeds: &[Jet]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), EvalError> {
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        for ((i, j), e) in self.entries() {
            let jet = e.eval_jet_seeded(seeds)?;
            g[(i, j)] = jet.value();
            g[(j, i)] = jet.value();
            for (k, d) in jet.partials().iter().enumerate() {
                dg[k][(i, j)] = *d;
                dg[k][(j, i)] = *d;
            }
        }
        Ok((g, dg))
    }
}

/// Component fields `V_i` of the Euclidean dual of a one-form.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField {
    components: Vec<Expr>,
}

impl CovectorField {
    pub fn new(components: Vec<Expr>) -> Self {
        CovectorField { components }
    }

    pub fn zero(dim: usize) -> Self {
        CovectorField::new(vec![Expr::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn get(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn map(&self, f: impl FnMut(&Expr) -> Expr) -> Self {
        CovectorField::new(self.components.iter().map(f).collect())
    }

    pub fn value_at(&self, p: &[f64]) -> Result<DVector<f64>, EvalError> {
        let values = self
            .components
            .iter()
            .map(|e| e.eval(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DVector::from_vec(values))
    }

    /// `V(p)` and the Jacobian `dV[(i, k)] = d_k V_i`.
    pub fn jets_at(&self, seeds: &[Jet]) -> Result<(DVector<f64>, DMatrix<f64>), EvalError> {
        let n = self.dim();
        let mut v = DVector::zeros(n);
        let mut dv = DMatrix::zeros(n, n);
        for (i, e) in self.components.iter().enumerate() {
            let jet = e.eval_jet_seeded(seeds)?;
            v[i] = jet.value();
            for (k, d) in jet.partials().iter().enumerate() {
                dv[(i, k)] = *d;
            }
        }
        Ok((v, dv))
    }
}

/// Dense `m x m x m` array; for Christoffel symbols `get(k, i, j) = Gamma^k_ij`.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for k in 0..self.dim {
            let slice = &self.data[k * self.dim * self.dim..(k + 1) * self.dim * self.dim];
            list.entry(&slice);
        }
        list.finish()
    }
}

/// An exact magnetic system `(chart, g, d alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemChart {
    pub frame: ChartFrame,
    pub metric: MetricField,
    pub alpha: CovectorField,
}

/// All first-order data of `(G, V)` at one chart point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    /// `metric_partials[k] = d_k G`.
    pub metric_partials: Vec<DMatrix<f64>>,
    pub alpha: DVector<f64>,
    /// `alpha_jacobian[(i, k)] = d_k V_i`.
    pub alpha_jacobian: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

fn factor(g: DMatrix<f64>, p: &[f64]) -> Result<Cholesky<f64, Dyn>, GeomError> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::NotPositiveDefinite { point: p.to_vec() });
    }
    g.cholesky()
        .ok_or_else(|| GeomError::NotPositiveDefinite { point: p.to_vec() })
}

fn seeds(p: &[f64]) -> Vec<Jet> {
    p.iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(v, i, p.len()))
        .collect()
}

impl LocalGeometry {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn metric_inverse_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    pub fn metric_inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn christoffel(&self) -> Tensor3 {
        let n = self.dim();
        let ginv = self.metric_inverse();
        let dg = &self.metric_partials;
        let mut gamma = Tensor3::zeros(n);
        for i in 0..n {
            for j in i..n {
                // lowered symbol  [ij, l] = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
                let lowered = DVector::from_fn(n, |l, _| {
                    0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)])
                });
                let raised = &ginv * lowered;
                for k in 0..n {
                    gamma.set(k, i, j, raised[k]);
                    gamma.set(k, j, i, raised[k]);
                }
            }
        }
        gamma
    }

    /// `Sigma_ij = d_i V_j - d_j V_i`.
    pub fn two_form(&self) -> DMatrix<f64> {
        let dv = &self.alpha_jacobian;
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| dv[(j, i)] - dv[(i, j)])
    }

    /// `Y = G^{-1} Sigma^T`.
    pub fn lorentz(&self) -> DMatrix<f64> {
        self.chol.solve(&self.two_form().transpose())
    }

    /// `rho = <V, G^{-1} V>`.
    pub fn alpha_norm_sq(&self) -> f64 {
        self.alpha.dot(&self.chol.solve(&self.alpha))
    }

    /// `d_k rho = 2 <d_k V, G^{-1} V> - <G^{-1} V, (d_k G) G^{-1} V>`.
    pub fn alpha_norm_sq_gradient(&self) -> DVector<f64> {
        let w = self.chol.solve(&self.alpha);
        DVector::from_fn(self.dim(), |k, _| {
            let dvk = self.alpha_jacobian.column(k);
            2.0 * dvk.dot(&w) - w.dot(&(&self.metric_partials[k] * &w))
        })
    }

    pub fn energy(&self, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&(&self.metric * v))
    }

    /// Geodesic spray plus Lorentz force: `-Gamma(v, v) + Y v`.
    pub fn acceleration(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let dg = &self.metric_partials;
        // G * Gamma(v,v) = w with w_l = sum_ij (d_i g_lj - 1/2 d_l g_ij) v_i v_j
        let dg_v: Vec<DVector<f64>> = (0..n).map(|k| &dg[k] * v).collect();
        let mut rhs = DVector::zeros(n);
        for l in 0..n {
            let mut w = 0.0;
            for i in 0..n {
                w += v[i] * dg_v[i][l];
            }
            w -= 0.5 * v.dot(&dg_v[l]);
            rhs[l] = -w;
        }
        rhs += self.two_form().transpose() * v;
        self.chol.solve(&rhs)
    }
}

impl SystemChart {
    pub fn dim(&self) -> usize {
        self.frame.dim
    }

    /// Full first-order data at `p`, with the chart and positivity checks.
    pub fn local(&self, p: &[f64]) -> Result<LocalGeometry, GeomError> {
        self.frame.check_point(p)?;
        let seeds = seeds(p);
        let (metric, metric_partials) = self.metric.jets_at(&seeds)?;
        let (alpha, alpha_jacobian) = self.alpha.jets_at(&seeds)?;
        let chol = factor(metric.clone(), p)?;
        Ok(LocalGeometry {
            point: p.to_vec(),
            metric,
            metric_partials,
            alpha,
            alpha_jacobian,
            chol,
        })
    }

    /// `G(p)`, verified positive definite.
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeomError> {
        self.frame.check_point(p)?;
        let g = self.metric.value_at(p)?;
        factor(g.clone(), p)?;
        Ok(g)
    }

    pub fn christoffel(&self, p: &[f64]) -> Result<Tensor3, GeomError> {
        Ok(self.local(p)?.christoffel())
    }

    pub fn two_form_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeomError> {
        self.frame.check_point(p)?;
        let (_, dv) = self.alpha.jets_at(&seeds(p))?;
        Ok(DMatrix::from_fn(self.dim(), self.dim(), |i, j| dv[(j, i)] - dv[(i, j)]))
    }

    pub fn lorentz_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeomError> {
        Ok(self.local(p)?.lorentz())
    }

    /// `E = 1/2 v^T G(p) v`.
    pub fn energy(&self, p: &[f64], v: &[f64]) -> Result<f64, GeomError> {
        self.frame.check_point(p)?;
        let g = self.metric.value_at(p)?;
        let v = DVector::from_column_slice(v);
        Ok(0.5 * v.dot(&(&g * &v)))
    }

    /// `rho(p) = |alpha_p|_g^2`.
    pub fn alpha_norm_sq(&self, p: &[f64]) -> Result<f64, GeomError> {
        self.frame.check_point(p)?;
        let g = self.metric.value_at(p)?;
        let chol = factor(g, p)?;
        let a = self.alpha.value_at(p)?;
        Ok(a.dot(&chol.solve(&a)))
    }

    /// `L(p, v) + kappa = 1/2 v^T G v - <V, v> + kappa`.
    pub fn lagrangian(&self, p: &[f64], v: &[f64], kappa: f64) -> Result<f64, GeomError> {
        self.frame.check_point(p)?;
        let g = self.metric.value_at(p)?;
        let a = self.alpha.value_at(p)?;
        let v = DVector::from_column_slice(v);
        Ok(0.5 * v.dot(&(&g * &v)) - a.dot(&v) + kappa)
    }

    /// Same system with `alpha` replaced by `-alpha` (magnetic field reversed).
    pub fn reversed_field(&self) -> SystemChart {
        SystemChart {
            frame: self.frame.clone(),
            metric: self.metric.clone(),
            alpha: self.alpha.map(|e| -e),
        }
    }
}

/// Outcome of a positive-definiteness search over a ball lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessAudit {
    pub radius: f64,
    pub points: usize,
    /// Failing point of smallest transverse radius, if any.
    pub first_failure: Option<Vec<f64>>,
}

impl DefinitenessAudit {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }

    /// Transverse radius of the innermost failure.
    pub fn failure_radius(&self) -> Option<f64> {
        self.first_failure
            .as_ref()
            .map(|p| p[1..].iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

fn is_positive_definite(metric: &MetricField, p: &[f64]) -> bool {
    match metric.value_at(p) {
        Ok(g) => factor(g, p).is_ok(),
        Err(_) => false,
    }
}

impl SystemChart {
    /// Check `G > 0` on the lattice of the ball of the given radius, which may
    /// exceed the declared chart radius.
    pub fn definiteness_audit(&self, radius: f64, grid: GridSpec, exec: Exec) -> DefinitenessAudit {
        let points = ball_grid(self.dim(), self.frame.period, radius, grid);
        let failures = exec.map(&points, |p| !is_positive_definite(&self.metric, p));
        let first_failure = points
            .iter()
            .zip(failures)
            .filter(|(_, failed)| *failed)
            .map(|(p, _)| p)
            .min_by(|a, b| {
                let ra: f64 = a[1..].iter().map(|x| x * x).sum();
                let rb: f64 = b[1..].iter().map(|x| x * x).sum();
                ra.total_cmp(&rb)
            })
            .cloned();
        DefinitenessAudit {
            radius,
            points: points.len(),
            first_failure,
        }
    }

    /// Audit over the declared chart ball.
    pub fn check_positive_definite(&self, grid: GridSpec, exec: Exec) -> Result<(), GeomError> {
        match self.definiteness_audit(self.frame.radius, grid, exec).first_failure {
            None => Ok(()),
            Some(point) => Err(GeomError::NotPositiveDefinite { point }),
        }
    }

    /// Largest radius up to `search_radius` on whose lattice `G > 0`, pulled in
    /// by `margin` from the innermost failing point.
    pub fn validity_radius(&self, search_radius: f64, grid: GridSpec, margin: f64, exec: Exec) -> f64 {
        match self.definiteness_audit(search_radius, grid, exec).failure_radius() {
            None => search_radius,
            Some(r) => r * margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_identity_and_zero_objects() {
        let sys = catalog::flat();
        let p = [1.3, 0.2, -0.4];
        assert_eq!(sys.metric_at(&p).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(sys.christoffel(&p).unwrap().max_abs(), 0.0);
        assert_eq!(sys.two_form_at(&p).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(sys.lorentz_at(&p).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(sys.alpha_norm_sq(&p).unwrap(), 1.0);
        assert_eq!(sys.energy(&p, &[1.0, 0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(sys.energy(&p, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(sys.lagrangian(&p, &[0.0, 0.0, 0.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn wavy_metric_value() {
        let sys = catalog::wavy();
        let g = sys.metric_at(&[0.0, 0.1, 0.0]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.1, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(g, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.energy(&[0.0, 0.1, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 0.55, epsilon = 1e-15);
    }

    #[test]
    fn helix_and_twist_two_forms() {
        let p = [0.4, 0.3, -0.2];
        let s = catalog::helix().two_form_at(&p).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 1., 0., -1., 0.]);
        assert_eq!(s, expected);
        let s = catalog::twist().two_form_at(&p).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 2., 0., -2., 0.]);
        assert_eq!(s, expected);
        assert_abs_diff_eq!(catalog::helix().alpha_norm_sq(&p).unwrap(), 1.09, epsilon = 1e-15);
    }

    #[test]
    fn twist_lorentz_sign_audit() {
        let sys = catalog::twist();
        let p = [0.0, 0.1, 0.2];
        let y = sys.lorentz_at(&p).unwrap();
        let g = sys.metric_at(&p).unwrap();
        let sigma = sys.two_form_at(&p).unwrap();
        let e2 = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let e3 = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        let ye2 = &y * &e2;
        // g(Y e2, e3) = sigma(e2, e3) = 2
        assert_abs_diff_eq!((&g * &ye2).dot(&e3), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!((e2.transpose() * &sigma * &e3)[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ye2, DVector::from_column_slice(&[0.0, 0.0, 2.0]), epsilon = 1e-15);
    }

    #[test]
    fn out_of_chart_is_rejected() {
        let sys = catalog::helix();
        let r = sys.frame.radius;
        assert!(matches!(
            sys.metric_at(&[0.0, r * 1.01, 0.0]),
            Err(GeomError::OutOfChart { .. })
        ));
    }

    #[test]
    fn wavy_loses_definiteness_at_unit_radius() {
        // leading minor 1 + x2 cos t - sin^2(t)/4 first vanishes at t = 0, x2 = -1
        let sys = catalog::wavy();
        assert!(sys.check_positive_definite(GridSpec::default(), Exec::Sequential).is_ok());
        let mut wide = sys.clone();
        wide.frame.radius = 1.5;
        assert!(wide.metric_at(&[0.0, -0.9, 0.0]).is_ok());
        assert!(matches!(
            wide.metric_at(&[0.0, -1.1, 0.0]),
            Err(GeomError::NotPositiveDefinite { .. })
        ));
        let audit = wide.definiteness_audit(1.5, GridSpec { t_samples: 64, x_samples: 61 }, Exec::default());
        let r = audit.failure_radius().unwrap();
        assert!((1.0..1.1).contains(&r), "r = {r}");

        // bisection oracle on the minor along t = 0
        let minor = |x2: f64| {
            let g = sys.metric.value_at(&[0.0, x2, 0.0]).unwrap();
            g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]
        };
        let (mut lo, mut hi) = (-1.5, 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if minor(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((hi + 1.0).abs() < 1e-12);
    }

    fn fd_christoffel(sys: &SystemChart, p: &[f64]) -> Tensor3 {
        let n = sys.dim();
        let h = 1e-5;
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[k] += h;
                b[k] -= h;
                (sys.metric.value_at(&a).unwrap() - sys.metric.value_at(&b).unwrap()) / (2.0 * h)
            })
            .collect();
        let ginv = sys.metric.value_at(p).unwrap().try_inverse().unwrap();
        let mut out = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += 0.5 * ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                    }
                    out.set(k, i, j, s);
                }
            }
        }
        out
    }

    #[test]
    fn wavy_christoffel_on_axis() {
        let sys = catalog::wavy();
        let p = [0.0, 0.0, 0.0];
        let gamma = sys.christoffel(&p).unwrap();
        for k in 0..3 {
            assert!(gamma.get(k, 0, 0).abs() < 1e-15);
        }
        let fd = fd_christoffel(&sys, &p);
        assert!((gamma.get(0, 0, 1) - fd.get(0, 0, 1)).abs() <= 1e-6 * (1.0 + fd.get(0, 0, 1).abs()));
        assert!((gamma.get(0, 0, 1) - 0.5).abs() < 1e-15);
        for q in [[0.7, 0.2, -0.1], [2.0, -0.3, 0.25]] {
            let gamma = sys.christoffel(&q).unwrap();
            let fd = fd_christoffel(&sys, &q);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert_eq!(gamma.get(k, i, j), gamma.get(k, j, i));
                        assert!((gamma.get(k, i, j) - fd.get(k, i, j)).abs() <= 1e-6 * (1.0 + fd.get(k, i, j).abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn lorentz_kills_axis_velocity() {
        for sys in [catalog::flat(), catalog::helix(), catalog::twist(), catalog::wavy()] {
            for t in [0.0, 1.0, 2.5] {
                let y = sys.lorentz_at(&sys.frame.axis_point(t)).unwrap();
                assert!(y.column(0).amax() < 1e-14, "{}", sys.frame.name);
            }
        }
    }
}
