//! Constructions of semi-strong pairs around the core loop, their smooth
//! extension to the chart ball, and the two rescalings that make `|alpha|`
//! maximal along the loop.
//!
//! All outputs are expression fields, so they can be written out as system
//! documents and reloaded. The radial blend uses the `cutoff` node.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chartgeom::{CovectorField, GeomError, MetricField, SystemChart};
use crate::fieldexpr::{smooth_step, Expr, NotDifferentiable};
use crate::sampling::ball_grid;
use crate::verifier::{self, Classification, VerificationReport, VerifyConfig};

/// Margin applied to the innermost indefinite lattice radius.
pub const RADIUS_MARGIN: f64 = 0.95;
/// Below this the validity search is considered collapsed.
pub const MIN_RADIUS: f64 = 1e-3;
/// Max-min of `alpha(e1)` on the axis accepted as constant.
pub const PAIRING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error("bump radii must satisfy 0 < r0 < r1 <= R, got r0 = {r0}, r1 = {r1}, R = {radius}")]
    InvalidBump { r0: f64, r1: f64, radius: f64 },
    #[error("core loop is not a geodesic: residual {residual:e}")]
    NotAGeodesic { residual: f64 },
    #[error("kernel condition fails on the axis: residual {residual:e}")]
    KernelConditionFailed { residual: f64 },
    #[error("alpha(e1) varies along the loop by {spread:e}")]
    NonConstantPairing { spread: f64 },
    #[error("alpha(e1) = {value} on the loop; a positive constant is required")]
    NonPositivePairing { value: f64 },
    #[error("positive-definite region collapses to radius {radius:e}")]
    NoPositiveRadius { radius: f64 },
    #[error("input is not semi-strong ({classification:?}, failing `{check}`)")]
    NotSemiStrong { classification: Classification, check: String },
    #[error("|alpha|^2 = {value} at {point:?}; must be positive on the chart ball")]
    NonPositiveRho { value: f64, point: Vec<f64> },
    #[error("scale factor must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("exterior data has dimension {got}, system has {dim}")]
    ExteriorDimension { got: usize, dim: usize },
    #[error(transparent)]
    NotDifferentiable(#[from] NotDifferentiable),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Radial profile `chi(|x|)`: 1 on `[0, r0]`, 0 on `[r1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpProfile {
    pub r0: f64,
    pub r1: f64,
}

impl BumpProfile {
    pub fn new(r0: f64, r1: f64, radius: f64) -> Result<Self, ConstructError> {
        if !(r0 > 0.0 && r0 < r1 && r1 <= radius * (1.0 + 1e-12)) {
            return Err(ConstructError::InvalidBump { r0, r1, radius });
        }
        Ok(BumpProfile { r0, r1 })
    }

    /// `r0 = 0.4 R`, `r1 = 0.8 R`.
    pub fn default_for(radius: f64) -> Self {
        BumpProfile {
            r0: 0.4 * radius,
            r1: 0.8 * radius,
        }
    }

    pub fn validate(&self, radius: f64) -> Result<(), ConstructError> {
        BumpProfile::new(self.r0, self.r1, radius).map(|_| ())
    }

    /// `chi(|x|)` as a field on an `dim`-dimensional chart.
    pub fn field(&self, dim: usize) -> Expr {
        let q = Expr::sum((1..dim).map(|k| Expr::var(k).powi(2)));
        q.cutoff(self.r0, self.r1)
    }
}

pub fn bump(profile: &BumpProfile, s: f64) -> f64 {
    smooth_step(s, profile.r0, profile.r1).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructKind {
    AlphaFromMetric,
    MetricFromAlpha,
    RescaleMetric,
    RescaleAlpha,
}

#[derive(Debug, Clone)]
pub struct ConstructionReport {
    pub system: SystemChart,
    pub certified_radius: f64,
    pub verification: VerificationReport,
    pub provenance: String,
    /// Factor applied to the period to make `alpha(e1) = 1` (1 if none).
    pub period_scale: f64,
    pub beta: Option<f64>,
}

fn blend(chi: &Expr, inner: &Expr, outer: &Expr) -> Expr {
    if inner == outer {
        return inner.clone();
    }
    chi.clone() * inner.clone() + (Expr::one() - chi.clone()) * outer.clone()
}

fn finish(
    system: SystemChart,
    certified_radius: f64,
    provenance: &str,
    period_scale: f64,
    beta: Option<f64>,
    cfg: &VerifyConfig,
) -> ConstructionReport {
    let verification = verifier::classify_with(&system, cfg);
    ConstructionReport {
        system,
        certified_radius,
        verification,
        provenance: provenance.to_string(),
        period_scale,
        beta,
    }
}

/// `alpha` from the metric: `V_1 = g_11(t,0) + sum_l d_1 g_l1(t,0) x_l`,
/// `V_l = g_l1(t,0)` inside `r0`, blended to `exterior` (default zero).
pub fn build_alpha_from_metric(
    sys: &SystemChart,
    exterior: Option<&CovectorField>,
    profile: &BumpProfile,
    cfg: &VerifyConfig,
) -> Result<ConstructionReport, ConstructError> {
    let m = sys.dim();
    profile.validate(sys.frame.radius)?;
    if let Some(ext) = exterior {
        if ext.dim() != m {
            return Err(ConstructError::ExteriorDimension { got: ext.dim(), dim: m });
        }
    }
    let residual = verifier::check_geodesic(sys, cfg.axis_samples);
    if !(residual <= cfg.tol) {
        return Err(ConstructError::NotAGeodesic { residual });
    }
    let column: Vec<Expr> = (0..m).map(|l| sys.metric.get(l, 0).on_axis(m)).collect();
    let mut v1 = column[0].clone();
    for l in 1..m {
        let slope = sys.metric.get(l, 0).derivative(0)?.on_axis(m);
        v1 = v1 + slope * Expr::var(l);
    }
    let mut local = column;
    local[0] = v1;

    let chi = profile.field(m);
    let zero = CovectorField::zero(m);
    let ext = exterior.unwrap_or(&zero);
    let alpha = CovectorField::new(
        local
            .iter()
            .zip(ext.components())
            .map(|(inner, outer)| blend(&chi, inner, outer))
            .collect(),
    );
    let system = SystemChart {
        frame: sys.frame.clone(),
        metric: sys.metric.clone(),
        alpha,
    };
    let radius = system.frame.radius;
    Ok(finish(system, radius, "alpha built from the metric along the core loop", 1.0, None, cfg))
}

/// Metric from `alpha`: normalise `alpha(e1)` to 1 by rescaling the period,
/// take `B(t)^T B(t)` with `B` the identity with first row `V(t,0)`, extend to
/// first order in `x`, blend to `exterior` (default identity), and shrink the
/// radius to the positive-definite region.
pub fn build_metric_from_alpha(
    sys: &SystemChart,
    exterior: Option<&MetricField>,
    profile: &BumpProfile,
    cfg: &VerifyConfig,
) -> Result<ConstructionReport, ConstructError> {
    let m = sys.dim();
    profile.validate(sys.frame.radius)?;
    if let Some(ext) = exterior {
        if ext.dim() != m {
            return Err(ConstructError::ExteriorDimension { got: ext.dim(), dim: m });
        }
    }
    let residual = verifier::check_kernel(sys, cfg.axis_samples);
    if !(residual <= cfg.tol) {
        return Err(ConstructError::KernelConditionFailed { residual });
    }
    let (lo, hi) = verifier::pairing_range(sys, cfg.axis_samples);
    let spread = hi - lo;
    if !(spread <= PAIRING_TOL) {
        return Err(ConstructError::NonConstantPairing { spread });
    }
    let c = 0.5 * (lo + hi);
    if !(c > 0.0) {
        return Err(ConstructError::NonPositivePairing { value: c });
    }

    // t' = c t: V'_1(t', x) = V_1(t'/c, x) / c, V'_l(t', x) = V_l(t'/c, x)
    let mut frame = sys.frame.clone();
    let alpha = if c == 1.0 {
        sys.alpha.clone()
    } else {
        frame.period *= c;
        let slow = Expr::var(0) * (1.0 / c);
        CovectorField::new(
            sys.alpha
                .components()
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let e = e.substitute(0, &slow);
                    if i == 0 {
                        e / c
                    } else {
                        e
                    }
                })
                .collect(),
        )
    };

    let a: Vec<Expr> = (0..m).map(|l| alpha.get(l).on_axis(m)).collect();
    let mut g11 = Expr::one();
    for l in 1..m {
        g11 = g11 + 2.0 * a[l].derivative(0)? * Expr::var(l);
    }
    let local = MetricField::from_fn(m, |i, j| match (i, j) {
        (0, 0) => g11.clone(),
        (0, l) => a[l].clone(),
        (l, k) => {
            let delta = if l == k { Expr::one() } else { Expr::zero() };
            delta + a[l].clone() * a[k].clone()
        }
    });
    let chi = profile.field(m);
    let identity = MetricField::identity(m);
    let ext = exterior.unwrap_or(&identity);
    let metric = MetricField::from_fn(m, |i, j| blend(&chi, local.get(i, j), ext.get(i, j)));

    let mut system = SystemChart { frame, metric, alpha };
    let radius = system.validity_radius(sys.frame.radius, cfg.grid, RADIUS_MARGIN, cfg.exec);
    if !(radius >= MIN_RADIUS) {
        return Err(ConstructError::NoPositiveRadius { radius });
    }
    system.frame.radius = radius;
    Ok(finish(system, radius, "metric built from alpha along the core loop", c, None, cfg))
}

fn minor(rows: &[Vec<Expr>], skip_row: usize, skip_col: usize) -> Vec<Vec<Expr>> {
    rows.iter()
        .enumerate()
        .filter(|(i, _)| *i != skip_row)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != skip_col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

fn determinant(rows: &[Vec<Expr>]) -> Expr {
    match rows.len() {
        0 => Expr::one(),
        1 => rows[0][0].clone(),
        2 => rows[0][0].clone() * rows[1][1].clone() - rows[0][1].clone() * rows[1][0].clone(),
        n => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if rows[0][j].as_const() == Some(0.0) {
                    continue;
                }
                let term = rows[0][j].clone() * determinant(&minor(rows, 0, j));
                acc = if j % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
    }
}

/// `rho = V^T adj(G) V / det G` as an expression.
pub fn alpha_norm_sq_field(sys: &SystemChart) -> Expr {
    let m = sys.dim();
    let rows: Vec<Vec<Expr>> = (0..m)
        .map(|i| (0..m).map(|j| sys.metric.get(i, j).clone()).collect())
        .collect();
    let det = determinant(&rows);
    let v = sys.alpha.components();
    let mut quad = Expr::zero();
    for i in 0..m {
        for j in 0..m {
            if v[i].as_const() == Some(0.0) || v[j].as_const() == Some(0.0) {
                continue;
            }
            // adj(G)_ij = (-1)^(i+j) det(minor_ji)
            let cof = determinant(&minor(&rows, j, i));
            let cof = if (i + j) % 2 == 0 { cof } else { -cof };
            quad = quad + v[i].clone() * cof * v[j].clone();
        }
    }
    quad / det
}

struct RhoExtension {
    tilde: Expr,
    beta: f64,
}

/// `rho~ = rho / c + beta (1 - chi)` with `c` the axis value of `rho`.
fn extend_rho(
    sys: &SystemChart,
    profile: &BumpProfile,
    beta: Option<f64>,
    cfg: &VerifyConfig,
) -> Result<RhoExtension, ConstructError> {
    profile.validate(sys.frame.radius)?;
    let report = verifier::classify_with(sys, cfg);
    if report.classification < Classification::SemiStrong {
        return Err(ConstructError::NotSemiStrong {
            classification: report.classification,
            check: report.failing_check.unwrap_or_default(),
        });
    }
    let points = ball_grid(sys.dim(), sys.frame.period, sys.frame.radius, cfg.grid);
    let values = cfg.exec.try_map(&points, |p| sys.alpha_norm_sq(p))?;
    let (mut sup, mut worst) = (f64::NEG_INFINITY, 0);
    for (k, v) in values.iter().enumerate() {
        if *v <= values[worst] {
            worst = k;
        }
        sup = sup.max(*v);
    }
    if !(values[worst] > 0.0) {
        return Err(ConstructError::NonPositiveRho {
            value: values[worst],
            point: points[worst].clone(),
        });
    }
    let c = report.axis_rho;
    let rho = alpha_norm_sq_field(sys);
    let rho_hat = if c == 1.0 { rho } else { rho / c };
    let beta = beta.unwrap_or(1.0 + sup / c);
    let chi = profile.field(sys.dim());
    Ok(RhoExtension {
        tilde: rho_hat + beta * (Expr::one() - chi),
        beta,
    })
}

/// Conformal rescaling `g~ = rho~ g`.
pub fn rescale_metric(
    sys: &SystemChart,
    profile: &BumpProfile,
    beta: Option<f64>,
    cfg: &VerifyConfig,
) -> Result<ConstructionReport, ConstructError> {
    let ext = extend_rho(sys, profile, beta, cfg)?;
    let metric = sys.metric.map(|g| ext.tilde.clone() * g.clone());
    let system = SystemChart {
        frame: sys.frame.clone(),
        metric,
        alpha: sys.alpha.clone(),
    };
    let radius = system.frame.radius;
    Ok(finish(system, radius, "metric rescaled conformally by the extended |alpha|^2", 1.0, Some(ext.beta), cfg))
}

/// `alpha~ = alpha / sqrt(rho~)`.
pub fn rescale_alpha(
    sys: &SystemChart,
    profile: &BumpProfile,
    beta: Option<f64>,
    cfg: &VerifyConfig,
) -> Result<ConstructionReport, ConstructError> {
    let ext = extend_rho(sys, profile, beta, cfg)?;
    let root = ext.tilde.sqrt();
    let alpha = sys.alpha.map(|v| v.clone() / root.clone());
    let system = SystemChart {
        frame: sys.frame.clone(),
        metric: sys.metric.clone(),
        alpha,
    };
    let radius = system.frame.radius;
    Ok(finish(system, radius, "alpha rescaled by the extended |alpha|^-1", 1.0, Some(ext.beta), cfg))
}

/// The system `(g, c alpha)` in the chart where its core loop is again
/// parametrised with `alpha(e1) = |e1|^2`: `t = c s`, period `T / c`,
/// `g'_11 = c^2 g_11`, `g'_1l = c g_1l`, `V'_1 = c^2 V_1`, `V'_l = c V_l`.
pub fn scale_alpha(sys: &SystemChart, c: f64) -> Result<SystemChart, ConstructError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ConstructError::InvalidScale(c));
    }
    let fast = Expr::var(0) * c;
    let weight = |i: usize| if i == 0 { c } else { 1.0 };
    let metric = MetricField::from_fn(sys.dim(), |i, j| {
        sys.metric.get(i, j).substitute(0, &fast) * (weight(i) * weight(j))
    });
    let alpha = CovectorField::new(
        sys.alpha
            .components()
            .iter()
            .enumerate()
            .map(|(i, v)| v.substitute(0, &fast) * (c * weight(i)))
            .collect(),
    );
    let mut frame = sys.frame.clone();
    frame.period /= c;
    frame.exterior_alpha_bound = frame.exterior_alpha_bound.map(|b| b * c);
    frame.name = format!("{}*{c}", frame.name);
    Ok(SystemChart { frame, metric, alpha })
}

/// Options carried by a construction directive.
#[derive(Debug, Clone, Default)]
pub struct ConstructOptions {
    pub profile: Option<BumpProfile>,
    pub beta: Option<f64>,
    pub exterior_metric: Option<MetricField>,
    pub exterior_alpha: Option<CovectorField>,
}

pub fn construct(
    kind: ConstructKind,
    sys: &SystemChart,
    opts: &ConstructOptions,
    cfg: &VerifyConfig,
) -> Result<ConstructionReport, ConstructError> {
    let profile = opts
        .profile
        .unwrap_or_else(|| BumpProfile::default_for(sys.frame.radius));
    match kind {
        ConstructKind::AlphaFromMetric => build_alpha_from_metric(sys, opts.exterior_alpha.as_ref(), &profile, cfg),
        ConstructKind::MetricFromAlpha => build_metric_from_alpha(sys, opts.exterior_metric.as_ref(), &profile, cfg),
        ConstructKind::RescaleMetric => rescale_metric(sys, &profile, opts.beta, cfg),
        ConstructKind::RescaleAlpha => rescale_alpha(sys, &profile, opts.beta, cfg),
    }
}

/// Default strong-type normal form used by the CLI `--rescale` switch.
pub fn rescaled(sys: &SystemChart) -> Result<SystemChart, ConstructError> {
    let profile = BumpProfile::default_for(sys.frame.radius);
    Ok(rescale_metric(sys, &profile, None, &VerifyConfig::default())?.system)
}
