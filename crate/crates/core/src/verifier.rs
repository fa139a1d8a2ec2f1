//! Numerical certification of the local conditions along the core loop.
//!
//! Every residual is a sup over a finite sample set (uniform `t`-samples on
//! the axis, or the ball lattice for maximality); it certifies that set only.
//! A sample where evaluation fails contributes an infinite residual.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chartgeom::{LocalGeometry, SystemChart};
use crate::exec::{fold_max, Exec};
use crate::fieldexpr::check_t_periodicity;
use crate::sampling::{axis_times, ball_grid, GridSpec};

pub const DEFAULT_AXIS_SAMPLES: usize = 512;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("precondition failed: {check} residual {residual:e} exceeds {tol:e}")]
    PreconditionFailed { check: &'static str, residual: f64, tol: f64 },
    #[error("system `{0}` declares no exterior bound on |alpha|")]
    MissingExteriorBound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub axis_samples: usize,
    pub tol: f64,
    pub margin_tol: f64,
    pub grid: GridSpec,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            axis_samples: DEFAULT_AXIS_SAMPLES,
            tol: DEFAULT_TOL,
            margin_tol: DEFAULT_MARGIN_TOL,
            grid: GridSpec::default(),
            exec: Exec::default(),
        }
    }
}

fn axis_max(sys: &SystemChart, n: usize, exec: Exec, f: impl Fn(&LocalGeometry) -> f64 + Sync + Send) -> f64 {
    let times = axis_times(sys.frame.period, n);
    fold_max(exec.map(&times, |&t| match sys.local(&sys.frame.axis_point(t)) {
        Ok(local) => f(&local),
        Err(_) => f64::INFINITY,
    }))
    .max(0.0)
}

fn dual_residual(l: &LocalGeometry) -> f64 {
    (0..l.dim())
        .map(|i| (l.alpha[i] - l.metric[(i, 0)]).abs())
        .fold(0.0, f64::max)
}

fn kernel_residual(l: &LocalGeometry) -> f64 {
    let dv = &l.alpha_jacobian;
    (1..l.dim())
        .map(|k| (dv[(k, 0)] - dv[(0, k)]).abs())
        .fold(0.0, f64::max)
}

fn geodesic_residual(l: &LocalGeometry) -> f64 {
    let dg = &l.metric_partials;
    (0..l.dim())
        .map(|k| (2.0 * dg[0][(k, 0)] - dg[k][(0, 0)]).abs())
        .fold(0.0, f64::max)
}

fn key_lemma_pair(l: &LocalGeometry) -> (f64, f64) {
    let grad = l.alpha_norm_sq_gradient();
    let mut ad: f64 = 0.0;
    let mut identity: f64 = 0.0;
    for k in 0..l.dim() {
        let route = 2.0 * l.alpha_jacobian[(0, k)] - l.metric_partials[k][(0, 0)];
        ad = ad.max(grad[k].abs());
        identity = identity.max((route - grad[k]).abs());
    }
    (ad, identity)
}

fn lorentz_kernel_residual(l: &LocalGeometry) -> f64 {
    l.lorentz().column(0).abs().max()
}

/// `max_t |V(t,0) - G(t,0) e1|`.
pub fn check_dual(sys: &SystemChart, n_samples: usize) -> f64 {
    axis_max(sys, n_samples, Exec::default(), dual_residual)
}

/// `max_{t,l} |d_1 V_l - d_l V_1|` on the axis.
pub fn check_kernel(sys: &SystemChart, n_samples: usize) -> f64 {
    axis_max(sys, n_samples, Exec::default(), kernel_residual)
}

/// `max_{t,l} |2 d_1 g_l1 - d_l g_11|` on the axis.
pub fn check_geodesic(sys: &SystemChart, n_samples: usize) -> f64 {
    axis_max(sys, n_samples, Exec::default(), geodesic_residual)
}

/// Axis `|d rho|` through the full quadratic form, and its disagreement with
/// `2 dV_1 - d g_11`, without checking hypotheses.
pub fn key_lemma_residuals(sys: &SystemChart, n_samples: usize) -> (f64, f64) {
    let ad = axis_max(sys, n_samples, Exec::default(), |l| key_lemma_pair(l).0);
    let identity = axis_max(sys, n_samples, Exec::default(), |l| key_lemma_pair(l).1);
    (ad, identity)
}

/// Axis residuals of `d rho = 0` by both routes, refusing systems that fail its hypotheses at `tol`.
pub fn check_key_lemma(sys: &SystemChart, n_samples: usize, tol: f64) -> Result<(f64, f64), VerifyError> {
    let hypotheses = [
        ("dual", check_dual(sys, n_samples)),
        ("kernel", check_kernel(sys, n_samples)),
        ("geodesic", check_geodesic(sys, n_samples)),
    ];
    for (check, residual) in hypotheses {
        if !(residual <= tol) {
            return Err(VerifyError::PreconditionFailed { check, residual, tol });
        }
    }
    Ok(key_lemma_residuals(sys, n_samples))
}

/// `max_t |Y(t,0) e1|`.
pub fn check_lorentz_kernel(sys: &SystemChart, n_samples: usize) -> f64 {
    axis_max(sys, n_samples, Exec::default(), lorentz_kernel_residual)
}

/// Axis values of `V_1`; `(min, max)`.
pub fn pairing_range(sys: &SystemChart, n_samples: usize) -> (f64, f64) {
    let times = axis_times(sys.frame.period, n_samples);
    let values: Vec<f64> = times
        .iter()
        .map(|&t| sys.alpha.get(0).eval(&sys.frame.axis_point(t)).unwrap_or(f64::NAN))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return (f64::NAN, f64::NAN);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// `max - min` of `alpha(e1)` along the loop.
pub fn check_pairing(sys: &SystemChart, n_samples: usize) -> f64 {
    let (min, max) = pairing_range(sys, n_samples);
    let spread = max - min;
    if spread.is_nan() {
        f64::INFINITY
    } else {
        spread
    }
}

/// Worst `T`-periodicity defect over every metric and covector entry.
pub fn check_periodicity(sys: &SystemChart, n_samples: usize) -> f64 {
    let period = sys.frame.period;
    let metric = sys.metric.entries().map(|(_, e)| e);
    let alpha = sys.alpha.components().iter();
    metric
        .chain(alpha)
        .map(|e| check_t_periodicity(e, period, n_samples))
        .fold(0.0, f64::max)
}

/// Largest `rho` over the axis samples.
pub fn axis_rho(sys: &SystemChart, n_samples: usize) -> f64 {
    let times = axis_times(sys.frame.period, n_samples);
    fold_max(times.iter().map(|&t| {
        sys.alpha_norm_sq(&sys.frame.axis_point(t)).unwrap_or(f64::NAN)
    }))
}

/// Grid sup of `rho` over the chart ball.
pub fn grid_rho_sup(sys: &SystemChart, grid: GridSpec, exec: Exec) -> f64 {
    let points = ball_grid(sys.dim(), sys.frame.period, sys.frame.radius, grid);
    fold_max(exec.map(&points, |p| sys.alpha_norm_sq(p).unwrap_or(f64::NAN)))
}

/// `sup_grid rho - rho(axis)`; positive when `|alpha|` peaks off the loop.
pub fn maximality_margin(sys: &SystemChart, grid: GridSpec, n_samples: usize, exec: Exec) -> f64 {
    let axis = axis_rho(sys, n_samples);
    let sup = grid_rho_sup(sys, grid, exec);
    if sup.is_nan() || axis.is_nan() {
        return f64::INFINITY;
    }
    sup.max(axis) - axis
}

pub fn check_strong_maximality(sys: &SystemChart, grid: GridSpec) -> Result<f64, VerifyError> {
    if sys.frame.exterior_alpha_bound.is_none() {
        return Err(VerifyError::MissingExteriorBound(sys.frame.name.clone()));
    }
    Ok(maximality_margin(sys, grid, DEFAULT_AXIS_SAMPLES, Exec::default()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Fails,
    GeodesicType,
    SemiStrong,
    Strong,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Fails => "fails",
            Classification::GeodesicType => "geodesic_type",
            Classification::SemiStrong => "semi_strong",
            Classification::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub dual: f64,
    pub kernel: f64,
    pub geodesic: f64,
    pub key_lemma_ad: f64,
    pub key_lemma_identity: f64,
    pub lorentz_kernel: f64,
    pub pairing_constancy: f64,
    pub strong_maximality_margin: f64,
    pub field_periodicity: f64,
}

impl Residuals {
    pub fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("dual", self.dual),
            ("kernel", self.kernel),
            ("geodesic", self.geodesic),
            ("key_lemma_ad", self.key_lemma_ad),
            ("key_lemma_identity", self.key_lemma_identity),
            ("lorentz_kernel", self.lorentz_kernel),
            ("pairing_constancy", self.pairing_constancy),
            ("strong_maximality_margin", self.strong_maximality_margin),
            ("field_periodicity", self.field_periodicity),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub system: String,
    pub classification: Classification,
    /// First check that blocked the next class up, if any.
    pub failing_check: Option<String>,
    pub residuals: Residuals,
    /// `alpha(e1)` on the loop (mean of the axis range).
    pub pairing: f64,
    /// `|alpha|^2` on the loop.
    pub axis_rho: f64,
    pub tolerances: VerifyConfig,
    /// Declarations a `strong` verdict rests on.
    pub conditional_on: Vec<String>,
}

impl VerificationReport {
    pub fn at_least(&self, class: Classification) -> bool {
        self.classification >= class
    }
}

pub fn classify(sys: &SystemChart) -> VerificationReport {
    classify_with(sys, &VerifyConfig::default())
}

pub fn classify_with(sys: &SystemChart, cfg: &VerifyConfig) -> VerificationReport {
    let n = cfg.axis_samples;
    let exec = cfg.exec;
    let pair = |l: &LocalGeometry| key_lemma_pair(l);
    let (pairing_min, pairing_max) = pairing_range(sys, n);
    let rho_axis = axis_rho(sys, n);
    let residuals = Residuals {
        dual: axis_max(sys, n, exec, dual_residual),
        kernel: axis_max(sys, n, exec, kernel_residual),
        geodesic: axis_max(sys, n, exec, geodesic_residual),
        key_lemma_ad: axis_max(sys, n, exec, |l| pair(l).0),
        key_lemma_identity: axis_max(sys, n, exec, |l| pair(l).1),
        lorentz_kernel: axis_max(sys, n, exec, lorentz_kernel_residual),
        pairing_constancy: check_pairing(sys, n),
        strong_maximality_margin: maximality_margin(sys, cfg.grid, n, exec),
        field_periodicity: check_periodicity(sys, n),
    };
    let tol = cfg.tol;
    let ok = |r: f64| r <= tol;

    let geodesic_checks = [
        ("field_periodicity", residuals.field_periodicity),
        ("geodesic", residuals.geodesic),
        ("kernel", residuals.kernel),
        ("lorentz_kernel", residuals.lorentz_kernel),
    ];
    let semi_checks = [
        ("dual", residuals.dual),
        ("pairing_constancy", residuals.pairing_constancy),
        ("key_lemma_ad", residuals.key_lemma_ad),
        ("key_lemma_identity", residuals.key_lemma_identity),
    ];

    let mut conditional_on = Vec::new();
    let (classification, failing_check) = 'verdict: {
        if let Some((name, _)) = geodesic_checks.iter().find(|(_, r)| !ok(*r)) {
            break 'verdict (Classification::Fails, Some(name.to_string()));
        }
        if let Some((name, _)) = semi_checks.iter().find(|(_, r)| !ok(*r)) {
            break 'verdict (Classification::GeodesicType, Some(name.to_string()));
        }
        if !(pairing_min > 0.0) {
            break 'verdict (Classification::GeodesicType, Some("pairing_positive".into()));
        }
        if !(residuals.strong_maximality_margin <= cfg.margin_tol) {
            break 'verdict (Classification::SemiStrong, Some("strong_maximality_margin".into()));
        }
        if !sys.frame.flags.gamma_nullhomologous {
            break 'verdict (Classification::SemiStrong, Some("gamma_nullhomologous".into()));
        }
        match sys.frame.exterior_alpha_bound {
            Some(b) if b * b <= rho_axis * (1.0 + 1e-12) => {
                conditional_on.push(format!(
                    "declared exterior bound |alpha| <= {b} outside the chart ball"
                ));
                conditional_on.push("declared: core loop is null-homologous".into());
                (Classification::Strong, None)
            }
            _ => (Classification::SemiStrong, Some("exterior_alpha_bound".into())),
        }
    };

    VerificationReport {
        system: sys.frame.name.clone(),
        classification,
        failing_check,
        residuals,
        pairing: 0.5 * (pairing_min + pairing_max),
        axis_rho: rho_axis,
        tolerances: *cfg,
        conditional_on,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::fieldexpr::{parse, Expr};

    fn with_alpha(mut sys: SystemChart, index: usize, src: &str) -> SystemChart {
        let mut comps = sys.alpha.components().to_vec();
        comps[index] = parse(src, sys.dim()).unwrap();
        sys.alpha = crate::chartgeom::CovectorField::new(comps);
        sys
    }

    #[test]
    fn catalog_axis_residuals_vanish() {
        for sys in [catalog::flat(), catalog::helix(), catalog::twist(), catalog::wavy()] {
            let n = 128;
            assert!(check_dual(&sys, n) <= 1e-14);
            assert!(check_kernel(&sys, n) <= 1e-14);
            assert!(check_geodesic(&sys, n) <= 1e-14);
            assert!(check_lorentz_kernel(&sys, n) <= 1e-14);
            let (ad, id) = check_key_lemma(&sys, n, 1e-8).unwrap();
            assert!(ad <= 1e-12 && id <= 1e-12, "{}", sys.frame.name);
        }
    }

    #[test]
    fn dual_fault() {
        let sys = with_alpha(catalog::helix(), 0, "1 + 0.01 * sin(t)");
        let r = check_dual(&sys, 512);
        assert!((r - 0.01).abs() < 1e-5, "{r}");
    }

    #[test]
    fn kernel_fault() {
        let sys = with_alpha(catalog::helix(), 0, "1 + 0.01 * x2");
        assert!((check_kernel(&sys, 64) - 0.01).abs() < 1e-15);
        assert!((check_lorentz_kernel(&sys, 64) - 0.01).abs() < 1e-15);
        assert!(matches!(
            check_key_lemma(&sys, 64, 1e-8),
            Err(VerifyError::PreconditionFailed { check: "kernel", .. })
        ));
    }

    #[test]
    fn sin_coupling_is_invisible_on_axis() {
        // d_1 V_2 = cos(t) x2 and d_2 V_1 = 0 both vanish at x = 0
        let sys = with_alpha(catalog::flat(), 1, "sin(t) * x2");
        assert!(check_kernel(&sys, 64) <= 1e-15);
    }

    #[test]
    fn geodesic_fault() {
        let mut sys = catalog::wavy();
        sys.metric = sys.metric.map(|e| {
            if *e == parse("1 + x2 * cos(t)", 3).unwrap() {
                Expr::one()
            } else {
                e.clone()
            }
        });
        let r = check_geodesic(&sys, 512);
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn maximality_margins() {
        let helix = catalog::helix();
        let margin = check_strong_maximality(&helix, GridSpec::default()).unwrap();
        assert!((margin - 0.25).abs() < 1e-12, "{margin}");
        assert_eq!(check_strong_maximality(&catalog::flat(), GridSpec::default()), Ok(0.0));
        let mut bare = helix.clone();
        bare.frame.exterior_alpha_bound = None;
        assert!(matches!(
            check_strong_maximality(&bare, GridSpec::default()),
            Err(VerifyError::MissingExteriorBound(_))
        ));
    }

    #[test]
    fn classification_examples() {
        let flat = classify(&catalog::flat());
        assert_eq!(flat.classification, Classification::Strong);
        assert!(!flat.conditional_on.is_empty());
        let helix = classify(&catalog::helix());
        assert_eq!(helix.classification, Classification::SemiStrong);
        assert_eq!(helix.failing_check.as_deref(), Some("strong_maximality_margin"));
        let broken = classify(&with_alpha(catalog::helix(), 0, "1 + 0.01 * x2"));
        assert_eq!(broken.classification, Classification::Fails);
        assert_eq!(broken.failing_check.as_deref(), Some("kernel"));
        let drifting = classify(&with_alpha(catalog::flat(), 1, "0.01 * t"));
        assert_eq!(drifting.failing_check.as_deref(), Some("field_periodicity"));
    }
}
