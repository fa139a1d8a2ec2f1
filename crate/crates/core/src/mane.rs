//! Strict critical value `c0 = |alpha|_inf^2 / 2` of strong systems, the two
//! bounding directions behind it (pointwise lower bound on `L + c0`, the
//! negative-action family `gamma_r`), and the measure-mixing audit on energy
//! levels below `c0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chartgeom::{GeomError, SystemChart};
use crate::exec::{fold_max, Exec};
use crate::flow::{self, FlowError, IntegratorConfig};
use crate::sampling::{random_ball_point, random_unit, sample_rng};
use crate::verifier::{self, Classification, VerificationReport, VerifyConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManeError {
    #[error("system is {classification:?}, not strong (failing `{check}`)")]
    NotStrongType { classification: Classification, check: String },
    #[error("system `{0}` declares no exterior bound on |alpha|")]
    MissingExteriorBound(String),
    #[error("speed factor r = {0} gives a non-negative orbit action; the mix needs r < 1")]
    PositiveOrbitAction(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

fn require_strong(sys: &SystemChart, cfg: &VerifyConfig) -> Result<VerificationReport, ManeError> {
    let report = verifier::classify_with(sys, cfg);
    if report.classification != Classification::Strong {
        return Err(ManeError::NotStrongType {
            classification: report.classification,
            check: report.failing_check.clone().unwrap_or_default(),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSup {
    /// `sqrt(max rho)` over the ball lattice and the axis samples.
    pub value: f64,
    pub axis_value: f64,
    pub strong: bool,
    pub warning: Option<String>,
}

pub fn alpha_sup(sys: &SystemChart, cfg: &VerifyConfig) -> Result<AlphaSup, ManeError> {
    if sys.frame.exterior_alpha_bound.is_none() {
        return Err(ManeError::MissingExteriorBound(sys.frame.name.clone()));
    }
    let axis = verifier::axis_rho(sys, cfg.axis_samples);
    let grid = verifier::grid_rho_sup(sys, cfg.grid, cfg.exec);
    let sup = fold_max([axis, grid]);
    let class = verifier::classify_with(sys, cfg).classification;
    let strong = class == Classification::Strong;
    let warning = (!strong).then(|| {
        format!("system is {}; the sup is a chart-grid estimate and strong-type conclusions do not apply", class.as_str())
    });
    Ok(AlphaSup {
        value: sup.sqrt(),
        axis_value: axis.sqrt(),
        strong,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub alpha_sup: f64,
    pub c0: f64,
    /// Equal to `c0` when the loop is declared contractible.
    pub c_u: Option<f64>,
    /// `sup_q H(q, 0) = sup rho / 2` for the candidate `theta = 0`.
    pub hamiltonian_sup_theta0: f64,
    pub conditional_on: Vec<String>,
}

pub fn c0(sys: &SystemChart, cfg: &VerifyConfig) -> Result<CriticalValue, ManeError> {
    let report = require_strong(sys, cfg)?;
    let sup = alpha_sup(sys, cfg)?;
    let c0 = 0.5 * sup.value * sup.value;
    let h_sup = 0.5 * fold_max([
        verifier::grid_rho_sup(sys, cfg.grid, cfg.exec),
        verifier::axis_rho(sys, cfg.axis_samples),
    ]);
    let mut conditional_on = report.conditional_on;
    let c_u = if sys.frame.flags.gamma_contractible {
        conditional_on.push("declared: core loop is contractible".into());
        Some(c0)
    } else {
        None
    };
    Ok(CriticalValue {
        alpha_sup: sup.value,
        c0,
        c_u,
        hamiltonian_sup_theta0: h_sup,
        conditional_on,
    })
}

/// `v` with `|v|_g = speed` in the direction `L^{-T} u`, `G = L L^T`.
fn metric_scaled(g: &DMatrix<f64>, u: &[f64], speed: f64) -> Option<DVector<f64>> {
    let chol = g.clone().cholesky()?;
    let u = DVector::from_column_slice(u);
    let lt = chol.l().transpose();
    let w = lt.solve_upper_triangular(&u)?;
    Some(w * speed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundAudit {
    pub samples: usize,
    pub seed: u64,
    pub c0: f64,
    pub min_value: f64,
    pub argmin_p: Vec<f64>,
    pub argmin_v: Vec<f64>,
}

/// `min (L + c0)` over seeded samples `p` in the ball, `|v|_g <= 3 |alpha|_inf`.
pub fn lower_bound_audit(sys: &SystemChart, n: usize, seed: u64, cfg: &VerifyConfig) -> Result<LowerBoundAudit, ManeError> {
    let c = c0(sys, cfg)?;
    let sup = c.alpha_sup;
    let m = sys.dim();
    let frame = &sys.frame;
    let values = cfg.exec.map_range(n, |i| -> Result<(f64, Vec<f64>, Vec<f64>), ManeError> {
        let mut rng = sample_rng(seed, i as u64);
        let p = random_ball_point(&mut rng, m, frame.period, frame.radius);
        let u = random_unit(&mut rng, m);
        let speed = 3.0 * sup * rand::Rng::random::<f64>(&mut rng);
        let g = sys.metric_at(&p)?;
        let v = metric_scaled(&g, &u, speed).ok_or_else(|| GeomError::NotPositiveDefinite { point: p.clone() })?;
        let v = v.as_slice().to_vec();
        let value = sys.lagrangian(&p, &v, c.c0)?;
        Ok((value, p, v))
    });
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for item in values {
        let item = item?;
        if best.as_ref().is_none_or(|b| item.0 < b.0 || item.0.is_nan()) {
            best = Some(item);
        }
    }
    let (min_value, argmin_p, argmin_v) = best.ok_or_else(|| ManeError::InvalidParameter("no samples".into()))?;
    Ok(LowerBoundAudit {
        samples: n,
        seed,
        c0: c.c0,
        min_value,
        argmin_p,
        argmin_v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub kappa_r: f64,
    pub predicted_action: f64,
    pub quadrature_action: f64,
    pub closure_residual: f64,
    /// Only for `r < 1`, where the orbit action is negative.
    pub mixing_weight: Option<f64>,
    /// Largest sampled energy along the orbit.
    pub measured_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub system: String,
    pub alpha_sup: f64,
    pub period: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const COLUMNS: [&'static str; 6] = [
        "r",
        "kappa_r",
        "predicted_action",
        "quadrature_action",
        "closure_residual",
        "mixing_weight",
    ];
}

fn orbit_row(sys: &SystemChart, r: f64, sup: f64, cfg: &IntegratorConfig) -> Result<SweepRow, ManeError> {
    let period = sys.frame.period;
    let closure = flow::core_orbit(sys, r, cfg)?;
    let kappa_r = 0.5 * r * r * sup * sup;
    let quadrature_action = flow::action(sys, &closure.trajectory, kappa_r)?;
    let energies = flow::energies(sys, &closure.trajectory)?;
    let measured_energy = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mixing_weight = (r < 1.0).then(|| {
        let s = quadrature_action / (period / r);
        2.0 * kappa_r / (2.0 * kappa_r - s)
    });
    Ok(SweepRow {
        r,
        kappa_r,
        predicted_action: (r - 1.0) * period * sup * sup,
        quadrature_action,
        closure_residual: closure.residual,
        mixing_weight,
        measured_energy,
    })
}

pub fn action_sweep(
    sys: &SystemChart,
    r_list: &[f64],
    integrator: &IntegratorConfig,
    cfg: &VerifyConfig,
) -> Result<SweepTable, ManeError> {
    if let Some(bad) = r_list.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(ManeError::InvalidParameter(format!("speed factor {bad}")));
    }
    let crit = c0(sys, cfg)?;
    let sup = crit.alpha_sup;
    let rows = cfg
        .exec
        .map(r_list, |&r| orbit_row(sys, r, sup, integrator))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable {
        system: sys.frame.name.clone(),
        alpha_sup: sup,
        period: sys.frame.period,
        rows,
    })
}

/// Max of `|(g(v,v) - alpha(v)) - (L(p,v) + kappa)|` over seeded samples on
/// `E = kappa`; the first side goes through the Cholesky factor, the second
/// through the Lagrangian.
pub fn lambda_ze_audit(sys: &SystemChart, kappa: f64, n: usize, seed: u64, exec: Exec) -> Result<f64, ManeError> {
    if !(kappa > 0.0) {
        return Err(ManeError::InvalidParameter(format!("energy {kappa}")));
    }
    let m = sys.dim();
    let frame = &sys.frame;
    let residuals = exec.map_range(n, |i| -> Result<f64, ManeError> {
        let mut rng = sample_rng(seed, i as u64);
        let p = random_ball_point(&mut rng, m, frame.period, frame.radius);
        let u = random_unit(&mut rng, m);
        lambda_ze_residual(sys, &p, &u, kappa)
    });
    let residuals = residuals.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(fold_max(residuals).max(0.0))
}

/// Residual of the identity at one point for the direction `u`.
pub fn lambda_ze_residual(sys: &SystemChart, p: &[f64], u: &[f64], kappa: f64) -> Result<f64, ManeError> {
    let g = sys.metric_at(p)?;
    let v = metric_scaled(&g, u, (2.0 * kappa).sqrt())
        .ok_or_else(|| GeomError::NotPositiveDefinite { point: p.to_vec() })?;
    let chol = g.cholesky().ok_or_else(|| GeomError::NotPositiveDefinite { point: p.to_vec() })?;
    let lhs_norm = (chol.l().transpose() * &v).norm_squared();
    let a = sys.alpha.value_at(p).map_err(GeomError::from)?;
    let lhs = lhs_norm - a.dot(&v);
    let rhs = sys.lagrangian(p, v.as_slice(), kappa)?;
    Ok((lhs - rhs).abs())
}

/// Directions on the unit sphere closed under `u -> -u`: `n` seeded
/// directions followed by their antipodes.
pub fn antipodal_nodes(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let half: Vec<Vec<f64>> = (0..n)
        .map(|i| random_unit(&mut sample_rng(seed, i as u64), dim))
        .collect();
    let mut nodes = half.clone();
    nodes.extend(half.into_iter().map(|u| u.into_iter().map(|x| -x).collect()));
    nodes
}

/// Equal-weight average of `alpha(v)` over `{E(p, v) = kappa}` at the given
/// sphere nodes.
pub fn fiber_average(sys: &SystemChart, p: &[f64], kappa: f64, nodes: &[Vec<f64>]) -> Result<f64, ManeError> {
    let g = sys.metric_at(p)?;
    let a = sys.alpha.value_at(p).map_err(GeomError::from)?;
    let speed = (2.0 * kappa).sqrt();
    let mut total = 0.0;
    // pair node k with node k + n/2 before summing, so antipodes cancel exactly
    let half = nodes.len() / 2;
    let value = |u: &Vec<f64>| -> Result<f64, ManeError> {
        let v = metric_scaled(&g, u, speed).ok_or_else(|| GeomError::NotPositiveDefinite { point: p.to_vec() })?;
        Ok(a.dot(&v))
    };
    for k in 0..half {
        total += value(&nodes[k])? + value(&nodes[k + half])?;
    }
    if nodes.len() % 2 == 1 {
        total += value(&nodes[nodes.len() - 1])?;
    }
    Ok(total / nodes.len() as f64)
}

/// `|fiber average of alpha(v)|` with `order` antipodal pairs.
pub fn liouville_fiber_symmetry(sys: &SystemChart, p: &[f64], kappa: f64, order: usize) -> Result<f64, ManeError> {
    let nodes = antipodal_nodes(sys.dim(), order.max(1), 0x5eed);
    Ok(fiber_average(sys, p, kappa, &nodes)?.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub r: f64,
    pub kappa: f64,
    /// Orbit action divided by its period.
    pub orbit_action_rate: f64,
    pub liouville_action: f64,
    #[serde(rename = "A")]
    pub mixing_weight: f64,
    pub nu_action: f64,
    pub lambda_ze_residual: f64,
    pub fiber_symmetry: f64,
    pub seed: u64,
}

pub fn measure_mix(
    sys: &SystemChart,
    r: f64,
    integrator: &IntegratorConfig,
    cfg: &VerifyConfig,
    samples: usize,
    seed: u64,
) -> Result<MeasureReport, ManeError> {
    if !(r > 0.0) {
        return Err(ManeError::InvalidParameter(format!("speed factor {r}")));
    }
    if r >= 1.0 {
        return Err(ManeError::PositiveOrbitAction(r));
    }
    let crit = c0(sys, cfg)?;
    let sup = crit.alpha_sup;
    let row = orbit_row(sys, r, sup, integrator)?;
    let kappa = row.kappa_r;
    let s = row.quadrature_action / (sys.frame.period / r);
    let liouville_action = 2.0 * kappa;
    let a = liouville_action / (liouville_action - s);
    let nu_action = a * s + (1.0 - a) * liouville_action;
    let lambda_ze_residual = lambda_ze_audit(sys, kappa, samples, seed, cfg.exec)?;
    let base = sys.frame.axis_point(0.0);
    let fiber_symmetry = liouville_fiber_symmetry(sys, &base, kappa, 64)?;
    Ok(MeasureReport {
        r,
        kappa,
        orbit_action_rate: s,
        liouville_action,
        mixing_weight: a,
        nu_action,
        lambda_ze_residual,
        fiber_symmetry,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::constructor::rescaled;

    #[test]
    fn flat_critical_value() {
        let c = c0(&catalog::flat(), &VerifyConfig::default()).unwrap();
        assert_eq!(c.alpha_sup, 1.0);
        assert_eq!(c.c0, 0.5);
        assert_eq!(c.c_u, Some(0.5));
        assert_eq!(c.hamiltonian_sup_theta0, 0.5);
    }

    #[test]
    fn raw_helix_sup_warns() {
        let s = alpha_sup(&catalog::helix(), &VerifyConfig::default()).unwrap();
        assert!((s.value - 1.25_f64.sqrt()).abs() < 1e-12);
        assert!(s.warning.is_some());
        assert!(matches!(
            c0(&catalog::helix(), &VerifyConfig::default()),
            Err(ManeError::NotStrongType { .. })
        ));
    }

    #[test]
    fn lower_bound_points() {
        let sys = catalog::flat();
        let p = [0.3, 0.1, 0.0];
        assert_eq!(sys.lagrangian(&p, &[0.0; 3], 0.5).unwrap(), 0.5);
        assert_eq!(sys.lagrangian(&p, &[1.0, 0.0, 0.0], 0.5).unwrap(), 0.0);
        assert_eq!(sys.lagrangian(&p, &[2.0, 0.0, 0.0], 0.5).unwrap(), 0.5);
        let audit = lower_bound_audit(&sys, 2000, 1, &VerifyConfig::default()).unwrap();
        assert!(audit.min_value >= 0.0 && audit.min_value < 0.05);
    }

    #[test]
    fn sweep_examples() {
        let sys = rescaled(&catalog::helix()).unwrap();
        let t = action_sweep(&sys, &[0.5, 1.0, 2.0], &IntegratorConfig::default(), &VerifyConfig::default()).unwrap();
        let pi = std::f64::consts::PI;
        assert!((t.rows[0].quadrature_action + pi).abs() < 1e-8);
        assert!((t.rows[0].mixing_weight.unwrap() - 0.5).abs() < 1e-9);
        assert!((t.rows[0].kappa_r - 0.125).abs() < 1e-12);
        assert!(t.rows[1].quadrature_action.abs() < 1e-9);
        assert!((t.rows[2].quadrature_action - 2.0 * pi).abs() < 1e-8);
        assert!(t.rows[2].mixing_weight.is_none());
    }

    #[test]
    fn measure_mix_examples() {
        let sys = rescaled(&catalog::helix()).unwrap();
        let cfg = VerifyConfig::default();
        let m = measure_mix(&sys, 0.5, &IntegratorConfig::default(), &cfg, 200, 3).unwrap();
        assert!((m.mixing_weight - 0.5).abs() < 1e-9);
        assert!(m.nu_action.abs() <= 1e-12);
        assert!(m.lambda_ze_residual <= 1e-12);
        assert!(m.fiber_symmetry <= 1e-14);
        assert!(matches!(
            measure_mix(&sys, 1.0, &IntegratorConfig::default(), &cfg, 10, 3),
            Err(ManeError::PositiveOrbitAction(_))
        ));
    }

    #[test]
    fn lambda_identity_special_vectors() {
        let sys = catalog::flat();
        let p = [0.0, 0.0, 0.0];
        // v = alpha-dual at kappa = 1/2: both sides 0
        assert!(lambda_ze_residual(&sys, &p, &[1.0, 0.0, 0.0], 0.5).unwrap() <= 1e-15);
        let along = sys.lagrangian(&p, &[1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(along, 0.0);
        // v orthogonal to V: both sides 2 kappa
        let perp = sys.lagrangian(&p, &[0.0, 1.0, 0.0], 0.5).unwrap();
        assert_eq!(perp, 1.0);
    }

    #[test]
    fn one_sided_nodes_break_symmetry() {
        let sys = catalog::helix();
        let p = [0.0, 0.3, 0.0];
        assert!(liouville_fiber_symmetry(&sys, &p, 0.5, 16).unwrap() <= 1e-14);
        let one_sided: Vec<Vec<f64>> = antipodal_nodes(3, 16, 9)
            .into_iter()
            .take(16)
            .map(|u| if u[0] < 0.0 { u.iter().map(|x| -x).collect() } else { u })
            .collect();
        assert!(fiber_average(&sys, &p, 0.5, &one_sided).unwrap().abs() > 0.1);
    }
}
