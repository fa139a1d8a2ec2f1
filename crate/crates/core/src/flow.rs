//! Magnetic geodesic flow `p' = v`, `v' = -Gamma(v, v) + Y v` on the chart,
//! energy monitoring, closure of the reparametrised core orbits and action
//! quadrature.
//!
//! Raw time and the raw `t`-coordinate are kept unwrapped; `t` is reduced
//! modulo the period only when states are compared.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chartgeom::{GeomError, SystemChart};

/// Steps per period when no step is configured.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("trajectory left the chart ball at time {time} (|x| = {radius})")]
    LeftChart { time: f64, radius: f64 },
    #[error("adaptive step fell to {step:e} at time {time}")]
    StepUnderflow { time: f64, step: f64 },
    #[error("initial energy is zero")]
    ZeroInitialEnergy,
    #[error("invalid integration parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(p: Vec<f64>, v: Vec<f64>) -> Self {
        State { p, v }
    }

    /// Phase-space distance with the `t` slot compared modulo `period`.
    pub fn distance(&self, other: &State, period: f64) -> f64 {
        let mut sum = 0.0;
        for (i, (a, b)) in self.p.iter().zip(&other.p).enumerate() {
            let mut d = a - b;
            if i == 0 {
                d -= period * (d / period).round();
            }
            sum += d * d;
        }
        for (a, b) in self.v.iter().zip(&other.v) {
            sum += (a - b) * (a - b);
        }
        sum.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step, or initial step for the adaptive method. Defaults to
    /// `T / 2000`.
    pub h: Option<f64>,
    pub rtol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            h: None,
            rtol: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(h: f64) -> Self {
        IntegratorConfig {
            h: Some(h),
            ..Self::default()
        }
    }

    pub fn adaptive(rtol: f64) -> Self {
        IntegratorConfig {
            method: Method::Adaptive,
            h: None,
            rtol,
        }
    }

    pub fn step_for(&self, sys: &SystemChart) -> f64 {
        self.h
            .unwrap_or(sys.frame.period / DEFAULT_STEPS_PER_PERIOD as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub method: Method,
    /// Fixed step used, or the last accepted adaptive step.
    pub step: f64,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

type Phase = DVector<f64>;

fn split(y: &Phase, m: usize) -> (&[f64], &[f64]) {
    y.as_slice().split_at(m)
}

fn rhs(sys: &SystemChart, y: &Phase) -> Result<Phase, GeomError> {
    let m = sys.dim();
    let (p, v) = split(y, m);
    let local = sys.local(p)?;
    let v = DVector::from_column_slice(v);
    let a = local.acceleration(&v);
    let mut out = DVector::zeros(2 * m);
    out.rows_mut(0, m).copy_from(&v);
    out.rows_mut(m, m).copy_from(&a);
    Ok(out)
}

fn rk4_step(sys: &SystemChart, y: &Phase, h: f64, time: f64) -> Result<Phase, FlowError> {
    let eval = |y: &Phase| {
        rhs(sys, y).map_err(|e| match e {
            GeomError::OutOfChart { radius, .. } => FlowError::LeftChart { time, radius },
            other => FlowError::Geom(other),
        })
    };
    let k1 = eval(y)?;
    let k2 = eval(&(y + &k1 * (0.5 * h)))?;
    let k3 = eval(&(y + &k2 * (0.5 * h)))?;
    let k4 = eval(&(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn to_state(y: &Phase, m: usize) -> State {
    let (p, v) = split(y, m);
    State::new(p.to_vec(), v.to_vec())
}

fn check_inside(sys: &SystemChart, y: &Phase, time: f64) -> Result<(), FlowError> {
    let m = sys.dim();
    let (p, _) = split(y, m);
    match sys.frame.check_point(p) {
        Ok(()) => Ok(()),
        Err(GeomError::OutOfChart { radius, .. }) => Err(FlowError::LeftChart { time, radius }),
        Err(e) => Err(e.into()),
    }
}

/// Integrate from `s0` for `duration`, recording every accepted step.
pub fn integrate(sys: &SystemChart, s0: &State, duration: f64, cfg: &IntegratorConfig) -> Result<Trajectory, FlowError> {
    let m = sys.dim();
    if s0.p.len() != m || s0.v.len() != m {
        return Err(FlowError::InvalidParameter(format!(
            "state must have {m} position and {m} velocity components"
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(FlowError::InvalidParameter(format!("duration {duration}")));
    }
    let h = cfg.step_for(sys);
    if !(h > 0.0 && h.is_finite()) {
        return Err(FlowError::InvalidParameter(format!("step {h}")));
    }
    let mut y: Phase = DVector::from_iterator(2 * m, s0.p.iter().chain(&s0.v).copied());
    check_inside(sys, &y, 0.0)?;
    match cfg.method {
        Method::Rk4 => {
            let ratio = duration / h;
            let n = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
                ratio.round().max(1.0) as usize
            } else {
                ratio.ceil() as usize
            };
            let step = duration / n as f64;
            let mut times = Vec::with_capacity(n + 1);
            let mut states = Vec::with_capacity(n + 1);
            times.push(0.0);
            states.push(s0.clone());
            for k in 0..n {
                let time = k as f64 * step;
                y = rk4_step(sys, &y, step, time)?;
                let time = if k + 1 == n { duration } else { (k + 1) as f64 * step };
                check_inside(sys, &y, time)?;
                times.push(time);
                states.push(to_state(&y, m));
            }
            Ok(Trajectory {
                times,
                states,
                method: Method::Rk4,
                step,
                rejected_steps: 0,
            })
        }
        Method::Adaptive => adaptive(sys, s0, y, duration, h, cfg.rtol),
    }
}

fn adaptive(sys: &SystemChart, s0: &State, mut y: Phase, duration: f64, h0: f64, rtol: f64) -> Result<Trajectory, FlowError> {
    let m = sys.dim();
    let h_min = duration * 1e-14;
    let mut h = h0.min(duration);
    let mut time = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![s0.clone()];
    let mut rejected = 0;
    let mut last = h;
    while time < duration {
        let remaining = duration - time;
        let last_step = h >= remaining * (1.0 - 1e-12);
        let step = if last_step { remaining } else { h };
        if step < h_min {
            return Err(FlowError::StepUnderflow { time, step });
        }
        let attempt = rk4_step(sys, &y, step, time).and_then(|full| {
            let half = rk4_step(sys, &y, 0.5 * step, time)?;
            let two = rk4_step(sys, &half, 0.5 * step, time + 0.5 * step)?;
            Ok((full, two))
        });
        let (full, two) = match attempt {
            Ok(pair) => pair,
            // a stage poked outside the chart; retry smaller before giving up
            Err(FlowError::LeftChart { .. }) if step > 16.0 * h_min => {
                rejected += 1;
                h = 0.5 * step;
                continue;
            }
            Err(e) => return Err(e),
        };
        let err = (0..2 * m)
            .map(|i| (two[i] - full[i]).abs() / (rtol * (1.0 + two[i].abs())))
            .fold(0.0, f64::max)
            / 15.0;
        if err <= 1.0 {
            y = &two + (&two - &full) / 15.0;
            time = if last_step { duration } else { time + step };
            check_inside(sys, &y, time)?;
            times.push(time);
            states.push(to_state(&y, m));
            last = step;
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
        h = step * factor;
    }
    Ok(Trajectory {
        times,
        states,
        method: Method::Adaptive,
        step: last,
        rejected_steps: rejected,
    })
}

/// Energy `1/2 v^T G v` at every sample.
pub fn energies(sys: &SystemChart, traj: &Trajectory) -> Result<Vec<f64>, FlowError> {
    traj.states
        .iter()
        .map(|s| sys.energy(&s.p, &s.v).map_err(FlowError::from))
        .collect()
}

/// `max |E(s) - E(s0)| / E(s0)`.
pub fn energy_drift(sys: &SystemChart, traj: &Trajectory) -> Result<f64, FlowError> {
    let e = energies(sys, traj)?;
    let e0 = e[0];
    if e0 == 0.0 {
        return Err(FlowError::ZeroInitialEnergy);
    }
    Ok(e.iter().map(|x| (x - e0).abs() / e0).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub residual: f64,
    pub trajectory: Trajectory,
}

pub fn closure_from(sys: &SystemChart, s0: &State, duration: f64, cfg: &IntegratorConfig) -> Result<Closure, FlowError> {
    let trajectory = integrate(sys, s0, duration, cfg)?;
    let residual = trajectory.last().distance(s0, sys.frame.period);
    Ok(Closure { residual, trajectory })
}

/// Start of the core orbit at speed factor `r`.
pub fn core_orbit_start(sys: &SystemChart, r: f64) -> State {
    let m = sys.dim();
    let mut v = vec![0.0; m];
    v[0] = r;
    State::new(vec![0.0; m], v)
}

/// The core orbit `t -> gamma(r t)` integrated for one period `T / r`.
pub fn core_orbit(sys: &SystemChart, r: f64, cfg: &IntegratorConfig) -> Result<Closure, FlowError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(FlowError::InvalidParameter(format!("speed factor {r}")));
    }
    closure_from(sys, &core_orbit_start(sys, r), sys.frame.period / r, cfg)
}

pub fn closure_residual(sys: &SystemChart, r: f64, cfg: &IntegratorConfig) -> Result<f64, FlowError> {
    Ok(core_orbit(sys, r, cfg)?.residual)
}

/// Composite Simpson rule on possibly nonuniform samples; an odd trailing
/// interval gets the three-point end correction.
pub fn simpson(x: &[f64], f: &[f64]) -> f64 {
    let n = x.len();
    assert_eq!(n, f.len(), "abscissae and values differ in length");
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
    }
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut total = 0.0;
    let mut i = 0;
    while i < paired {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let hs = h0 + h1;
        total += hs / 6.0
            * ((2.0 - h1 / h0) * f[i] + hs * hs / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if intervals % 2 == 1 {
        let h0 = x[n - 2] - x[n - 3];
        let h1 = x[n - 1] - x[n - 2];
        let a = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let b = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        let c = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        total += a * f[n - 1] + b * f[n - 2] - c * f[n - 3];
    }
    total
}

/// `int (L + kappa) dt` along the samples.
pub fn action(sys: &SystemChart, traj: &Trajectory, kappa: f64) -> Result<f64, FlowError> {
    let values = traj
        .states
        .iter()
        .map(|s| sys.lagrangian(&s.p, &s.v, kappa))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(simpson(&traj.times, &values))
}

/// Trajectory table columns: `time, t, x2..xm, v1..vm, energy`.
pub fn trajectory_header(dim: usize) -> Vec<String> {
    let mut h = vec!["time".to_string(), "t".to_string()];
    h.extend((2..=dim).map(|k| format!("x{k}")));
    h.extend((1..=dim).map(|k| format!("v{k}")));
    h.push("energy".into());
    h
}

pub fn trajectory_rows(sys: &SystemChart, traj: &Trajectory) -> Result<Vec<Vec<f64>>, FlowError> {
    let e = energies(sys, traj)?;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .zip(e)
        .map(|((time, s), e)| {
            let mut row = vec![*time];
            row.extend_from_slice(&s.p);
            row.extend_from_slice(&s.v);
            row.push(e);
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::constructor;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn flat_line_closes() {
        let sys = catalog::flat();
        let c = core_orbit(&sys, 1.0, &IntegratorConfig::default()).unwrap();
        assert!(c.residual <= 1e-10);
        assert_eq!(*c.trajectory.times.last().unwrap(), TAU);
        assert!(c.trajectory.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn twist_gyration_matches_rotation() {
        let sys = catalog::twist();
        let s0 = State::new(vec![0.0, 0.1, 0.0], vec![1.0, 0.0, 0.05]);
        let traj = integrate(&sys, &s0, 1.0, &IntegratorConfig::rk4(1e-3)).unwrap();
        // v_perp' = Y v_perp with Y e2 = 2 e3, Y e3 = -2 e2
        for (time, s) in traj.times.iter().zip(&traj.states).step_by(97) {
            let (c, sn) = ((2.0 * time).cos(), (2.0 * time).sin());
            let v2 = -0.05 * sn;
            let v3 = 0.05 * c;
            let x2 = 0.1 + 0.025 * (c - 1.0);
            let x3 = 0.025 * sn;
            assert!((s.v[1] - v2).abs() < 1e-11 && (s.v[2] - v3).abs() < 1e-11);
            assert!((s.p[1] - x2).abs() < 1e-11 && (s.p[2] - x3).abs() < 1e-11);
            assert!((s.p[0] - time).abs() < 1e-12);
        }
    }

    #[test]
    fn helix_axis_is_invariant() {
        let sys = catalog::helix();
        let c = core_orbit(&sys, 0.7, &IntegratorConfig::default()).unwrap();
        let excursion = c
            .trajectory
            .states
            .iter()
            .map(|s| s.p[1].hypot(s.p[2]))
            .fold(0.0, f64::max);
        assert!(excursion <= 1e-9);
    }

    #[test]
    fn energy_drift_and_errors() {
        let sys = catalog::twist();
        let s0 = State::new(vec![0.0, 0.1, 0.0], vec![1.0, 0.0, 0.05]);
        let traj = integrate(&sys, &s0, 10.0 * TAU, &IntegratorConfig::default()).unwrap();
        assert!(energy_drift(&sys, &traj).unwrap() <= 1e-8);
        let rest = State::new(vec![0.0; 3], vec![0.0; 3]);
        let traj = integrate(&sys, &rest, 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(energy_drift(&sys, &traj), Err(FlowError::ZeroInitialEnergy));
        let out = State::new(vec![0.0, 0.4, 0.0], vec![0.0, 1.0, 0.0]);
        assert!(matches!(
            integrate(&catalog::flat(), &out, 1.0, &IntegratorConfig::default()),
            Err(FlowError::LeftChart { .. })
        ));
    }

    #[test]
    fn adaptive_agrees_with_fixed_step() {
        let sys = catalog::wavy();
        let s0 = State::new(vec![0.0, 0.05, -0.02], vec![1.0, 0.1, 0.05]);
        let a = integrate(&sys, &s0, 3.0, &IntegratorConfig::adaptive(1e-10)).unwrap();
        let b = integrate(&sys, &s0, 3.0, &IntegratorConfig::rk4(1e-3)).unwrap();
        assert_eq!(*a.times.last().unwrap(), 3.0);
        assert!(a.last().distance(b.last(), sys.frame.period) < 1e-8);
        assert!(a.len() < b.len());
    }

    #[test]
    fn simpson_exactness() {
        // nonuniform, odd interval count: exact on quadratics
        let x: Vec<f64> = (0..8).map(|k| (k as f64 * 0.3).powf(1.3)).collect();
        let f: Vec<f64> = x.iter().map(|t| 3.0 * t * t - 2.0 * t + 1.0).collect();
        let b = *x.last().unwrap();
        assert!((simpson(&x, &f) - (b * b * b - b * b + b)).abs() < 1e-12);
        // uniform, even interval count: exact on cubics
        let x: Vec<f64> = (0..9).map(|k| k as f64 * 0.25).collect();
        let f: Vec<f64> = x.iter().map(|t| t * t * t - 2.0 * t + 1.0).collect();
        assert!((simpson(&x, &f) - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn core_orbit_actions() {
        let sys = constructor::rescaled(&catalog::helix()).unwrap();
        let cfg = IntegratorConfig::default();
        let half = core_orbit(&sys, 0.5, &cfg).unwrap();
        let a = action(&sys, &half.trajectory, 0.125).unwrap();
        assert!((a + PI).abs() <= 1e-8, "{a}");
        let two = core_orbit(&sys, 2.0, &cfg).unwrap();
        let a = action(&sys, &two.trajectory, 2.0).unwrap();
        assert!((a - TAU).abs() <= 1e-8, "{a}");
    }
}
