//! Built-in systems on `S^1 x R^2` with period `2 pi`.

use std::f64::consts::TAU;

use crate::chartgeom::{ChartFrame, CovectorField, MetricField, SystemChart, TopologyFlags};
use crate::fieldexpr::parse;

pub const NAMES: [&str; 4] = ["FLAT", "HELIX", "TWIST", "WAVY"];

/// One-line description shown by the CLI `catalog` listing.
pub fn description(name: &str) -> Option<&'static str> {
    Some(match name {
        "FLAT" => "G = I, alpha = dt; every check holds with zero residual",
        "HELIX" => "G = I, alpha = dt + x2 dx3; semi-strong, |alpha| grows off the axis",
        "TWIST" => "G = I, alpha = dt - x3 dx2 + x2 dx3; uniform transverse field, gyrofrequency 2",
        "WAVY" => "t-dependent metric with g11 = 1 + x2 cos t, g12 = sin(t)/2 and its matching alpha",
        _ => return None,
    })
}

pub fn by_name(name: &str) -> Option<SystemChart> {
    match name.to_ascii_uppercase().as_str() {
        "FLAT" => Some(flat()),
        "HELIX" => Some(helix()),
        "TWIST" => Some(twist()),
        "WAVY" => Some(wavy()),
        _ => None,
    }
}

fn frame(name: &str, radius: f64) -> ChartFrame {
    ChartFrame {
        name: name.to_string(),
        dim: 3,
        period: TAU,
        radius,
        flags: TopologyFlags {
            gamma_nullhomologous: true,
            gamma_contractible: true,
        },
        exterior_alpha_bound: Some(1.0),
    }
}

fn build(name: &str, radius: f64, metric: &[((usize, usize), &str)], alpha: [&str; 3]) -> SystemChart {
    let metric = MetricField::from_fn(3, |i, j| {
        let src = metric
            .iter()
            .find(|(ij, _)| *ij == (i, j))
            .map(|(_, s)| *s)
            .unwrap_or(if i == j { "1" } else { "0" });
        parse(src, 3).expect("catalog metric")
    });
    let alpha = CovectorField::new(alpha.iter().map(|s| parse(s, 3).expect("catalog alpha")).collect());
    SystemChart {
        frame: frame(name, radius),
        metric,
        alpha,
    }
}

pub fn flat() -> SystemChart {
    build("FLAT", 0.5, &[], ["1", "0", "0"])
}

pub fn helix() -> SystemChart {
    build("HELIX", 0.5, &[], ["1", "0", "x2"])
}

pub fn twist() -> SystemChart {
    build("TWIST", 0.5, &[], ["1", "-x3", "x2"])
}

pub fn wavy() -> SystemChart {
    build(
        "WAVY",
        0.5,
        &[((0, 0), "1 + x2 * cos(t)"), ((0, 1), "0.5 * sin(t)")],
        ["1 + 0.5 * cos(t) * x2", "0.5 * sin(t)", "0"],
    )
}
