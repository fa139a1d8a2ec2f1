//! Deterministic sample sets over the chart: axis samples, ball lattices and
//! seeded random points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Lattice density over `S^1 x {|x| <= R}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_samples: usize,
    /// Points per transverse axis of the cube lattice; odd keeps `x = 0`.
    pub x_samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t_samples: 32,
            x_samples: 21,
        }
    }
}

/// `n` uniform times `T k / n`, `k = 0..n`.
pub fn axis_times(period: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| period * k as f64 / n as f64).collect()
}

/// Transverse lattice points `x` in `[-R, R]^(dim-1)` with `|x| <= R`.
pub fn transverse_lattice(dim: usize, radius: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let k = dim - 1;
    let per_axis = per_axis.max(1);
    let coord = |i: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(k as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut x = Vec::with_capacity(k);
        for _ in 0..k {
            x.push(coord(code % per_axis));
            code /= per_axis;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 <= radius * radius * (1.0 + 1e-12) {
            out.push(x);
        }
    }
    out
}

/// Product of the axis times with the transverse lattice.
pub fn ball_grid(dim: usize, period: f64, radius: f64, grid: GridSpec) -> Vec<Vec<f64>> {
    let slice = transverse_lattice(dim, radius, grid.x_samples);
    let mut out = Vec::with_capacity(grid.t_samples * slice.len());
    for t in axis_times(period, grid.t_samples) {
        for x in &slice {
            let mut p = Vec::with_capacity(dim);
            p.push(t);
            p.extend_from_slice(x);
            out.push(p);
        }
    }
    out
}

/// Independent stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform direction on the unit sphere in `R^n`.
pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Uniform point in `[0, T) x {|x| <= R}`.
pub fn random_ball_point<R: Rng>(rng: &mut R, dim: usize, period: f64, radius: f64) -> Vec<f64> {
    let k = dim - 1;
    let t = rng.random::<f64>() * period;
    let u: f64 = rng.random();
    let scale = radius * u.powf(1.0 / k as f64);
    let mut p = vec![t];
    p.extend(random_unit(rng, k).into_iter().map(|d| d * scale));
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_contains_axis_and_respects_radius() {
        let pts = transverse_lattice(3, 0.5, 11);
        assert!(pts.iter().any(|x| x.iter().all(|v| *v == 0.0)));
        assert!(pts.iter().all(|x| x.iter().map(|v| v * v).sum::<f64>() <= 0.25 + 1e-12));
        assert!(pts.iter().any(|x| x[0] == 0.5));
    }

    #[test]
    fn streams_are_reproducible() {
        let a = random_ball_point(&mut sample_rng(7, 3), 3, 1.0, 0.5);
        let b = random_ball_point(&mut sample_rng(7, 3), 3, 1.0, 0.5);
        let c = random_ball_point(&mut sample_rng(7, 4), 3, 1.0, 0.5);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a[1] * a[1] + a[2] * a[2] <= 0.25);
    }
}
