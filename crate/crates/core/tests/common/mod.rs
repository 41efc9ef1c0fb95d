#![allow(dead_code)]

use std::sync::Arc;

use phi_heat_core::geometry::Grid;
use phi_heat_core::operators::{CoefficientField, DiscreteOperator};
use phi_heat_core::spaces::SpaceTimeField;

/// Explicit Euler for `∂_t u + aΔ_h u = F(x, y, z, t, u)` with `u(0) = 0`,
/// sampled on `times`. The internal step is at most `safety / λ̄` with `λ̄` a
/// Gershgorin bound on `aΔ_h`.
pub fn explicit_semilinear(
    grid: Arc<Grid<f64>>,
    op: &DiscreteOperator<f64>,
    coef: &CoefficientField<f64>,
    f: impl Fn(f64, f64, f64, f64, f64) -> f64,
    times: &[f64],
    safety: f64,
) -> SpaceTimeField<f64> {
    let nn = grid.len();
    let kd = op.k_diagonal();
    let masses = op.masses();
    let a_max = (0..nn).map(|n| {
        let (x, y, z) = grid.xyz(n);
        times.iter().map(|&t| coef.eval(x, y, z, t)).fold(0.0, f64::max)
    });
    let lam = a_max.zip(kd.iter().zip(&masses)).map(|(a, (k, m))| 2.0 * a * k / m).fold(0.0, f64::max);
    let xyz: Vec<_> = (0..nn).map(|n| grid.xyz(n)).collect();
    let mut u = vec![0.0; nn];
    let mut t = times[0];
    let mut out = u.clone();
    for &target in &times[1..] {
        let span = target - t;
        let m = (span * lam / safety).ceil().max(1.0) as usize;
        let dt = span / m as f64;
        for _ in 0..m {
            let lap = op.apply(&u);
            let next: Vec<f64> = (0..nn)
                .map(|n| {
                    let (x, y, z) = xyz[n];
                    u[n] + dt * (f(x, y, z, t, u[n]) - coef.eval(x, y, z, t) * lap[n])
                })
                .collect();
            u = next;
            t += dt;
        }
        t = target;
        out.extend_from_slice(&u);
    }
    SpaceTimeField::new(grid, times.to_vec(), out).unwrap()
}

/// Relative `sup` distance `‖u − v‖ / ‖v‖`.
pub fn rel_sup(u: &SpaceTimeField<f64>, v: &SpaceTimeField<f64>) -> f64 {
    let d = u.max_abs_diff(v).unwrap();
    let s = v.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    d / s
}
