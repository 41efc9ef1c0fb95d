use rayon::prelude::*;

use super::SpaceTimeField;
use crate::error::{PhiError, Result};
use crate::geometry::frame_weight;
use crate::scalar::Real;

/// Φ-frame derivative `V_k u`, `k` indexing `x²∂_x, x∂_y, ∂_z`.
///
/// Second-order central differences, one-sided second-order at both x ends,
/// periodic in the angles.
pub fn phi_derivative<T: Real>(u: &SpaceTimeField<T>, direction: usize) -> Result<SpaceTimeField<T>> {
    let g = &*u.grid;
    let b = g.model.chart.b;
    let m = g.model.dim();
    if direction >= m {
        return Err(PhiError::Parameter(format!("frame index {direction} out of range for dimension {m}")));
    }
    let nn = g.len();
    let mut out = u.clone();
    out.values.par_chunks_mut(nn).enumerate().for_each(|(k, dst)| {
        let src = u.slice(k);
        for n in 0..nn {
            let (i, j, l) = g.ijl(n);
            let d = if direction == 0 {
                let h = g.h();
                let at = |ii: usize| src[g.idx(ii, j, l)];
                if i == 0 {
                    (-T::lit(3.0) * at(0) + T::lit(4.0) * at(1) - at(2)) / (T::two() * h)
                } else if i + 1 == g.nx {
                    (T::lit(3.0) * at(i) - T::lit(4.0) * at(i - 1) + at(i - 2)) / (T::two() * h)
                } else {
                    (at(i + 1) - at(i - 1)) / (T::two() * h)
                }
            } else if direction <= b {
                let jp = (j + 1) % g.ny;
                let jm = (j + g.ny - 1) % g.ny;
                (src[g.idx(i, jp, l)] - src[g.idx(i, jm, l)]) / (T::two() * g.hy)
            } else {
                let lp = (l + 1) % g.nz;
                let lm = (l + g.nz - 1) % g.nz;
                (src[g.idx(i, j, lp)] - src[g.idx(i, j, lm)]) / (T::two() * g.hz)
            };
            dst[n] = frame_weight(direction, b, g.x[i]) * d;
        }
    });
    Ok(out)
}

/// `∂_t u` by three-point differences on a possibly non-uniform time axis.
pub fn time_derivative<T: Real>(u: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    let nt = u.n_times();
    if nt < 3 {
        return Err(PhiError::Parameter(format!("time derivative needs at least 3 time levels, got {nt}")));
    }
    let ts = &u.times;
    let nn = u.n_nodes();
    let mut out = u.clone();
    for k in 0..nt {
        // nodes and Lagrange weights of the stencil around k
        let (a, c) = if k == 0 { (0, 2) } else if k + 1 == nt { (nt - 3, nt - 1) } else { (k - 1, k + 1) };
        let (t0, t1, t2) = (ts[a], ts[a + 1], ts[c]);
        let tk = ts[k];
        let w0 = ((tk - t1) + (tk - t2)) / ((t0 - t1) * (t0 - t2));
        let w1 = ((tk - t0) + (tk - t2)) / ((t1 - t0) * (t1 - t2));
        let w2 = ((tk - t0) + (tk - t1)) / ((t2 - t0) * (t2 - t1));
        let (s0, s1, s2) = (u.slice(a), u.slice(a + 1), u.slice(c));
        let dst = out.slice_mut(k);
        for n in 0..nn {
            dst[n] = w0 * s0[n] + w1 * s1[n] + w2 * s2[n];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, ManifoldModel};
    use crate::spaces::uniform_times;
    use std::sync::Arc;

    fn grid(nx: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::new(ManifoldModel::model_b(), nx, 32, 16).unwrap())
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = grid(17);
        let u = SpaceTimeField::from_fn(g, uniform_times(0.1, 2), |_, _, _, _| 3.0);
        for d in 0..3 {
            assert!(phi_derivative(&u, d).unwrap().values.iter().all(|v| v.abs() < 1e-12));
        }
        assert!(phi_derivative(&u, 3).is_err());
    }

    #[test]
    fn frame_derivative_examples() {
        let g = grid(65);
        let u = SpaceTimeField::from_fn(g.clone(), vec![0.0], |x, _, _, _| x);
        let d = phi_derivative(&u, 0).unwrap();
        for n in 0..g.len() {
            let x = g.x_of(n);
            assert!((d.values[n] - x * x).abs() < 1e-12);
        }
        // x·sin y → x²·∂_x gives x² sin y; x·∂_y gives x² cos y
        let u = SpaceTimeField::from_fn(g.clone(), vec![0.0], |_, y, _, _| y.sin());
        let d = phi_derivative(&u, 1).unwrap();
        let hy = g.hy;
        let err = (0..g.len()).map(|n| (d.values[n] - g.x_of(n) * g.y_of(n).cos()).abs()).fold(0.0, f64::max);
        assert!(err < hy * hy);
    }

    #[test]
    fn one_sided_ends_are_second_order() {
        let errs: Vec<f64> = [33, 65]
            .iter()
            .map(|&nx| {
                let g = grid(nx);
                let u = SpaceTimeField::from_fn(g.clone(), vec![0.0], |x, _, _, _| (3.0 * x).sin());
                let d = phi_derivative(&u, 0).unwrap();
                (0..g.len())
                    .map(|n| {
                        let x = g.x_of(n);
                        (d.values[n] - x * x * 3.0 * (3.0 * x).cos()).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let slope = (errs[0] / errs[1]).log2();
        assert!(slope > 1.8, "slope {slope}");
    }

    #[test]
    fn time_derivative_exact_on_quadratics() {
        let g = grid(5);
        let ts = vec![0.0, 0.1, 0.3, 0.35, 0.5];
        let u = SpaceTimeField::from_fn(g, ts.clone(), |_, _, _, t| t * t - t);
        let d = time_derivative(&u).unwrap();
        for (k, &t) in ts.iter().enumerate() {
            assert!((d.at(0, k) - (2.0 * t - 1.0)).abs() < 1e-12);
        }
    }
}
