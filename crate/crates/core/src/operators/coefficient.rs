use std::sync::Arc;

use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::scalar::Real;

type CoefFn<T> = dyn Fn(T, T, T, T) -> T + Send + Sync;

/// Diffusion coefficient `a(x, y, z, t)` with sampled bounds.
#[derive(Clone)]
pub struct CoefficientField<T> {
    f: Arc<CoefFn<T>>,
    pub a_min: T,
    pub a_max: T,
    /// Hölder exponent the coefficient is assumed to have
    pub beta: T,
    /// set when `a` is constant in space and time
    pub constant: Option<T>,
    /// `a` depends on `x` and `t` only
    pub radial: bool,
    pub time_shift: T,
}

impl<T: Real> std::fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField")
            .field("a_min", &self.a_min)
            .field("a_max", &self.a_max)
            .field("constant", &self.constant)
            .field("time_shift", &self.time_shift)
            .finish()
    }
}

impl<T: Real> CoefficientField<T> {
    pub fn constant(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(PhiError::Hypothesis(format!("coefficient must be positive, got {c}")));
        }
        Ok(Self {
            f: Arc::new(move |_, _, _, _| c),
            a_min: c,
            a_max: c,
            beta: T::one(),
            constant: Some(c),
            radial: true,
            time_shift: T::zero(),
        })
    }

    /// Wraps `f` and checks `0 < a_min ≤ a ≤ a_max` on `grid × times`.
    pub fn from_fn(
        f: impl Fn(T, T, T, T) -> T + Send + Sync + 'static,
        grid: &Grid<T>,
        times: &[T],
        beta: T,
    ) -> Result<Self> {
        let f: Arc<CoefFn<T>> = Arc::new(f);
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for &t in times {
            for n in 0..grid.len() {
                let (x, y, z) = grid.xyz(n);
                let v = f(x, y, z, t);
                if !v.is_finite() || v <= T::zero() {
                    return Err(PhiError::Hypothesis(format!(
                        "coefficient must be positive and finite, got {v} at x={x}, y={y}, z={z}, t={t}"
                    )));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok(Self { f, a_min: lo, a_max: hi, beta, constant: None, radial: false, time_shift: T::zero() })
    }

    /// Promises that `a` does not depend on the angles.
    pub fn assume_radial(mut self) -> Self {
        self.radial = true;
        self
    }

    #[inline]
    pub fn eval(&self, x: T, y: T, z: T, t: T) -> T {
        (self.f)(x, y, z, t + self.time_shift)
    }

    /// Same coefficient seen from a window starting at `dt`.
    pub fn shifted(&self, dt: T) -> Self {
        let mut s = self.clone();
        s.time_shift += dt;
        s
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;

    #[test]
    fn bounds_and_shift() {
        let g = Grid::new(ManifoldModel::<f64>::model_a(), 17, 8, 1).unwrap();
        let a = CoefficientField::from_fn(|x, _, _, t| 1.0 + 0.5 * x + t, &g, &[0.0, 0.1], 0.75).unwrap();
        assert!((a.a_min - (1.0 + 0.5 / 64.0)).abs() < 1e-15);
        assert!((a.a_max - 1.6).abs() < 1e-15);
        assert_eq!(a.shifted(0.25).eval(1.0, 0.0, 0.0, 0.0), 1.75);
        assert!(CoefficientField::from_fn(|x, _, _, _| x - 0.5, &g, &[0.0], 0.75).is_err());
        assert!(CoefficientField::<f64>::constant(0.0).is_err());
    }
}
