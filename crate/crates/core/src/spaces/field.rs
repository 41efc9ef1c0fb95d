use std::sync::Arc;

use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::scalar::Real;

/// Grid function on `grid × {t_0, …, t_N}`, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<T> {
    pub grid: Arc<Grid<T>>,
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// weight exponent recorded with the field; norms use the one in `NormSpec`
    pub gamma: T,
}

/// `n_steps + 1` equally spaced times on `[0, t_end]`.
pub fn uniform_times<T: Real>(t_end: T, n_steps: usize) -> Vec<T> {
    let n = n_steps.max(1);
    let dt = t_end / T::of_usize(n);
    (0..=n).map(|k| if k == n { t_end } else { T::of_usize(k) * dt }).collect()
}

impl<T: Real> SpaceTimeField<T> {
    pub fn new(grid: Arc<Grid<T>>, times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() || values.len() != grid.len() * times.len() {
            return Err(PhiError::Parameter(format!(
                "field shape mismatch: {} values for {} nodes x {} times",
                values.len(),
                grid.len(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PhiError::Parameter("time axis must be strictly increasing".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(PhiError::Parameter(format!("non-finite value at flat index {k}")));
        }
        Ok(Self { grid, times, values, gamma: T::zero() })
    }

    pub fn zeros(grid: Arc<Grid<T>>, times: Vec<T>) -> Self {
        let values = vec![T::zero(); grid.len() * times.len()];
        Self { grid, times, values, gamma: T::zero() }
    }

    pub fn from_fn(grid: Arc<Grid<T>>, times: Vec<T>, f: impl Fn(T, T, T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len() * times.len());
        for &t in &times {
            for n in 0..grid.len() {
                let (x, y, z) = grid.xyz(n);
                values.push(f(x, y, z, t));
            }
        }
        Self { grid, times, values, gamma: T::zero() }
    }

    /// Time-constant extension of a single grid function.
    pub fn constant_in_time(grid: Arc<Grid<T>>, times: Vec<T>, u: &[T]) -> Self {
        let mut values = Vec::with_capacity(u.len() * times.len());
        for _ in &times {
            values.extend_from_slice(u);
        }
        Self { grid, times, values, gamma: T::zero() }
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn t_end(&self) -> T {
        *self.times.last().expect("nonempty time axis")
    }

    pub fn slice(&self, k: usize) -> &[T] {
        let n = self.n_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [T] {
        let n = self.n_nodes();
        &mut self.values[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn at(&self, node: usize, k: usize) -> T {
        self.values[k * self.n_nodes() + node]
    }

    pub fn same_support(&self, other: &Self) -> bool {
        self.grid.same_shape(&other.grid) && self.times == other.times
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_support(other) {
            Ok(())
        } else {
            Err(PhiError::Parameter("fields live on different grids or time axes".into()))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Pointwise `f(x, y, z, t, u)`.
    pub fn map_with_coords(&self, f: impl Fn(T, T, T, T, T) -> T) -> Self {
        let mut out = self.clone();
        let nn = self.n_nodes();
        for (k, &t) in self.times.iter().enumerate() {
            for n in 0..nn {
                let (x, y, z) = self.grid.xyz(n);
                let v = &mut out.values[k * nn + n];
                *v = f(x, y, z, t, *v);
            }
        }
        out
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, &b)| *a = f(*a, b));
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, &b)| *a += b);
        Ok(())
    }

    /// Multiplies every time slice by the spatial field `w`.
    pub fn mul_spatial(&self, w: &[T]) -> Self {
        let mut out = self.clone();
        let nn = self.n_nodes();
        for chunk in out.values.chunks_mut(nn) {
            chunk.iter_mut().zip(w).for_each(|(a, &b)| *a *= b);
        }
        out
    }

    /// `sup |u − v|` over all samples.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        Ok(self.values.iter().zip(&other.values).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;

    #[test]
    fn shapes_and_arithmetic() {
        let g = Arc::new(Grid::new(ManifoldModel::<f64>::model_a(), 5, 4, 1).unwrap());
        let ts = uniform_times(1.0, 4);
        assert_eq!(ts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let u = SpaceTimeField::from_fn(g.clone(), ts.clone(), |x, _, _, t| x + t);
        assert_eq!(u.at(0, 4), 1.0 + 1.0 / 64.0);
        let d = u.sub(&u).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        assert!(SpaceTimeField::new(g.clone(), ts.clone(), vec![0.0; 3]).is_err());
        assert!(SpaceTimeField::new(g, ts, vec![f64::NAN; 100]).is_err());
    }
}
