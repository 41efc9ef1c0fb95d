use super::{ManifoldModel, Point};
use crate::error::{PhiError, Result};
use crate::scalar::Real;

/// Vertex-centred tensor grid on the truncated chart.
///
/// `x` nodes are uniform on `[x_min, x_max]` including both ends; end nodes
/// own half a control volume. Angles are uniform and periodic. Flat index is
/// `(i * ny + j) * nz + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub model: ManifoldModel<T>,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub x: Vec<T>,
    /// dual cell widths in x
    pub hx: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub hy: T,
    pub hz: T,
}

impl<T: Real> Grid<T> {
    /// `ny` is ignored when `b = 0` and `nz` when `f = 0`.
    pub fn new(model: ManifoldModel<T>, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let ny = if model.chart.b == 0 { 1 } else { ny };
        let nz = if model.chart.f == 0 { 1 } else { nz };
        if nx < 3 || (model.chart.b > 0 && ny < 2) || (model.chart.f > 0 && nz < 2) {
            return Err(PhiError::Parameter(format!("grid {nx}x{ny}x{nz} too small")));
        }
        if model.chart.b > 1 || model.chart.f > 1 {
            return Err(PhiError::Unsupported("grids for b > 1 or f > 1".into()));
        }
        let (x0, x1) = (model.chart.x_min, model.chart.x_max);
        let h = (x1 - x0) / T::of_usize(nx - 1);
        let x: Vec<T> = (0..nx).map(|i| if i + 1 == nx { x1 } else { x0 + T::of_usize(i) * h }).collect();
        let hx = (0..nx).map(|i| if i == 0 || i + 1 == nx { h * T::half() } else { h }).collect();
        let angles = |n: usize| -> (Vec<T>, T) {
            let d = T::TAU() / T::of_usize(n);
            ((0..n).map(|j| T::of_usize(j) * d).collect(), d)
        };
        let (y, hy) = if model.chart.b == 0 { (vec![], T::one()) } else { angles(ny) };
        let (z, hz) = if model.chart.f == 0 { (vec![], T::one()) } else { angles(nz) };
        Ok(Self { model, nx, ny, nz, x, hx, y, z, hy, hz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Uniform x spacing.
    pub fn h(&self) -> T {
        self.x[1] - self.x[0]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.ny + j) * self.nz + l
    }

    #[inline]
    pub fn ijl(&self, n: usize) -> (usize, usize, usize) {
        let l = n % self.nz;
        let r = n / self.nz;
        (r / self.ny, r % self.ny, l)
    }

    #[inline]
    pub fn x_of(&self, n: usize) -> T {
        self.x[n / (self.ny * self.nz)]
    }

    #[inline]
    pub fn y_of(&self, n: usize) -> T {
        if self.y.is_empty() {
            T::zero()
        } else {
            self.y[(n / self.nz) % self.ny]
        }
    }

    #[inline]
    pub fn z_of(&self, n: usize) -> T {
        if self.z.is_empty() {
            T::zero()
        } else {
            self.z[n % self.nz]
        }
    }

    /// Coordinates `(x, y, z)` of node `n`; absent angles are reported as 0.
    #[inline]
    pub fn xyz(&self, n: usize) -> (T, T, T) {
        (self.x_of(n), self.y_of(n), self.z_of(n))
    }

    pub fn point(&self, n: usize) -> Point<T> {
        let (x, y, z) = self.xyz(n);
        let b = self.model.chart.b;
        let f = self.model.chart.f;
        Point::new(x, if b > 0 { vec![y] } else { vec![] }, if f > 0 { vec![z] } else { vec![] })
    }

    /// Node-wise `√g · dual cell volume`, so that `Σ vol_i u_i ≈ ∫ u dvol`.
    pub fn volumes(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            let w = self.model.density_at_x(self.x[i]) * self.hx[i] * self.hy * self.hz;
            v.extend(std::iter::repeat_n(w, self.ny * self.nz));
        }
        v
    }

    /// Samples `f(x, y, z)` at every node.
    pub fn sample(&self, f: impl Fn(T, T, T) -> T) -> Vec<T> {
        (0..self.len())
            .map(|n| {
                let (x, y, z) = self.xyz(n);
                f(x, y, z)
            })
            .collect()
    }

    /// Same layout, different resolution.
    pub fn same_shape(&self, other: &Grid<T>) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.nz == other.nz && self.model == other.model
    }
}
