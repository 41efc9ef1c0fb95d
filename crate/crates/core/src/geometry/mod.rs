//! Model manifolds with fibered boundary: charts, Φ-metrics, frames,
//! quasi-distances and volume densities.
//!
//! Points are written in collar coordinates `(x, y, z)` where `x` is the
//! boundary defining function, `y` are base angles and `z` fiber angles.
//! Both angle families are periodic with period `2π`.

mod grid;

pub use grid::Grid;

use crate::error::{PhiError, Result};
use crate::scalar::Real;

/// Which built-in model a geometry represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    /// `(b, f) = (1, 0)`: the plane outside the unit disc, `r = 1/x`.
    A,
    /// `(b, f) = (1, 1)`: the same annulus times a unit circle.
    B,
}

impl std::str::FromStr for ModelId {
    type Err = PhiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(ModelId::A),
            "B" | "b" => Ok(ModelId::B),
            other => Err(PhiError::Parameter(format!("unknown model '{other}', expected A or B"))),
        }
    }
}

/// Collar chart `(0, x_max] × [0,2π)^b × [0,2π)^f`, truncated at `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberedBoundaryChart<T> {
    pub b: usize,
    pub f: usize,
    pub x_min: T,
    pub x_max: T,
}

impl<T: Real> FiberedBoundaryChart<T> {
    pub fn new(b: usize, f: usize, x_min: T, x_max: T) -> Result<Self> {
        if !(x_min > T::zero() && x_min < x_max && x_max <= T::one()) {
            return Err(PhiError::Parameter(format!(
                "chart needs 0 < x_min < x_max <= 1, got x_min={x_min}, x_max={x_max}"
            )));
        }
        Ok(Self { b, f, x_min, x_max })
    }

    /// Total dimension `m = 1 + b + f`.
    pub fn dim(&self) -> usize {
        1 + self.b + self.f
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.y.len() == self.b
            && p.z.len() == self.f
            && p.x >= self.x_min
            && p.x <= self.x_max
            && p.x.is_finite()
    }

    fn check(&self, p: &Point<T>) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(PhiError::Domain(format!(
                "point x={} (|y|={}, |z|={}) outside chart [{}, {}] with (b,f)=({},{})",
                p.x,
                p.y.len(),
                p.z.len(),
                self.x_min,
                self.x_max,
                self.b,
                self.f
            )))
        }
    }
}

/// A point in collar coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: Vec<T>, z: Vec<T>) -> Self {
        Self { x, y, z }
    }
}

/// Diagonal Φ-metric `dx²/x⁴ + g_Y/x² + g_Z` with flat unit-circle factors
/// and vanishing cross terms.
///
/// `blend` optionally replaces the coefficients on `[x_glue, x_full]` by a C²
/// interpolation towards their value at `x_glue`, so that the even reflection
/// across `x_glue` is C¹. Outside that interval the metric is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiMetric<T> {
    pub h_is_zero: bool,
    pub blend: Option<(T, T)>,
}

impl<T: Real> Default for PhiMetric<T> {
    fn default() -> Self {
        Self { h_is_zero: true, blend: None }
    }
}

impl<T: Real> PhiMetric<T> {
    pub fn blended(x_glue: T, x_full: T) -> Self {
        Self { h_is_zero: true, blend: Some((x_glue, x_full)) }
    }

    fn raw(x: T) -> (T, T, T) {
        let x2 = x * x;
        (T::one() / (x2 * x2), T::one() / x2, T::one())
    }

    /// Diagonal coefficients `(g_xx, g_yy, g_zz)` at boundary distance `x`.
    pub fn diag_at(&self, x: T) -> (T, T, T) {
        let full = Self::raw(x);
        let Some((x0, x1)) = self.blend else {
            return full;
        };
        if x >= x1 {
            return full;
        }
        let base = Self::raw(x0);
        let tau = ((x - x0) / (x1 - x0)).max(T::zero());
        // smooth step: 0 at tau=0, 1 at tau=1, flat at both ends
        let s = T::one() - crate::partition::sigma_unchecked(T::half() + T::half() * tau);
        (
            base.0 + s * (full.0 - base.0),
            base.1 + s * (full.1 - base.1),
            base.2 + s * (full.2 - base.2),
        )
    }
}

/// A concrete Φ-geometry with a closed-form heat-kernel oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldModel<T> {
    pub id: ModelId,
    pub chart: FiberedBoundaryChart<T>,
    pub metric: PhiMetric<T>,
    pub has_oracle: bool,
}

impl<T: Real> ManifoldModel<T> {
    pub fn new(id: ModelId, x_min: T, x_max: T) -> Result<Self> {
        let (b, f) = match id {
            ModelId::A => (1, 0),
            ModelId::B => (1, 1),
        };
        Ok(Self {
            id,
            chart: FiberedBoundaryChart::new(b, f, x_min, x_max)?,
            metric: PhiMetric::default(),
            has_oracle: true,
        })
    }

    pub fn model_a() -> Self {
        Self::new(ModelId::A, T::lit(1.0 / 64.0), T::one()).expect("valid default chart")
    }

    pub fn model_b() -> Self {
        Self::new(ModelId::B, T::lit(1.0 / 64.0), T::one()).expect("valid default chart")
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Coordinate components of `g_Φ` at `p`, as an `m × m` matrix.
    pub fn metric_tensor_at(&self, p: &Point<T>) -> Result<Vec<Vec<T>>> {
        self.chart.check(p)?;
        let m = self.dim();
        let (gxx, gyy, gzz) = self.metric.diag_at(p.x);
        let mut g = vec![vec![T::zero(); m]; m];
        g[0][0] = gxx;
        for i in 0..self.chart.b {
            g[1 + i][1 + i] = gyy;
        }
        for j in 0..self.chart.f {
            let k = 1 + self.chart.b + j;
            g[k][k] = gzz;
        }
        Ok(g)
    }

    /// The Φ-frame `x²∂_x, x∂_{y_i}, ∂_{z_j}` as coordinate vectors.
    pub fn phi_frame_at(&self, p: &Point<T>) -> Result<Vec<Vec<T>>> {
        self.chart.check(p)?;
        let m = self.dim();
        let x = p.x;
        let (gxx, gyy, gzz) = self.metric.diag_at(x);
        // for the unblended metric these are exactly x², x and 1
        let weights = |k: usize| -> T {
            if k == 0 {
                T::one() / gxx.sqrt()
            } else if k <= self.chart.b {
                T::one() / gyy.sqrt()
            } else {
                T::one() / gzz.sqrt()
            }
        };
        Ok((0..m)
            .map(|k| {
                let mut v = vec![T::zero(); m];
                v[k] = if self.metric.blend.is_none() {
                    frame_weight(k, self.chart.b, x)
                } else {
                    weights(k)
                };
                v
            })
            .collect())
    }

    /// Riemannian density `√det g_Φ` in collar coordinates.
    pub fn volume_density(&self, p: &Point<T>) -> Result<T> {
        self.chart.check(p)?;
        Ok(self.density_at_x(p.x))
    }

    pub(crate) fn density_at_x(&self, x: T) -> T {
        let (gxx, gyy, gzz) = self.metric.diag_at(x);
        let mut d = gxx;
        for _ in 0..self.chart.b {
            d *= gyy;
        }
        for _ in 0..self.chart.f {
            d *= gzz;
        }
        d.sqrt()
    }

    /// Quasi-distance `d_{q,Φ}`; pass `T::infinity()` for the max form.
    pub fn phi_distance(&self, p: &Point<T>, q: &Point<T>, exponent: T) -> Result<T> {
        self.chart.check(p)?;
        self.chart.check(q)?;
        if exponent.is_nan() || exponent < T::one() {
            return Err(PhiError::Parameter(format!("distance exponent must be >= 1, got {exponent}")));
        }
        let dy = euclid_periodic(&p.y, &q.y);
        let dz = euclid_periodic(&p.z, &q.z);
        Ok(phi_distance_parts(p.x, q.x, dy, dz, exponent))
    }
}

/// Φ-frame weight of frame slot `k` at boundary distance `x`.
#[inline]
pub fn frame_weight<T: Real>(k: usize, b: usize, x: T) -> T {
    if k == 0 {
        x * x
    } else if k <= b {
        x
    } else {
        T::one()
    }
}

/// Shortest signed arc between two angles, in `[-π, π]`.
#[inline]
pub fn periodic_diff<T: Real>(a: T, b: T) -> T {
    let two_pi = T::TAU();
    let mut d = (a - b) % two_pi;
    if d > T::PI() {
        d -= two_pi;
    } else if d < -T::PI() {
        d += two_pi;
    }
    d
}

fn euclid_periodic<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| {
            let d = periodic_diff(u, v);
            d * d
        })
        .sum::<T>()
        .sqrt()
}

/// `d_{q,Φ}` from its three ingredients: `|x-x'|`, `(x+x')‖Δy‖`,
/// `(x+x')²‖Δz‖`.
#[inline]
pub fn phi_distance_parts<T: Real>(x: T, xp: T, dy: T, dz: T, q: T) -> T {
    let s = x + xp;
    let a = (x - xp).abs();
    let b = s * dy;
    let c = s * s * dz;
    if q.is_infinite() {
        a.max(b).max(c)
    } else if q == T::one() {
        a + b + c
    } else if q == T::two() {
        (a * a + b * b + c * c).sqrt()
    } else {
        (a.powf(q) + b.powf(q) + c.powf(q)).powf(T::one() / q)
    }
}

/// `(x, y, z) ↦ (r, y, z)` with `r = 1/x`.
pub fn to_inverted_coords<T: Real>(p: &Point<T>) -> Result<Point<T>> {
    if p.x <= T::zero() || !p.x.is_finite() {
        return Err(PhiError::Domain(format!("inversion needs x > 0, got {}", p.x)));
    }
    Ok(Point { x: T::one() / p.x, y: p.y.clone(), z: p.z.clone() })
}

/// Inverse of [`to_inverted_coords`].
pub fn from_inverted_coords<T: Real>(p: &Point<T>) -> Result<Point<T>> {
    to_inverted_coords(p)
}
