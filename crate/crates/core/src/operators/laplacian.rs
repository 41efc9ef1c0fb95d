use rayon::prelude::*;

use crate::error::{PhiError, Result};
use crate::geometry::{Grid, ModelId, PhiMetric};
use crate::scalar::Real;

/// Finite-volume stiffness `K` and lumped mass `M` of the positive
/// Laplace-Beltrami operator on a tensor grid, `Δ_h = M⁻¹K`.
///
/// The grid is `nx` rows in x (Neumann at both ends) times a periodic
/// `ny × nz` torus. Each row carries its physical boundary distance so the
/// same type serves the collar grid and the doubled interior grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// physical `x` of each row
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    /// mass of one node in row `i`
    pub vol_row: Vec<T>,
    /// flux coefficient across the face between rows `i` and `i+1`
    pub cx: Vec<T>,
    pub cy: Vec<T>,
    pub cz: Vec<T>,
    pub symmetric: bool,
    pub model: Option<ModelId>,
    pub spacing: T,
    pub boundary: &'static str,
}

/// Geometric description of x rows, used to build a [`DiscreteOperator`].
pub(crate) struct RowProfile<'a, T> {
    /// row coordinate on a uniform axis of step `h`
    pub s: &'a [T],
    pub h: T,
    /// physical boundary distance seen by row/face coordinate `s`
    pub to_x: &'a (dyn Fn(T) -> T + Sync),
    pub b: usize,
    pub f: usize,
}

fn densities<T: Real>(metric: &PhiMetric<T>, x: T, b: usize, f: usize) -> (T, T, T, T) {
    let (gxx, gyy, gzz) = metric.diag_at(x);
    let mut det = gxx;
    for _ in 0..b {
        det *= gyy;
    }
    for _ in 0..f {
        det *= gzz;
    }
    let sq = det.sqrt();
    (sq, sq / gxx, sq / gyy, sq / gzz)
}

impl<T: Real> DiscreteOperator<T> {
    pub(crate) fn from_rows(
        metric: &PhiMetric<T>,
        rows: RowProfile<'_, T>,
        y: Vec<T>,
        z: Vec<T>,
        hy: T,
        hz: T,
    ) -> Result<Self> {
        let nx = rows.s.len();
        let ny = y.len().max(1);
        let nz = z.len().max(1);
        let h = rows.h;
        let mut vol_row = Vec::with_capacity(nx);
        let mut cy = Vec::with_capacity(nx);
        let mut cz = Vec::with_capacity(nx);
        let mut xs = Vec::with_capacity(nx);
        for i in 0..nx {
            let x = (rows.to_x)(rows.s[i]);
            let hx = if i == 0 || i + 1 == nx { h * T::half() } else { h };
            let (sq, _, wy, wz) = densities(metric, x, rows.b, rows.f);
            xs.push(x);
            vol_row.push(sq * hx * hy * hz);
            cy.push(if rows.b > 0 { wy * hx * hz / hy } else { T::zero() });
            cz.push(if rows.f > 0 { wz * hx * hy / hz } else { T::zero() });
        }
        let cx: Vec<T> = (0..nx - 1)
            .map(|i| {
                let xm = (rows.to_x)((rows.s[i] + rows.s[i + 1]) * T::half());
                densities(metric, xm, rows.b, rows.f).1 * hy * hz / h
            })
            .collect();
        let bad = vol_row.iter().chain(&cx).chain(&cy).chain(&cz).position(|c| !c.is_finite() || *c < T::zero());
        if let Some(k) = bad {
            return Err(PhiError::Assembly(format!("degenerate metric coefficient at entry {k}")));
        }
        if vol_row.iter().any(|v| *v <= T::zero()) {
            return Err(PhiError::Assembly("non-positive control volume".into()));
        }
        Ok(Self {
            nx,
            ny,
            nz,
            x: xs,
            y,
            z,
            vol_row,
            cx,
            cy,
            cz,
            symmetric: true,
            model: None,
            spacing: h,
            boundary: "neumann",
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.ny * self.nz
    }

    /// Physical `(x, y, z)` of node `n`.
    #[inline]
    pub fn xyz(&self, n: usize) -> (T, T, T) {
        let p = self.plane();
        let i = n / p;
        let j = (n % p) / self.nz;
        let l = n % self.nz;
        let y = if self.y.is_empty() { T::zero() } else { self.y[j] };
        let z = if self.z.is_empty() { T::zero() } else { self.z[l] };
        (self.x[i], y, z)
    }

    /// Lumped mass of each node.
    pub fn masses(&self) -> Vec<T> {
        let p = self.plane();
        self.vol_row.iter().flat_map(|&v| std::iter::repeat_n(v, p)).collect()
    }

    /// Stiffness action `Ku`; `Σ_n (Ku)_n = 0` and `⟨Ku, v⟩ = ⟨u, Kv⟩`.
    pub fn apply_k(&self, u: &[T], out: &mut [T]) {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let p = self.plane();
        out.par_chunks_mut(p).enumerate().for_each(|(i, row)| {
            let c = &u[i * p..(i + 1) * p];
            let cxm = if i > 0 { self.cx[i - 1] } else { T::zero() };
            let cxp = if i + 1 < nx { self.cx[i] } else { T::zero() };
            let (cy, cz) = (self.cy[i], self.cz[i]);
            for j in 0..ny {
                let jp = if j + 1 == ny { 0 } else { j + 1 };
                let jm = if j == 0 { ny - 1 } else { j - 1 };
                for l in 0..nz {
                    let q = j * nz + l;
                    let v = c[q];
                    let mut acc = T::zero();
                    if i > 0 {
                        acc += cxm * (v - u[(i - 1) * p + q]);
                    }
                    if i + 1 < nx {
                        acc += cxp * (v - u[(i + 1) * p + q]);
                    }
                    if ny > 1 {
                        acc += cy * (v + v - c[jp * nz + l] - c[jm * nz + l]);
                    }
                    if nz > 1 {
                        let lp = if l + 1 == nz { 0 } else { l + 1 };
                        let lm = if l == 0 { nz - 1 } else { l - 1 };
                        acc += cz * (v + v - c[j * nz + lp] - c[j * nz + lm]);
                    }
                    row[q] = acc;
                }
            }
        });
    }

    /// `Δ_h u = M⁻¹Ku`.
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.apply_k(u, &mut out);
        let p = self.plane();
        out.par_chunks_mut(p).zip(&self.vol_row).for_each(|(row, &v)| row.iter_mut().for_each(|o| *o /= v));
        out
    }

    /// `⟨u, v⟩` weighted by the lumped mass.
    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        let p = self.plane();
        u.chunks(p)
            .zip(v.chunks(p))
            .zip(&self.vol_row)
            .map(|((a, b), &w)| w * a.iter().zip(b).map(|(&s, &t)| s * t).sum::<T>())
            .sum()
    }

    pub fn mass(&self, u: &[T]) -> T {
        let p = self.plane();
        u.chunks(p).zip(&self.vol_row).map(|(a, &w)| w * a.iter().copied().sum::<T>()).sum()
    }

    /// Diagonal of `K`.
    pub fn k_diagonal(&self) -> Vec<T> {
        let p = self.plane();
        let mut d = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            let mut v = T::zero();
            if i > 0 {
                v += self.cx[i - 1];
            }
            if i + 1 < self.nx {
                v += self.cx[i];
            }
            if self.ny > 1 {
                v += T::two() * self.cy[i];
            }
            if self.nz > 1 {
                v += T::two() * self.cz[i];
            }
            d.extend(std::iter::repeat_n(v, p));
        }
        d
    }
}

/// Positive Laplacian of the model metric on `grid`, Neumann at `x_min` and
/// `x_max`.
pub fn assemble_laplacian<T: Real>(grid: &Grid<T>) -> Result<DiscreteOperator<T>> {
    let ch = grid.model.chart;
    if grid.nx < 16 || (ch.b > 0 && grid.ny < 16) || (ch.f > 0 && grid.nz < 16) {
        return Err(PhiError::Parameter(format!(
            "Laplacian assembly needs at least 16 nodes per axis, got {}x{}x{}",
            grid.nx, grid.ny, grid.nz
        )));
    }
    let ident = |s: T| s;
    let mut op = DiscreteOperator::from_rows(
        &grid.model.metric,
        RowProfile { s: &grid.x, h: grid.h(), to_x: &ident, b: ch.b, f: ch.f },
        grid.y.clone(),
        grid.z.clone(),
        grid.hy,
        grid.hz,
    )?;
    op.model = Some(grid.model.id);
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;
    use rand::{Rng, SeedableRng};

    fn op(model: ManifoldModel<f64>, nx: usize, ny: usize, nz: usize) -> (Grid<f64>, DiscreteOperator<f64>) {
        let g = Grid::new(model, nx, ny, nz).unwrap();
        let o = assemble_laplacian(&g).unwrap();
        (g, o)
    }

    #[test]
    fn annihilates_constants() {
        let (g, o) = op(ManifoldModel::model_b(), 33, 16, 16);
        let d = o.apply(&vec![2.0; g.len()]);
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn fiber_mode_is_eigenfunction() {
        let (g, o) = op(ManifoldModel::model_b(), 33, 16, 64);
        let u = g.sample(|_, _, z| z.sin());
        let d = o.apply(&u);
        let err = d.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2.0 * g.hz * g.hz);
    }

    #[test]
    fn radial_function_matches_polar_laplacian() {
        // f(r) = exp(−(r−3)²), Δf = −(f'' + f'/r)
        let f = |r: f64| (-(r - 3.0) * (r - 3.0)).exp();
        let lap = |r: f64| {
            let e = f(r);
            let d1 = -2.0 * (r - 3.0) * e;
            let d2 = (4.0 * (r - 3.0) * (r - 3.0) - 2.0) * e;
            -(d2 + d1 / r)
        };
        let mut errs = vec![];
        for nx in [257, 513] {
            let (g, o) = op(ManifoldModel::model_a(), nx, 16, 1);
            let u = g.sample(|x, _, _| f(1.0 / x));
            let d = o.apply(&u);
            let e = (0..g.len())
                .filter(|&n| g.x_of(n) > 0.15 && g.x_of(n) < 1.0)
                .map(|n| (d[n] - lap(1.0 / g.x_of(n))).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < 0.05, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
    }

    #[test]
    fn symmetric_and_positive() {
        let (g, o) = op(ManifoldModel::model_b(), 17, 16, 16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = o.inner(&o.apply(&u), &v);
        let b = o.inner(&u, &o.apply(&v));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        assert!(o.inner(&o.apply(&u), &u) >= 0.0);
        let mut ku = vec![0.0; g.len()];
        o.apply_k(&u, &mut ku);
        assert!(ku.iter().sum::<f64>().abs() < 1e-9 * ku.iter().map(|v| v.abs()).sum::<f64>());
    }

    #[test]
    fn rejects_coarse_grids() {
        let g = Grid::new(ManifoldModel::<f64>::model_a(), 8, 16, 1).unwrap();
        assert!(assemble_laplacian(&g).is_err());
    }
}
