use super::Propagator;
use crate::error::{PhiError, Result};
use crate::geometry::{periodic_diff, to_inverted_coords, Grid, ManifoldModel, ModelId, Point};
use crate::scalar::Real;

const THETA_TERMS: i32 = 5;

/// Unit-coefficient heat kernel of the untruncated model at time `t`.
///
/// ModelA is the plane in polar coordinates `r = 1/x`; ModelB multiplies by
/// the circle kernel `Σ_{|n|≤5} (4πt)^{−1/2} exp(−(Δz + 2πn)²/4t)`.
pub fn oracle_kernel<T: Real>(model: &ManifoldModel<T>, t: T, p: &Point<T>, q: &Point<T>) -> Result<T> {
    if !model.has_oracle {
        return Err(PhiError::Unsupported("model has no closed-form heat kernel".into()));
    }
    if !(t > T::zero()) {
        return Err(PhiError::Parameter(format!("oracle needs t > 0, got {t}")));
    }
    let (pr, qr) = (to_inverted_coords(p)?, to_inverted_coords(q)?);
    let planar = planar_kernel(t, pr.x, pr.y[0], qr.x, qr.y[0]);
    match model.id {
        ModelId::A => Ok(planar),
        ModelId::B => Ok(planar * circle_kernel(t, periodic_diff(p.z[0], q.z[0]))),
    }
}

/// `(4πt)^{−1} exp(−|P − Q|²/4t)` for planar points in polar form.
pub fn planar_kernel<T: Real>(t: T, r1: T, th1: T, r2: T, th2: T) -> T {
    let d2 = r1 * r1 + r2 * r2 - T::two() * r1 * r2 * (th1 - th2).cos();
    let four_t = T::lit(4.0) * t;
    (-d2.max(T::zero()) / four_t).exp() / (T::PI() * four_t)
}

pub fn circle_kernel<T: Real>(t: T, dz: T) -> T {
    let four_t = T::lit(4.0) * t;
    let norm = (T::PI() * four_t).sqrt();
    (-THETA_TERMS..=THETA_TERMS)
        .map(|n| {
            let s = dz + T::TAU() * T::lit(n as f64);
            (-s * s / four_t).exp()
        })
        .sum::<T>()
        / norm
}

/// Planar kernel mass falling outside the annulus `1/x_max ≤ r ≤ 1/x_min`,
/// by polar quadrature independent of the grid.
pub fn annulus_leakage<T: Real>(t: T, r0: T, r_in: T, r_out: T) -> T {
    // radial profile after integrating the angle: e^{−(r²+r0²)/4t} I0(r r0/2t) r / 2t
    let nr = 4000;
    let nth = 720;
    let dth = T::TAU() / T::of_usize(nth);
    let inner = |r: T| -> T {
        (0..nth).map(|k| planar_kernel(t, r, T::of_usize(k) * dth, r0, T::zero())).sum::<T>() * dth * r
    };
    let simpson = |a: T, b: T| -> T {
        let h = (b - a) / T::of_usize(nr);
        let mut s = inner(a) + inner(b);
        for k in 1..nr {
            let w = if k % 2 == 1 { T::lit(4.0) } else { T::two() };
            s += w * inner(a + T::of_usize(k) * h);
        }
        s * h / T::lit(3.0)
    };
    T::one() - simpson(r_in, r_out)
}

/// One row of an oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow<T> {
    pub t: T,
    pub sup_err: T,
    pub l2_err: T,
    pub mass: T,
}

/// Placement of the Gaussian initial datum `u0 = H(s0, ·, p0)`, with `p0` at
/// `r = r0`, `y = z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec<T> {
    pub r0: T,
    pub s0: T,
}

impl<T: Real> Default for BlobSpec<T> {
    fn default() -> Self {
        Self { r0: T::lit(5.0), s0: T::lit(0.4) }
    }
}

impl<T: Real> BlobSpec<T> {
    fn center(&self, model: &ManifoldModel<T>) -> Point<T> {
        let z = if model.chart.f > 0 { vec![T::zero()] } else { vec![] };
        Point::new(T::one() / self.r0, vec![T::zero()], z)
    }

    /// Oracle solution at elapsed time `t` on every grid node.
    pub fn exact(&self, grid: &Grid<T>, t: T) -> Result<Vec<T>> {
        let c = self.center(&grid.model);
        (0..grid.len()).map(|n| oracle_kernel(&grid.model, self.s0 + t, &grid.point(n), &c)).collect()
    }
}

/// Runs the propagator from the blob and compares with the oracle at every
/// time level with `t >= t_from`. Errors are relative to the oracle's sup
/// (and L² norm) at the same time.
pub fn oracle_check<T: Real>(prop: &Propagator<T>, grid: &Grid<T>, blob: BlobSpec<T>, times: &[T], t_from: T) -> Result<Vec<OracleRow<T>>> {
    let u0 = blob.exact(grid, T::zero())?;
    let c = prop.coef.constant.ok_or_else(|| PhiError::Unsupported("oracle comparison needs a constant coefficient".into()))?;
    let op = prop.op();
    let mut rows = vec![];
    let mut u = u0;
    for k in 0..times.len() {
        if k > 0 {
            u = prop.step(&u, times[k - 1], times[k], None)?;
        }
        if times[k] + T::lit(1e-12) < t_from {
            continue;
        }
        let ex = blob.exact(grid, c * times[k])?;
        let diff: Vec<T> = u.iter().zip(&ex).map(|(a, b)| *a - *b).collect();
        let smax = ex.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let emax = diff.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let l2 = (op.inner(&diff, &diff) / op.inner(&ex, &ex)).sqrt();
        rows.push(OracleRow { t: times[k], sup_err: emax / smax, l2_err: l2, mass: op.mass(&u) });
    }
    Ok(rows)
}

/// Mass `∫u dvol` at every time level, starting from `u0`.
pub fn mass_report<T: Real>(prop: &Propagator<T>, u0: &[T], times: &[T]) -> Result<Vec<(T, T)>> {
    let op = prop.op();
    let mut out = vec![(times[0], op.mass(u0))];
    let mut u = u0.to_vec();
    for k in 1..times.len() {
        u = prop.step(&u, times[k - 1], times[k], None)?;
        out.push((times[k], op.mass(&u)));
    }
    Ok(out)
}
