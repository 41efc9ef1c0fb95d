use std::sync::Arc;

use rayon::prelude::*;

use super::sigma_unchecked;
use crate::error::{PhiError, Result};
use crate::geometry::{periodic_diff, Grid};
use crate::scalar::Real;

/// Boundary point `(0, ȳ, z̄)`; absent angles are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<T> {
    pub y: Option<T>,
    pub z: Option<T>,
}

/// Anchors form the product lattice `ys × zs`; anchor `k` is
/// `(ys[k / zs.len()], zs[k % zs.len()])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig<T> {
    pub eps: T,
    pub vartheta: T,
    pub ys: Vec<Option<T>>,
    pub zs: Vec<Option<T>>,
}

impl<T: Real> PartitionConfig<T> {
    /// Lattice `ϑΛ` on the boundary, with the step shrunk so that it divides
    /// the period: `⌈2π/ϑ⌉` anchors per periodic direction.
    pub fn lattice(grid: &Grid<T>, eps: T, vartheta: T) -> Result<Self> {
        if !(eps > T::zero() && eps < T::one()) {
            return Err(PhiError::Parameter(format!("eps must lie in (0,1), got {eps}")));
        }
        if !(vartheta > T::zero() && vartheta < T::one()) {
            return Err(PhiError::Parameter(format!("vartheta must lie in (0,1), got {vartheta}")));
        }
        let ch = grid.model.chart;
        let count = (T::TAU() / vartheta).ceil().to_usize().unwrap_or(1).max(1);
        let step = T::TAU() / T::of_usize(count);
        let axis = |present: bool| -> Vec<Option<T>> {
            if present {
                (0..count).map(|k| Some(T::of_usize(k) * step)).collect()
            } else {
                vec![None]
            }
        };
        Ok(Self { eps, vartheta, ys: axis(ch.b > 0), zs: axis(ch.f > 0) })
    }

    pub fn len(&self) -> usize {
        self.ys.len() * self.zs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn anchor(&self, k: usize) -> Anchor<T> {
        let nz = self.zs.len();
        Anchor { y: self.ys[k / nz], z: self.zs[k % nz] }
    }

    pub fn anchors(&self) -> Vec<Anchor<T>> {
        (0..self.len()).map(|k| self.anchor(k)).collect()
    }
}

/// `(φ̂, ψ̂)` at a single point.
#[inline]
pub fn raw_pair_at<T: Real>(a: &Anchor<T>, eps: T, x: T, y: T, z: T) -> (T, T) {
    let dy = a.y.map_or(T::zero(), |ay| periodic_diff(y, ay).abs());
    let dz = a.z.map_or(T::zero(), |az| periodic_diff(z, az).abs());
    let (sx, sy, sz) = (x / eps, x * dy, eps * x * x * dz);
    let phi = sigma_unchecked(sx) * sigma_unchecked(sy) * sigma_unchecked(sz);
    let psi = sigma_unchecked(sx * T::half()) * sigma_unchecked(sy * T::half()) * sigma_unchecked(sz * T::half());
    (phi, psi)
}

/// `φ̂ = σ(x/ε)σ(x‖y−ȳ‖)σ(εx²‖z−z̄‖)` and `ψ̂` with every argument halved.
pub fn raw_bumps<T: Real>(anchor: &Anchor<T>, eps: T, grid: &Grid<T>) -> (Vec<T>, Vec<T>) {
    (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (x, y, z) = grid.xyz(n);
            raw_pair_at(anchor, eps, x, y, z)
        })
        .unzip()
}

/// Collar cutoff multiplying the normalized bumps: 1 for `x ≤ 3ε/4`, 0 for
/// `x ≥ ε`.
#[inline]
pub fn collar_cutoff<T: Real>(x: T, eps: T) -> T {
    sigma_unchecked((T::two() * x / eps - T::one()).max(T::zero()))
}

#[inline]
fn outer_cutoff<T: Real>(x: T, eps: T) -> T {
    sigma_unchecked((x / eps - T::one()).max(T::zero()))
}

/// Normalizes explicit raw fields: `φ_i = χ φ̂_i / Σφ̂`, `ψ_i = χ_ψ ψ̂_i / Σψ̂`.
pub fn normalize_fields<T: Real>(grid: &Grid<T>, eps: T, phi_hat: &[Vec<T>], psi_hat: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    let nn = grid.len();
    let sum = |fs: &[Vec<T>]| -> Vec<T> { (0..nn).map(|n| fs.iter().map(|f| f[n]).sum()).collect() };
    let (sp, ss) = (sum(phi_hat), sum(psi_hat));
    check_cover(grid, eps, &sp)?;
    let phi = phi_hat
        .iter()
        .map(|f| (0..nn).map(|n| if sp[n] > T::zero() { collar_cutoff(grid.x_of(n), eps) * f[n] / sp[n] } else { T::zero() }).collect())
        .collect();
    let psi = psi_hat
        .iter()
        .map(|f| (0..nn).map(|n| if ss[n] > T::zero() { outer_cutoff(grid.x_of(n), eps) * f[n] / ss[n] } else { T::zero() }).collect())
        .collect();
    Ok((phi, psi))
}

fn check_cover<T: Real>(grid: &Grid<T>, eps: T, sum_phi_hat: &[T]) -> Result<()> {
    for (n, &s) in sum_phi_hat.iter().enumerate() {
        let (x, y, z) = grid.xyz(n);
        if x < eps && !(s > T::zero()) {
            return Err(PhiError::Configuration(format!(
                "bump family leaves the point x={x}, y={y}, z={z} uncovered; decrease vartheta"
            )));
        }
    }
    Ok(())
}

/// One-dimensional factor tables of the separable bumps
/// `φ̂ = X(x)·Y(x, y)·Z(x, z)`.
#[derive(Debug, Clone)]
struct Factors<T> {
    /// per row
    x: Vec<T>,
    /// per y-anchor: `nx × ny`
    y: Vec<Vec<T>>,
    /// per z-anchor: `nx × nz`
    z: Vec<Vec<T>>,
    sum_y: Vec<T>,
    sum_z: Vec<T>,
}

impl<T: Real> Factors<T> {
    fn build(grid: &Grid<T>, cfg: &PartitionConfig<T>, halved: bool) -> Self {
        let eps = cfg.eps;
        let k = if halved { T::half() } else { T::one() };
        let x: Vec<T> = grid.x.iter().map(|&x| sigma_unchecked(k * x / eps)).collect();
        let table = |anchors: &[Option<T>], n: usize, coords: &[T], w: &dyn Fn(T) -> T| -> Vec<Vec<T>> {
            anchors
                .iter()
                .map(|a| {
                    let mut v = Vec::with_capacity(grid.nx * n);
                    for (i, &xi) in grid.x.iter().enumerate() {
                        for c in 0..n {
                            // rows outside the x-support are irrelevant; zero them so tables compare equal
                            if x[i] == T::zero() {
                                v.push(T::zero());
                                continue;
                            }
                            v.push(match a {
                                Some(a0) => sigma_unchecked(k * w(xi) * periodic_diff(coords[c], *a0).abs()),
                                None => T::one(),
                            });
                        }
                    }
                    v
                })
                .collect()
        };
        let y = table(&cfg.ys, grid.ny, &grid.y, &|x| x);
        let z = table(&cfg.zs, grid.nz, &grid.z, &|x| eps * x * x);
        let sum = |t: &[Vec<T>]| -> Vec<T> { (0..t[0].len()).map(|q| t.iter().map(|v| v[q]).sum()).collect() };
        let (sum_y, sum_z) = (sum(&y), sum(&z));
        Self { x, y, z, sum_y, sum_z }
    }

    #[inline]
    fn at(&self, grid: &Grid<T>, iy: usize, iz: usize, n: usize) -> T {
        let (i, j, l) = grid.ijl(n);
        self.x[i] * self.y[iy][i * grid.ny + j] * self.z[iz][i * grid.nz + l]
    }

    #[inline]
    fn sum_at(&self, grid: &Grid<T>, n: usize) -> T {
        let (i, j, l) = grid.ijl(n);
        self.x[i] * self.sum_y[i * grid.ny + j] * self.sum_z[i * grid.nz + l]
    }
}

/// Bumps over all anchors with their normalizations. Per-anchor fields are
/// evaluated on demand from separable factor tables.
#[derive(Debug, Clone)]
pub struct BumpFamily<T> {
    pub grid: Arc<Grid<T>>,
    pub config: PartitionConfig<T>,
    phi_f: Factors<T>,
    psi_f: Factors<T>,
    sum_phi_hat: Vec<T>,
    sum_psi_hat: Vec<T>,
    total: Vec<T>,
}

/// One linear solve of the boundary parametrix: anchors sharing `ψ̂` and the
/// frozen coefficient.
#[derive(Debug, Clone)]
pub struct AnchorGroup<T> {
    pub members: Vec<usize>,
    pub frozen: T,
    /// `Σ_{members} φ_i`
    pub phi: Vec<T>,
    pub psi_hat: Vec<T>,
}

/// Builds and normalizes the family for `config` on `grid`.
pub fn normalize<T: Real>(grid: Arc<Grid<T>>, config: PartitionConfig<T>) -> Result<BumpFamily<T>> {
    if config.is_empty() {
        return Err(PhiError::Configuration("anchor list is empty".into()));
    }
    let eps = config.eps;
    let phi_f = Factors::build(&grid, &config, false);
    let psi_f = Factors::build(&grid, &config, true);
    let nn = grid.len();
    let sum_phi_hat: Vec<T> = (0..nn).map(|n| phi_f.sum_at(&grid, n)).collect();
    let sum_psi_hat: Vec<T> = (0..nn).map(|n| psi_f.sum_at(&grid, n)).collect();
    check_cover(&grid, eps, &sum_phi_hat)?;
    let total = (0..nn)
        .map(|n| if sum_phi_hat[n] > T::zero() { collar_cutoff(grid.x_of(n), eps) } else { T::zero() })
        .collect();
    Ok(BumpFamily { grid, config, phi_f, psi_f, sum_phi_hat, sum_psi_hat, total })
}

impl<T: Real> BumpFamily<T> {
    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.is_empty()
    }

    pub fn eps(&self) -> T {
        self.config.eps
    }

    fn split(&self, k: usize) -> (usize, usize) {
        let nz = self.config.zs.len();
        (k / nz, k % nz)
    }

    pub fn phi_hat(&self, k: usize) -> Vec<T> {
        let (a, b) = self.split(k);
        (0..self.grid.len()).map(|n| self.phi_f.at(&self.grid, a, b, n)).collect()
    }

    pub fn psi_hat(&self, k: usize) -> Vec<T> {
        let (a, b) = self.split(k);
        (0..self.grid.len()).map(|n| self.psi_f.at(&self.grid, a, b, n)).collect()
    }

    pub fn raw(&self, k: usize) -> (Vec<T>, Vec<T>) {
        (self.phi_hat(k), self.psi_hat(k))
    }

    /// Normalized `φ_k`.
    pub fn phi(&self, k: usize) -> Vec<T> {
        let ph = self.phi_hat(k);
        ph.iter()
            .zip(&self.sum_phi_hat)
            .zip(&self.total)
            .map(|((&p, &s), &c)| if s > T::zero() { c * p / s } else { T::zero() })
            .collect()
    }

    /// Normalized `ψ_k`.
    pub fn psi(&self, k: usize) -> Vec<T> {
        let eps = self.config.eps;
        let g = &*self.grid;
        let ps = self.psi_hat(k);
        (0..g.len())
            .map(|n| {
                let s = self.sum_psi_hat[n];
                if s > T::zero() {
                    outer_cutoff(g.x_of(n), eps) * ps[n] / s
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn sum_phi_hat(&self) -> &[T] {
        &self.sum_phi_hat
    }

    pub fn total(&self) -> &[T] {
        &self.total
    }

    /// Number of anchors whose `φ̂` is nonzero at each node.
    pub fn overlap_counts(&self) -> Vec<usize> {
        let g = &*self.grid;
        let count = |t: &[Vec<T>], q: usize| t.iter().filter(|v| v[q] > T::zero()).count();
        (0..g.len())
            .map(|n| {
                let (i, j, l) = g.ijl(n);
                if self.phi_f.x[i] > T::zero() {
                    count(&self.phi_f.y, i * g.ny + j) * count(&self.phi_f.z, i * g.nz + l)
                } else {
                    0
                }
            })
            .collect()
    }

    /// Anchors grouped by identical `ψ̂` and identical frozen coefficient
    /// `frozen[k]`; each group is one solve by linearity.
    pub fn groups(&self, frozen: &[T]) -> Vec<AnchorGroup<T>> {
        let classes = |t: &[Vec<T>]| -> Vec<usize> {
            let mut reps: Vec<usize> = vec![];
            t.iter()
                .enumerate()
                .map(|(a, v)| match reps.iter().position(|&r| t[r] == *v) {
                    Some(c) => c,
                    None => {
                        reps.push(a);
                        reps.len() - 1
                    }
                })
                .collect()
        };
        let (cy, cz) = (classes(&self.psi_f.y), classes(&self.psi_f.z));
        let mut keyed: Vec<((usize, usize, T), Vec<usize>)> = vec![];
        for k in 0..self.len() {
            let (a, b) = self.split(k);
            let key = (cy[a], cz[b], frozen[k]);
            match keyed.iter_mut().find(|(kk, _)| *kk == key) {
                Some((_, m)) => m.push(k),
                None => keyed.push((key, vec![k])),
            }
        }
        let g = &*self.grid;
        keyed
            .into_par_iter()
            .map(|((_, _, c), members)| {
                // Σ_{(a,b)∈members} Y_a Z_b, accumulated per y-anchor
                let mut by_y: Vec<(usize, Vec<T>)> = vec![];
                for &k in &members {
                    let (a, b) = self.split(k);
                    let zt = &self.phi_f.z[b];
                    match by_y.iter_mut().find(|(ya, _)| *ya == a) {
                        Some((_, acc)) => acc.iter_mut().zip(zt).for_each(|(s, &v)| *s += v),
                        None => by_y.push((a, zt.clone())),
                    }
                }
                let phi: Vec<T> = (0..g.len())
                    .map(|n| {
                        let s = self.sum_phi_hat[n];
                        if !(s > T::zero()) {
                            return T::zero();
                        }
                        let (i, j, l) = g.ijl(n);
                        let raw: T = by_y.iter().map(|(a, zs)| self.phi_f.y[*a][i * g.ny + j] * zs[i * g.nz + l]).sum();
                        self.total[n] * self.phi_f.x[i] * raw / s
                    })
                    .collect();
                let psi_hat = self.psi_hat(members[0]);
                AnchorGroup { members, frozen: c, phi, psi_hat }
            })
            .collect()
    }
}

/// `Σφ_i`; equal to 1 on `{x ≤ 3ε/4}` and 0 on `{x ≥ ε}`.
pub fn phi_total<T: Real>(family: &BumpFamily<T>) -> &[T] {
    family.total()
}
