use std::sync::Arc;

use super::{normalize, BumpFamily, PartitionConfig};
use crate::error::{PhiError, Result};
use crate::fit::loglog_slope;
use crate::geometry::{periodic_diff, Grid};
use crate::scalar::Real;
use crate::spaces::{alpha_seminorm, k_alpha_norm, NormSpec, SpaceTimeField};

/// Measured properties of one bump family.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAudit<T> {
    pub eps: T,
    pub anchor_count: usize,
    pub max_overlap: usize,
    /// largest `d_{1,Φ}` diameter of a `φ̂` support
    pub diam_max: T,
    /// `C̄ε` with `C̄ = max{1, 4√b, 4√f}`
    pub diam_bound: T,
    pub diam_witness: Option<(usize, usize)>,
    /// `[φ̂]_α` of the first anchor
    pub seminorm: T,
    pub seminorm_times_eps_alpha: T,
    /// `ψ̂ = 1` wherever `φ̂ > 0`, for every anchor
    pub property_i_ok: bool,
    pub property_i_witness: Option<usize>,
    /// `‖φ̂‖_{2,α}` of the first anchor
    pub membership_k2: T,
    /// `max |Σφ_i − 1|` over `{x ≤ ε/2}`
    pub sum_to_one_max_err: T,
}

impl<T: Real> PartitionAudit<T> {
    pub fn diameter_ok(&self) -> bool {
        self.diam_max <= self.diam_bound
    }

    pub fn passed(&self) -> bool {
        self.property_i_ok && self.diameter_ok() && self.membership_k2.is_finite() && self.sum_to_one_max_err <= T::lit(1e-12)
    }
}

/// `C̄ = max{1, 4√b, 4√f}`.
pub fn diameter_constant<T: Real>(b: usize, f: usize) -> T {
    T::one().max(T::lit(4.0) * T::of_usize(b).sqrt()).max(T::lit(4.0) * T::of_usize(f).sqrt())
}

/// Largest periodic gap between the supports of two rows of a factor table.
fn max_gap<T: Real>(coords: &[T], a: &[T], b: &[T]) -> (T, usize, usize) {
    let mut best = (T::zero(), 0, 0);
    if coords.is_empty() {
        return best;
    }
    for (j, &va) in a.iter().enumerate() {
        if va <= T::zero() {
            continue;
        }
        for (k, &vb) in b.iter().enumerate() {
            if vb > T::zero() {
                let d = periodic_diff(coords[j], coords[k]).abs();
                if d > best.0 {
                    best = (d, j, k);
                }
            }
        }
    }
    best
}

fn support_diameter<T: Real>(fam: &BumpFamily<T>) -> (T, Option<(usize, usize)>) {
    let g = &*fam.grid;
    let eps = fam.eps();
    let rows: Vec<usize> = (0..g.nx).filter(|&i| g.x[i] < eps).collect();
    let row_of = |field: &[T], i: usize, n: usize| field[i * n..(i + 1) * n].to_vec();
    // per-anchor tables in y and z, taken from the first anchor of each line
    let nzs = fam.config.zs.len();
    let y_tables: Vec<Vec<T>> = (0..fam.config.ys.len()).map(|a| fam.phi_hat(a * nzs)).collect();
    let z_tables: Vec<Vec<T>> = (0..nzs).map(|b| fam.phi_hat(b)).collect();
    let mut best = (T::zero(), None);
    for &i in &rows {
        for &k in &rows {
            let s = g.x[i] + g.x[k];
            let dx = (g.x[i] - g.x[k]).abs();
            let mut my = (T::zero(), 0, 0);
            for t in &y_tables {
                // y profile at l = 0
                let ya: Vec<T> = (0..g.ny).map(|j| t[g.idx(i, j, 0)]).collect();
                let yb: Vec<T> = (0..g.ny).map(|j| t[g.idx(k, j, 0)]).collect();
                let m = max_gap(&g.y, &ya, &yb);
                if m.0 > my.0 {
                    my = m;
                }
            }
            let mut mz = (T::zero(), 0, 0);
            for t in &z_tables {
                let za = row_of(t, i, g.ny * g.nz).iter().take(g.nz).copied().collect::<Vec<_>>();
                let zb = row_of(t, k, g.ny * g.nz).iter().take(g.nz).copied().collect::<Vec<_>>();
                let m = max_gap(&g.z, &za, &zb);
                if m.0 > mz.0 {
                    mz = m;
                }
            }
            let d = dx + s * my.0 + s * s * mz.0;
            if d > best.0 {
                best = (d, Some((g.idx(i, my.1, mz.1), g.idx(k, my.2, mz.2))));
            }
        }
    }
    best
}

/// Measures properties I–IV of the family; never fails on a violated check.
pub fn audit_report<T: Real>(fam: &BumpFamily<T>, spec: &NormSpec<T>) -> Result<PartitionAudit<T>> {
    spec.validate()?;
    let g = fam.grid.clone();
    let eps = fam.eps();
    // I: raw ψ̂ is exactly 1 on supp φ̂; checked on one line of anchors per axis
    let mut witness = None;
    let nzs = fam.config.zs.len();
    let probe: Vec<usize> = (0..fam.config.ys.len()).map(|a| a * nzs).chain(0..nzs).collect();
    for &k in &probe {
        let (ph, ps) = fam.raw(k);
        if let Some(n) = (0..g.len()).find(|&n| ph[n] > T::zero() && ps[n] != T::one()) {
            witness = Some(n);
            break;
        }
    }
    let sum_err = (0..g.len())
        .filter(|&n| g.x_of(n) <= eps * T::half())
        .map(|n| (fam.total()[n] - T::one()).abs())
        .fold(T::zero(), |m, v| m.max(v));
    let (diam, diam_w) = support_diameter(fam);
    let ch = g.model.chart;
    let ph0 = fam.phi_hat(0);
    let field = SpaceTimeField::constant_in_time(g.clone(), vec![T::zero()], &ph0);
    let semi = alpha_seminorm(&field, &spec.with_k(0))?;
    let three = SpaceTimeField::constant_in_time(g.clone(), vec![T::zero(), T::lit(1e-3), T::lit(2e-3)], &ph0);
    let member = k_alpha_norm(&three, &spec.with_k(2))?.total;
    Ok(PartitionAudit {
        eps,
        anchor_count: fam.len(),
        max_overlap: fam.overlap_counts().into_iter().max().unwrap_or(0),
        diam_max: diam,
        diam_bound: diameter_constant::<T>(ch.b, ch.f) * eps,
        diam_witness: diam_w,
        seminorm: semi,
        seminorm_times_eps_alpha: semi * eps.powf(spec.alpha),
        property_i_ok: witness.is_none(),
        property_i_witness: witness,
        membership_k2: member,
        sum_to_one_max_err: sum_err,
    })
}

/// Like [`audit_report`] but turns any failed check into an audit error
/// naming its witness.
pub fn audit<T: Real>(fam: &BumpFamily<T>, spec: &NormSpec<T>) -> Result<PartitionAudit<T>> {
    let r = audit_report(fam, spec)?;
    let g = &*fam.grid;
    let at = |n: usize| {
        let (x, y, z) = g.xyz(n);
        format!("(x={x}, y={y}, z={z})")
    };
    if let Some(n) = r.property_i_witness {
        return Err(PhiError::Audit(format!("psi-hat is not 1 on the support of phi-hat at {}", at(n))));
    }
    if r.sum_to_one_max_err > T::lit(1e-12) {
        return Err(PhiError::Audit(format!("partition of unity defect {} on the sub-collar", r.sum_to_one_max_err)));
    }
    if !r.diameter_ok() {
        let w = r.diam_witness.map(|(a, b)| format!(" between {} and {}", at(a), at(b))).unwrap_or_default();
        return Err(PhiError::Audit(format!("support diameter {} exceeds {}{}", r.diam_max, r.diam_bound, w)));
    }
    if !r.membership_k2.is_finite() {
        return Err(PhiError::Audit("bump has no finite second-order Hölder norm".into()));
    }
    Ok(r)
}

/// `[φ̂]_α` across an ε sweep and the log-log slope against ε.
pub fn seminorm_scaling<T: Real>(grid: Arc<Grid<T>>, eps_list: &[T], spec: &NormSpec<T>) -> Result<(Vec<T>, T)> {
    let mut semis = vec![];
    for &eps in eps_list {
        let cfg = PartitionConfig::lattice(&grid, eps, eps * T::half())?;
        let fam = normalize(grid.clone(), cfg)?;
        let f = SpaceTimeField::constant_in_time(grid.clone(), vec![T::zero()], &fam.phi_hat(0));
        semis.push(alpha_seminorm(&f, &spec.with_k(0))?);
    }
    let slope = loglog_slope(eps_list, &semis);
    Ok((semis, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;

    #[test]
    fn audit_model_a() {
        let g = Arc::new(Grid::new(ManifoldModel::<f64>::model_a(), 257, 64, 1).unwrap());
        let fam = normalize(g.clone(), PartitionConfig::lattice(&g, 0.125, 0.0625).unwrap()).unwrap();
        let spec = NormSpec::new(0.5, 0, 0.0, 20_000, 1).unwrap();
        let r = audit_report(&fam, &spec).unwrap();
        assert!(r.property_i_ok);
        assert!(r.sum_to_one_max_err <= 1e-12);
        assert_eq!(r.diam_bound, 0.5);
        assert_eq!(r.anchor_count, 101);
        assert!(r.membership_k2.is_finite());
        // every anchor covers the whole sub-collar circle
        assert!(r.diam_max > 2.0 * 0.1);
    }

    #[test]
    fn constant() {
        assert_eq!(diameter_constant::<f64>(1, 0), 4.0);
        assert_eq!(diameter_constant::<f64>(0, 0), 1.0);
        assert_eq!(diameter_constant::<f64>(4, 1), 8.0);
    }
}
