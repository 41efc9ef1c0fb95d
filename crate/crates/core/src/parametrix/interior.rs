use std::sync::Arc;

use crate::error::{PhiError, Result};
use crate::geometry::{Grid, PhiMetric};
use crate::operators::{CoefficientField, DiscreteOperator, Propagator, RowProfile, ShiftedSolver};
use crate::partition::sigma_unchecked;
use crate::scalar::Real;

/// Interior cutoff `Ψ̂`: 0 for `x ≤ ε/2`, 1 for `x ≥ 5ε/8`, so in particular on
/// `{x ≥ 3ε/4} ⊇ supp(1 − φ)`.
#[inline]
pub fn interior_cutoff<T: Real>(x: T, eps: T) -> T {
    let q = eps * T::lit(0.25);
    sigma_unchecked((eps * T::lit(0.75) - x).max(T::zero()) / q)
}

/// Two copies of `{x ≥ x_k}` glued along the node `x_k` nearest below `ε/4`
/// (or the first node), with the metric flattened towards `x_k` on
/// `[x_k, ε/2]`. The double is exact on `{x ≥ ε/2} ⊇ supp Ψ̂`.
///
/// Rows are indexed by `s ∈ [−L, L]`, `x = x_k + |s|`; row `half + r`
/// (`r ≥ 0`) is collar row `k + r` of the first copy.
#[derive(Debug, Clone)]
pub struct InteriorDouble<T: Real> {
    pub k: usize,
    pub half: usize,
    pub op: Arc<DiscreteOperator<T>>,
    pub prop: Propagator<T>,
    /// `Ψ̂` on the collar grid
    pub cutoff: Vec<T>,
    plane: usize,
}

impl<T: Real> InteriorDouble<T> {
    pub fn new(grid: &Grid<T>, eps: T, coef: Arc<CoefficientField<T>>, h_t: T, theta: T) -> Result<Self> {
        let half_eps = eps * T::half();
        let two_eps = eps * T::two();
        if grid.x[0] >= half_eps {
            return Err(PhiError::Configuration(format!("eps/2 = {half_eps} lies below x_min = {}", grid.x[0])));
        }
        if grid.x[grid.nx - 1] <= two_eps {
            return Err(PhiError::Configuration(format!("x_max must exceed 2 eps = {two_eps} for the interior double")));
        }
        let k = grid.x.iter().rposition(|&x| x <= half_eps * T::half()).unwrap_or(0);
        let blend_nodes = grid.x.iter().filter(|&&x| x >= grid.x[k] && x <= half_eps).count();
        let inner_nodes = grid.x.iter().filter(|&&x| x >= half_eps && x <= two_eps).count();
        if blend_nodes < 3 || inner_nodes < 4 {
            return Err(PhiError::Configuration(format!(
                "interior region under-resolved: {blend_nodes} nodes in the glue layer below eps/2 and {inner_nodes} in [eps/2, 2 eps]; refine grid_nx or increase eps"
            )));
        }
        let half = grid.nx - 1 - k;
        let h = grid.h();
        let s: Vec<T> = (0..2 * half + 1).map(|r| (T::of_usize(r) - T::of_usize(half)) * h).collect();
        let xk = grid.x[k];
        let to_x = move |s: T| xk + s.abs();
        let metric = PhiMetric::blended(xk, half_eps);
        let ch = grid.model.chart;
        let op = Arc::new(DiscreteOperator::from_rows(
            &metric,
            RowProfile { s: &s, h, to_x: &to_x, b: ch.b, f: ch.f },
            grid.y.clone(),
            grid.z.clone(),
            grid.hy,
            grid.hz,
        )?);
        let prop = Propagator::with_solver(Arc::new(ShiftedSolver::new(op.clone())), coef, h_t, theta)?;
        let cutoff = grid.sample(|x, _, _| interior_cutoff(x, eps));
        Ok(Self { k, half, op, prop, cutoff, plane: grid.ny * grid.nz })
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    /// Extends one collar time slice by zero to the double: values go to the
    /// first copy, the second copy stays 0.
    pub fn lift(&self, src: &[T]) -> Vec<T> {
        let p = self.plane;
        let mut out = vec![T::zero(); self.len()];
        out[self.half * p..].copy_from_slice(&src[self.k * p..]);
        out
    }

    /// First-copy values of one double slice on the collar grid; rows below
    /// `x_k` are 0.
    pub fn restrict(&self, w: &[T], nn: usize) -> Vec<T> {
        let p = self.plane;
        let mut out = vec![T::zero(); nn];
        out[self.k * p..].copy_from_slice(&w[self.half * p..]);
        out
    }

    /// Mirror image `s ↦ −s` of one double slice.
    pub fn mirror(&self, w: &[T]) -> Vec<T> {
        let p = self.plane;
        let rows = 2 * self.half + 1;
        let mut out = vec![T::zero(); w.len()];
        for r in 0..rows {
            out[r * p..(r + 1) * p].copy_from_slice(&w[(rows - 1 - r) * p..(rows - r) * p]);
        }
        out
    }

    /// Solves `∂_t w + āΔ̄w = src`, `w(0) = 0`, on the double; `src` holds one
    /// double slice per time level.
    pub fn solve(&self, src: &[T], times: &[T]) -> Result<Vec<T>> {
        let zero = vec![T::zero(); self.len()];
        self.prop.evolve(&zero, Some(src), times)
    }
}
