use std::sync::Arc;

use rayon::prelude::*;

use super::{CoefficientField, DiscreteOperator, ShiftedSolver};
use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::scalar::Real;
use crate::spaces::{time_derivative, SpaceTimeField};

/// θ-scheme for `∂_t u + aΔu = ℓ` on a fixed operator:
///
/// `(u^{n+1} − u^n)/k + a(t_{n+½}) Δ_h(θu^{n+1} + (1−θ)u^n) = ℓ^{n+1}`.
#[derive(Debug, Clone)]
pub struct Propagator<T: Real> {
    pub solver: Arc<ShiftedSolver<T>>,
    pub coef: Arc<CoefficientField<T>>,
    pub h_t: T,
    pub theta: T,
    masses: Arc<Vec<T>>,
}

impl<T: Real> Propagator<T> {
    pub fn new(op: Arc<DiscreteOperator<T>>, coef: CoefficientField<T>, h_t: T, theta: T) -> Result<Self> {
        Self::with_solver(Arc::new(ShiftedSolver::new(op)), Arc::new(coef), h_t, theta)
    }

    pub fn with_solver(solver: Arc<ShiftedSolver<T>>, coef: Arc<CoefficientField<T>>, h_t: T, theta: T) -> Result<Self> {
        if !(h_t > T::zero()) {
            return Err(PhiError::Parameter(format!("time step must be positive, got {h_t}")));
        }
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(PhiError::Parameter(format!("theta must lie in [0,1], got {theta}")));
        }
        if !(coef.a_min > T::zero()) {
            return Err(PhiError::Hypothesis(format!("coefficient lower bound {} is not positive", coef.a_min)));
        }
        let masses = Arc::new(solver.operator().masses());
        Ok(Self { solver, coef, h_t, theta, masses })
    }

    /// Same scheme with another coefficient.
    pub fn with_coefficient(&self, coef: Arc<CoefficientField<T>>) -> Self {
        Self { coef, ..self.clone() }
    }

    pub fn op(&self) -> &DiscreteOperator<T> {
        self.solver.operator()
    }

    /// `a(·, t)` at every node.
    pub fn a_nodes(&self, t: T) -> Vec<T> {
        let op = self.op();
        if let Some(c) = self.coef.constant {
            return vec![c; op.len()];
        }
        if self.coef.radial {
            let p = op.plane();
            return (0..op.nx)
                .flat_map(|i| {
                    let v = self.coef.eval(op.x[i], T::zero(), T::zero(), t);
                    std::iter::repeat_n(v, p)
                })
                .collect();
        }
        (0..op.len())
            .into_par_iter()
            .map(|n| {
                let (x, y, z) = op.xyz(n);
                self.coef.eval(x, y, z, t)
            })
            .collect()
    }

    /// One step from `t0` to `t1` with source `ℓ(t1)`.
    pub fn step(&self, u: &[T], t0: T, t1: T, src: Option<&[T]>) -> Result<Vec<T>> {
        let k = t1 - t0;
        let a = self.a_nodes((t0 + t1) * T::half());
        let d: Vec<T> = self.masses.iter().zip(&a).map(|(&m, &c)| m / c).collect();
        let mut ku = vec![T::zero(); u.len()];
        if self.theta < T::one() {
            self.op().apply_k(u, &mut ku);
        }
        let explicit = (T::one() - self.theta) * k;
        let rhs: Vec<T> = (0..u.len())
            .into_par_iter()
            .map(|n| {
                let s = src.map_or(T::zero(), |s| s[n]);
                d[n] * (u[n] + k * s) - explicit * ku[n]
            })
            .collect();
        self.solver.solve(&d, self.theta * k, &rhs)
    }

    /// Whether the explicit half of the step `t0 → t1` has nonnegative
    /// entries, which makes the step map stochastic.
    pub fn step_is_monotone(&self, t0: T, t1: T) -> bool {
        let k = (T::one() - self.theta) * (t1 - t0);
        let a = self.a_nodes((t0 + t1) * T::half());
        let kd = self.op().k_diagonal();
        self.masses.iter().zip(&a).zip(&kd).all(|((&m, &c), &kk)| m / c >= k * kk)
    }

    /// Runs the scheme on `times` from `u0`; `source` holds one slice per
    /// time level (level 0 unused). Returns all levels, flattened.
    pub fn evolve(&self, u0: &[T], source: Option<&[T]>, times: &[T]) -> Result<Vec<T>> {
        let nn = u0.len();
        let mut out = Vec::with_capacity(nn * times.len());
        out.extend_from_slice(u0);
        let mut u = u0.to_vec();
        for k in 1..times.len() {
            let s = source.map(|s| &s[k * nn..(k + 1) * nn]);
            u = self.step(&u, times[k - 1], times[k], s)?;
            out.extend_from_slice(&u);
        }
        Ok(out)
    }

    /// Scheme residual `P_h u`, zero at the first level.
    pub fn apply_scheme(&self, u: &[T], times: &[T]) -> Vec<T> {
        let nn = self.op().len();
        let mut out = vec![T::zero(); u.len()];
        let th = self.theta;
        for k in 1..times.len() {
            let (prev, cur) = (&u[(k - 1) * nn..k * nn], &u[k * nn..(k + 1) * nn]);
            let mix: Vec<T> = prev.iter().zip(cur).map(|(&p, &c)| th * c + (T::one() - th) * p).collect();
            let lap = self.op().apply(&mix);
            let a = self.a_nodes((times[k - 1] + times[k]) * T::half());
            let ht = times[k] - times[k - 1];
            out[k * nn..(k + 1) * nn]
                .par_iter_mut()
                .enumerate()
                .for_each(|(n, o)| *o = (cur[n] - prev[n]) / ht + a[n] * lap[n]);
        }
        out
    }
}

/// Solves `∂_t u + cΔu = 0` from `u0` for time `t`, a multiple of `h_t`.
pub fn heat_propagate<T: Real>(prop: &Propagator<T>, u0: &[T], t: T) -> Result<Vec<T>> {
    if t < T::zero() || !t.is_finite() {
        return Err(PhiError::Parameter(format!("propagation time must be >= 0, got {t}")));
    }
    let steps = (t / prop.h_t).round();
    if (steps * prop.h_t - t).abs() > T::lit(1e-9) * t.max(T::one()) {
        return Err(PhiError::Parameter(format!("t = {t} is not a multiple of h_t = {}", prop.h_t)));
    }
    let n = steps.to_usize().unwrap_or(0);
    let mut u = u0.to_vec();
    for s in 0..n {
        let t0 = T::of_usize(s) * prop.h_t;
        u = prop.step(&u, t0, t0 + prop.h_t, None)?;
    }
    Ok(u)
}

/// Duhamel solution of `∂_t u + aΔu = ℓ`, `u(0) = 0`, on the time axis of `ℓ`.
pub fn heat_convolve<T: Real>(prop: &Propagator<T>, l: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    let zero = vec![T::zero(); l.n_nodes()];
    let values = prop.evolve(&zero, Some(&l.values), &l.times)?;
    Ok(SpaceTimeField { values, ..l.clone() })
}

/// `P_h u − ℓ` on the time axis of `u` (zero at `t = 0`).
pub fn scheme_residual<T: Real>(prop: &Propagator<T>, u: &SpaceTimeField<T>, l: Option<&SpaceTimeField<T>>) -> Result<SpaceTimeField<T>> {
    let mut r = prop.apply_scheme(&u.values, &u.times);
    if let Some(l) = l {
        if !l.same_support(u) {
            return Err(PhiError::Parameter("source and solution live on different axes".into()));
        }
        let nn = u.n_nodes();
        r[nn..].iter_mut().zip(&l.values[nn..]).for_each(|(a, &b)| *a -= b);
    }
    Ok(SpaceTimeField { values: r, ..u.clone() })
}

/// `∂_t u + aΔ_h u − ℓ` with a three-point time difference at every level,
/// independent of the time-stepping stencil.
pub fn consistency_residual<T: Real>(prop: &Propagator<T>, u: &SpaceTimeField<T>, l: Option<&SpaceTimeField<T>>) -> Result<SpaceTimeField<T>> {
    let mut r = time_derivative(u)?;
    let nn = u.n_nodes();
    for (k, &t) in u.times.iter().enumerate() {
        let lap = prop.op().apply(u.slice(k));
        let a = prop.a_nodes(t);
        let dst = r.slice_mut(k);
        for n in 0..nn {
            dst[n] += a[n] * lap[n] - l.map_or(T::zero(), |l| l.at(n, k));
        }
    }
    Ok(r)
}

/// Builds a grid-backed propagator for constant coefficient `c`.
pub fn frozen_propagator<T: Real>(grid: &Grid<T>, op: Arc<DiscreteOperator<T>>, c: T, h_t: T, theta: T) -> Result<Propagator<T>> {
    let _ = grid;
    Propagator::new(op, CoefficientField::constant(c)?, h_t, theta)
}
