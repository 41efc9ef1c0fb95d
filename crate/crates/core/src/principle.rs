//! Discrete maximum-principle monitors: maximizing points, sup/inf
//! envelopes and uniqueness gaps.

use rayon::prelude::*;

use crate::error::{PhiError, Result};
use crate::operators::{DiscreteOperator, Propagator};
use crate::scalar::Real;
use crate::spaces::SpaceTimeField;

/// Default per-step envelope tolerance when the step map is not verified
/// nonnegative.
pub const ENVELOPE_TOL: f64 = 1e-10;

/// Candidate for `u(p) > max u − 1/k`, `−Δu(p) < 1/k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmoriYauPoint<T> {
    pub node: usize,
    pub x: T,
    pub y: T,
    pub z: T,
    pub value: T,
    /// `max u − u(p)`
    pub deficit_value: T,
    /// `−(Δu)(p)`
    pub deficit_laplacian: T,
    pub qualifies: bool,
}

/// Best grid point for the `k`-th maximizing-sequence conditions. Prefers
/// the argmax; otherwise the near-maximal node with the smallest `−Δu`.
/// When nothing qualifies the returned point has `qualifies == false`.
pub fn omori_yau_point<T: Real>(u: &[T], k: usize, op: &DiscreteOperator<T>) -> Result<OmoriYauPoint<T>> {
    if k == 0 {
        return Err(PhiError::Parameter("Omori-Yau index k must be >= 1".into()));
    }
    if u.len() != op.len() {
        return Err(PhiError::Parameter(format!("field has {} values, operator has {}", u.len(), op.len())));
    }
    let inv_k = T::one() / T::of_usize(k);
    let (imax, &umax) = u
        .iter()
        .enumerate()
        .fold(None, |b: Option<(usize, &T)>, (i, v)| match b {
            Some((_, w)) if *w >= *v => b,
            _ => Some((i, v)),
        })
        .ok_or_else(|| PhiError::Parameter("empty field".into()))?;
    let lap = op.apply(u);
    let make = |n: usize| {
        let (x, y, z) = op.xyz(n);
        let dv = umax - u[n];
        let dl = -lap[n];
        OmoriYauPoint { node: n, x, y, z, value: u[n], deficit_value: dv, deficit_laplacian: dl, qualifies: u[n] > umax - inv_k && dl < inv_k }
    };
    let at_max = make(imax);
    if at_max.qualifies {
        return Ok(at_max);
    }
    let best = (0..u.len())
        .filter(|&n| u[n] > umax - inv_k)
        .min_by(|&a, &b| (-lap[a]).partial_cmp(&-lap[b]).unwrap_or(std::cmp::Ordering::Equal))
        .map(make)
        .unwrap_or(at_max);
    Ok(best)
}

/// `sup`/`inf` per time level with per-step monotonicity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrace<T> {
    pub times: Vec<T>,
    pub u_sup: Vec<T>,
    pub u_inf: Vec<T>,
    pub argmax: Vec<usize>,
    pub argmin: Vec<usize>,
    /// `u_sup(t_n) ≤ u_sup(t_{n−1}) + tol` (true at the first level)
    pub sup_flags: Vec<bool>,
    /// `u_inf(t_n) ≥ u_inf(t_{n−1}) − tol`
    pub inf_flags: Vec<bool>,
    pub tol: T,
}

impl<T: Real> EnvelopeTrace<T> {
    pub fn monotone(&self) -> bool {
        self.sup_flags.iter().chain(&self.inf_flags).all(|&f| f)
    }

    /// Largest per-step increase of `u_sup` or decrease of `u_inf`.
    pub fn worst_step(&self) -> T {
        let mut w = T::zero();
        for n in 1..self.times.len() {
            w = w.max(self.u_sup[n] - self.u_sup[n - 1]).max(self.u_inf[n - 1] - self.u_inf[n]);
        }
        w
    }
}

pub fn envelope_trace<T: Real>(u: &SpaceTimeField<T>) -> EnvelopeTrace<T> {
    envelope_trace_with_tol(u, T::lit(ENVELOPE_TOL))
}

pub fn envelope_trace_with_tol<T: Real>(u: &SpaceTimeField<T>, tol: T) -> EnvelopeTrace<T> {
    let ext: Vec<(usize, T, usize, T)> = (0..u.n_times())
        .into_par_iter()
        .map(|k| {
            let s = u.slice(k);
            let (mut imax, mut imin) = (0, 0);
            for (n, &v) in s.iter().enumerate() {
                if v > s[imax] {
                    imax = n;
                }
                if v < s[imin] {
                    imin = n;
                }
            }
            (imax, s[imax], imin, s[imin])
        })
        .collect();
    let u_sup: Vec<T> = ext.iter().map(|e| e.1).collect();
    let u_inf: Vec<T> = ext.iter().map(|e| e.3).collect();
    let sup_flags = (0..u_sup.len()).map(|n| n == 0 || u_sup[n] <= u_sup[n - 1] + tol).collect();
    let inf_flags = (0..u_inf.len()).map(|n| n == 0 || u_inf[n] >= u_inf[n - 1] - tol).collect();
    EnvelopeTrace {
        times: u.times.clone(),
        argmax: ext.iter().map(|e| e.0).collect(),
        argmin: ext.iter().map(|e| e.2).collect(),
        u_sup,
        u_inf,
        sup_flags,
        inf_flags,
        tol,
    }
}

/// Whether every step of `prop` on `times` is a nonnegative averaging map.
pub fn steps_are_monotone<T: Real>(prop: &Propagator<T>, times: &[T]) -> bool {
    times.windows(2).all(|w| prop.step_is_monotone(w[0], w[1]))
}

/// Envelope tolerance for a field produced by `prop`: rounding level
/// (a few ulps of `scale`) when the steps are verified monotone, else
/// [`ENVELOPE_TOL`].
pub fn envelope_tolerance<T: Real>(prop: &Propagator<T>, times: &[T], scale: T) -> T {
    if steps_are_monotone(prop, times) {
        T::epsilon() * T::lit(64.0) * scale.max(T::one())
    } else {
        T::lit(ENVELOPE_TOL)
    }
}

/// `sup |u − v|`.
pub fn uniqueness_gap<T: Real>(u: &SpaceTimeField<T>, v: &SpaceTimeField<T>) -> Result<T> {
    if !u.same_support(v) {
        return Err(PhiError::Parameter("fields live on different grids or time axes".into()));
    }
    u.max_abs_diff(v)
}
