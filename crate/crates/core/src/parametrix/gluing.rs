use std::sync::Arc;

use super::{homogeneous_solve, neumann_solve, Parametrix, ParametrixReport};
use crate::error::{PhiError, Result};
use crate::operators::consistency_residual;
use crate::scalar::Real;
use crate::spaces::SpaceTimeField;

/// What happened at one seam `t = t_seam` where the glued field switches
/// from the previous window to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamDiagnostics<T> {
    pub t_seam: T,
    /// start of the overlap `[t_seam − λ, t_seam]`
    pub t_restart: T,
    /// `sup |w − u|` over the overlap
    pub overlap_gap: T,
    /// `sup |w − u|` at `t_seam`
    pub value_jump: T,
    /// jump of the backward time difference at `t_seam`
    pub slope_jump: T,
    /// three-point residual of the glued field at the seam level
    pub seam_residual: T,
    /// larger of the two window residuals away from the seam
    pub interior_residual: T,
}

impl<T: Real> SeamDiagnostics<T> {
    /// Jumps within `factor ×` the interior residual; values are compared
    /// after integrating that residual over the overlap.
    pub fn within(&self, factor: T, lambda: T) -> bool {
        let r = self.interior_residual * factor;
        self.slope_jump <= r && self.seam_residual <= r && self.overlap_gap <= r * lambda
    }
}

#[derive(Debug, Clone)]
pub struct GluedSolution<T> {
    pub field: SpaceTimeField<T>,
    pub seams: Vec<SeamDiagnostics<T>>,
    /// one Neumann report per solve, in order
    pub reports: Vec<ParametrixReport<T>>,
}

/// Extends `u` (a solution on the window of `par` with source `source`) to
/// `[0, horizon]` by restarting `λ` before each window end.
///
/// Each restart at `s` solves `w = E_s(u(s)) + Q_s(ℓ(s + ·))` with the
/// coefficient shifted by `s`, checks `w ≈ u` on the overlap and keeps `w`
/// past the old window end.
pub fn extend_in_time<T: Real>(
    par: &Parametrix<T>,
    source: Arc<dyn Fn(T, T, T, T) -> T + Send + Sync>,
    u: &SpaceTimeField<T>,
    lambda: T,
    horizon: T,
    seam_factor: T,
) -> Result<GluedSolution<T>> {
    let t0 = par.config.t_window;
    let h = par.h_t();
    if !(lambda > T::zero() && lambda < t0) {
        return Err(PhiError::Parameter(format!("overlap needs 0 < lambda < T0 = {t0}, got {lambda}")));
    }
    let lag = (lambda / h).round().to_usize().unwrap_or(0);
    if lag == 0 || (T::of_usize(lag) * h - lambda).abs() > h * T::lit(1e-6) {
        return Err(PhiError::Parameter(format!("lambda = {lambda} is not a multiple of the step {h}")));
    }
    if u.times.len() != par.times.len() || !u.grid.same_shape(&par.grid) {
        return Err(PhiError::Parameter("first-window solution does not match the parametrix window".into()));
    }
    let nn = par.grid.len();
    let steps = par.times.len() - 1;
    let mut times = u.times.clone();
    let mut values = u.values.clone();
    let mut seams = Vec::new();
    let mut reports = Vec::new();
    let mut prev_res = T::zero();
    let mut first = true;
    while *times.last().expect("nonempty") < horizon - h * T::lit(1e-6) {
        let end = times.len() - 1;
        let m = end - lag;
        let s = times[m];
        let coef = Arc::new(par.coef.shifted(s));
        let ps = Parametrix::with_operator(par.grid.clone(), par.op.clone(), coef, par.config)?;
        let src = source.clone();
        let l = SpaceTimeField::from_fn(par.grid.clone(), ps.times.clone(), move |x, y, z, t| src(x, y, z, s + t));
        let (v1, rv) = homogeneous_solve(&ps, &values[m * nn..(m + 1) * nn], None)?;
        let (u1, ru) = neumann_solve(&ps, &l, Some(rv.proxies))?;
        let mut w = u1;
        w.add_assign(&v1)?;
        if first {
            // residual of the first window with its own source
            let l0 = SpaceTimeField::from_fn(par.grid.clone(), par.times.clone(), {
                let src = source.clone();
                move |x, y, z, t| src(x, y, z, t)
            });
            let r = consistency_residual(&par.prop, u, Some(&l0))?;
            prev_res = r.values[nn..].iter().fold(T::zero(), |a, v| a.max(v.abs()));
            first = false;
        }
        let w_res = {
            let r = consistency_residual(&ps.prop, &w, Some(&l))?;
            r.values[nn..].iter().fold(T::zero(), |a, v| a.max(v.abs()))
        };
        let mut gap = T::zero();
        for j in 0..=lag {
            let a = &values[(m + j) * nn..(m + j + 1) * nn];
            let b = w.slice(j);
            gap = gap.max(a.iter().zip(b).fold(T::zero(), |g, (&p, &q)| g.max((p - q).abs())));
        }
        let value_jump = values[end * nn..].iter().zip(w.slice(lag)).fold(T::zero(), |g, (&p, &q)| g.max((p - q).abs()));
        let slope_jump = (0..nn)
            .map(|n| {
                let du = values[end * nn + n] - values[(end - 1) * nn + n];
                let dw = w.at(n, lag) - w.at(n, lag - 1);
                ((du - dw) / h).abs()
            })
            .fold(T::zero(), T::max);
        // append w past the seam
        for j in lag + 1..=steps {
            times.push(s + ps.times[j]);
            values.extend_from_slice(w.slice(j));
        }
        // three-point residual of the glued field at the seam level
        let lo = end - 1;
        let glued = SpaceTimeField::new(par.grid.clone(), times[lo..=end + 1].to_vec(), values[lo * nn..(end + 2) * nn].to_vec())?;
        let src = source.clone();
        let lg = SpaceTimeField::from_fn(par.grid.clone(), glued.times.clone(), move |x, y, z, t| src(x, y, z, t));
        let seam_r = consistency_residual(&par.prop, &glued, Some(&lg))?;
        let seam_residual = seam_r.slice(1).iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let seam = SeamDiagnostics {
            t_seam: times[end],
            t_restart: s,
            overlap_gap: gap,
            value_jump,
            slope_jump,
            seam_residual,
            interior_residual: prev_res.max(w_res),
        };
        reports.push(rv);
        reports.push(ru);
        if !seam.within(seam_factor, lambda) {
            return Err(PhiError::Gluing(format!(
                "seam at t={}: overlap gap {}, value jump {}, slope jump {}, seam residual {}, interior residual {}",
                seam.t_seam, seam.overlap_gap, seam.value_jump, seam.slope_jump, seam.seam_residual, seam.interior_residual
            )));
        }
        seams.push(seam);
        prev_res = w_res;
    }
    let keep = times.iter().take_while(|&&t| t <= horizon + h * T::lit(1e-6)).count().max(1);
    times.truncate(keep);
    values.truncate(keep * nn);
    let field = SpaceTimeField::new(par.grid.clone(), times, values)?;
    Ok(GluedSolution { field, seams, reports })
}
