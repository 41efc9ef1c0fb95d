//! Picard iteration `u ↦ Q(F(u))` for `(∂_t + aΔ)u = F(u)`, `u(·,0) = 0`.

use std::sync::Arc;

use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::operators::{CoefficientField, DiscreteOperator};
use crate::parametrix::{alpha_norm, neumann_solve, Parametrix, ParametrixConfig};
use crate::scalar::Real;
use crate::spaces::{k_alpha_norm, phi_derivative, sup_norm, NormSpec, SpaceTimeField};

/// Field-to-field map.
pub type FieldMap<T> = Arc<dyn Fn(&SpaceTimeField<T>) -> Result<SpaceTimeField<T>> + Send + Sync>;

/// `F = F₁ + F₂ (+ ℓ)`: `F₁` Lipschitz, `F₂` with constant `C_μ·max‖u‖`.
#[derive(Clone)]
pub struct NonlinearRHS<T: Real> {
    pub f1: Option<FieldMap<T>>,
    pub f2: Option<FieldMap<T>>,
    /// `u`-independent part, sampled on the window at evaluation time
    pub source: Option<Arc<dyn Fn(T, T, T, T) -> T + Send + Sync>>,
    /// radius of the ball the hypotheses are audited on
    pub mu: T,
}

impl<T: Real> std::fmt::Debug for NonlinearRHS<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearRHS")
            .field("f1", &self.f1.is_some())
            .field("f2", &self.f2.is_some())
            .field("source", &self.source.is_some())
            .field("mu", &self.mu)
            .finish()
    }
}

impl<T: Real> NonlinearRHS<T> {
    pub fn zero(mu: T) -> Self {
        Self { f1: None, f2: None, source: None, mu }
    }

    pub fn with_f1(mut self, f: FieldMap<T>) -> Self {
        self.f1 = Some(f);
        self
    }

    pub fn with_f2(mut self, f: FieldMap<T>) -> Self {
        self.f2 = Some(f);
        self
    }

    pub fn with_source(mut self, l: impl Fn(T, T, T, T) -> T + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(l));
        self
    }

    /// `F₁(u) = c·u`.
    pub fn linear(c: T) -> FieldMap<T> {
        Arc::new(move |u| Ok(u.scale(c)))
    }

    /// `F₂(u) = u²`.
    pub fn quadratic() -> FieldMap<T> {
        Arc::new(|u| Ok(u.map(|v| v * v)))
    }

    /// `F₂(u) = |∇_Φ u|²` from the Φ-frame derivatives.
    pub fn gradient_quadratic() -> FieldMap<T> {
        Arc::new(|u| {
            let mut out = u.map(|_| T::zero());
            for d in 0..u.grid.model.dim() {
                let v = phi_derivative(u, d)?;
                out.values.iter_mut().zip(&v.values).for_each(|(o, &w)| *o += w * w);
            }
            Ok(out)
        })
    }

    /// Pointwise `f(x, y, z, t, u)`.
    pub fn pointwise(f: impl Fn(T, T, T, T, T) -> T + Send + Sync + 'static) -> FieldMap<T> {
        Arc::new(move |u| Ok(u.map_with_coords(&f)))
    }

    pub fn eval_f1(&self, u: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        self.f1.as_ref().map_or_else(|| Ok(u.map(|_| T::zero())), |f| f(u))
    }

    pub fn eval_f2(&self, u: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        self.f2.as_ref().map_or_else(|| Ok(u.map(|_| T::zero())), |f| f(u))
    }

    /// `F(u)` on the axes of `u`.
    pub fn eval(&self, u: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        let mut out = self.eval_f1(u)?;
        out.add_assign(&self.eval_f2(u)?)?;
        if let Some(l) = &self.source {
            out = out.map_with_coords(|x, y, z, t, v| v + l(x, y, z, t));
        }
        Ok(out)
    }
}

/// Measured Lipschitz constants over sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport<T> {
    /// `‖F₁u − F₁u'‖ / ‖u − u'‖`
    pub c1_sup: T,
    pub c1_holder: T,
    /// `‖F₂u − F₂u'‖ / (max(‖u‖, ‖u'‖)·‖u − u'‖)`
    pub c2_sup: T,
    pub c2_holder: T,
    pub pairs: usize,
}

/// Audits both hypothesis styles on all pairs of `samples`, which must lie
/// in the ball of radius `μ` (sup norm).
pub fn lipschitz_audit<T: Real>(f: &NonlinearRHS<T>, samples: &[SpaceTimeField<T>], spec: &NormSpec<T>) -> Result<LipschitzReport<T>> {
    let spec = spec.with_k(0);
    let mut norms = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let n = sup_norm(s)?;
        if n > f.mu {
            return Err(PhiError::Parameter(format!("sample {i} has sup norm {n} outside the ball of radius {}", f.mu)));
        }
        norms.push((n, alpha_norm(s, &spec)?));
    }
    let images: Vec<(SpaceTimeField<T>, SpaceTimeField<T>)> =
        samples.iter().map(|s| Ok((f.eval_f1(s)?, f.eval_f2(s)?))).collect::<Result<_>>()?;
    let mut r = LipschitzReport { c1_sup: T::zero(), c1_holder: T::zero(), c2_sup: T::zero(), c2_holder: T::zero(), pairs: 0 };
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = samples[i].sub(&samples[j])?;
            let (ds, dh) = (sup_norm(&d)?, alpha_norm(&d, &spec)?);
            if !(ds > T::zero()) {
                continue;
            }
            r.pairs += 1;
            let d1 = images[i].0.sub(&images[j].0)?;
            let d2 = images[i].1.sub(&images[j].1)?;
            r.c1_sup = r.c1_sup.max(sup_norm(&d1)? / ds);
            r.c1_holder = r.c1_holder.max(alpha_norm(&d1, &spec)? / dh);
            let ms = norms[i].0.max(norms[j].0);
            let mh = norms[i].1.max(norms[j].1);
            if ms > T::zero() {
                r.c2_sup = r.c2_sup.max(sup_norm(&d2)? / (ms * ds));
                r.c2_holder = r.c2_holder.max(alpha_norm(&d2, &spec)? / (mh * dh));
            }
        }
    }
    Ok(r)
}

/// Picard run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig<T> {
    pub t_prime: T,
    pub tol: T,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// consecutive non-decreasing gaps treated as stagnation
    pub patience: usize,
}

impl<T: Real> PicardConfig<T> {
    pub fn new(t_prime: T, tol: T, max_iter: usize) -> Self {
        Self { t_prime, tol, max_iter, max_halvings: 6, patience: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct PicardState<T> {
    pub n: usize,
    pub u: SpaceTimeField<T>,
    /// `‖u_{n+1} − u_n‖` in the measured `C^{k,α}` norm
    pub gaps: Vec<T>,
    /// `‖P_h u_n − F(u_n)‖_∞` after each iterate
    pub residuals: Vec<T>,
    pub t_prime: T,
    /// windows tried, longest first
    pub windows: Vec<T>,
    pub converged: bool,
}

impl<T: Real> PicardState<T> {
    /// Largest `gap(n+1)/gap(n)` after the gaps start decreasing.
    pub fn contraction_ratio(&self) -> T {
        let start = self.gaps.windows(2).position(|w| w[1] < w[0]).unwrap_or(0);
        self.gaps[start..].windows(2).map(|w| if w[0] > T::zero() { w[1] / w[0] } else { T::zero() }).fold(T::zero(), T::max)
    }
}

/// Iterates `u_{n+1} = Q(F(u_n))` from `u₀` (zero when `None`), halving the
/// window on stagnation.
pub fn picard_solve<T: Real>(
    grid: Arc<Grid<T>>,
    op: Arc<DiscreteOperator<T>>,
    coef: Arc<CoefficientField<T>>,
    base: ParametrixConfig<T>,
    f: &NonlinearRHS<T>,
    cfg: PicardConfig<T>,
    start: Option<&dyn Fn(&Parametrix<T>) -> Result<SpaceTimeField<T>>>,
) -> Result<PicardState<T>> {
    if !(cfg.tol > T::zero()) || cfg.max_iter == 0 {
        return Err(PhiError::Parameter("Picard needs tol > 0 and max_iter >= 1".into()));
    }
    let mut t = cfg.t_prime;
    let mut windows = Vec::new();
    let mut all_gaps: Vec<f64> = Vec::new();
    let ht = base.t_window / T::of_usize(base.steps(&grid));
    for _ in 0..=cfg.max_halvings {
        let steps = (t / ht).round().to_usize().unwrap_or(0);
        if steps < 4 {
            break;
        }
        windows.push(t);
        let pc = base.with_window(t, &grid);
        let par = Parametrix::with_operator(grid.clone(), op.clone(), coef.clone(), pc)?;
        let proxies = par.norm_proxies()?;
        let mut u = match start {
            Some(s) => s(&par)?,
            None => SpaceTimeField::zeros(grid.clone(), par.times.clone()),
        };
        let mut gaps = Vec::new();
        let mut residuals = Vec::new();
        let mut stalled = 0;
        let mut fu = f.eval(&u)?;
        for n in 0..cfg.max_iter {
            let (next, _) = neumann_solve(&par, &fu, Some(proxies))?;
            let gap = k_alpha_norm(&next.sub(&u)?, &base.spec)?.total;
            u = next;
            fu = f.eval(&u)?;
            residuals.push(sup_norm(&par.residual(&u, &fu))?);
            let decreasing = gaps.last().is_none_or(|&g| gap < g);
            gaps.push(gap);
            if gap <= cfg.tol {
                return Ok(PicardState { n: n + 1, u, gaps, residuals, t_prime: t, windows, converged: true });
            }
            stalled = if decreasing { 0 } else { stalled + 1 };
            if stalled >= cfg.patience || !gap.is_finite() {
                break;
            }
            if n + 1 == cfg.max_iter {
                return Ok(PicardState { n: n + 1, u, gaps, residuals, t_prime: t, windows, converged: false });
            }
        }
        all_gaps.extend(gaps.iter().map(|g| g.as_f64()));
        t *= T::half();
    }
    Err(PhiError::NoConvergence {
        message: format!("Picard iteration stalled on every window down to T' = {}", windows.last().copied().unwrap_or(t)),
        gaps: all_gaps,
    })
}
