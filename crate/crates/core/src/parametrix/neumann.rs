use std::sync::Arc;
use std::time::Instant;

use super::{alpha_norm, Parametrix, ParametrixConfig};
use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::operators::{consistency_residual, heat_convolve, CoefficientField, DiscreteOperator};
use crate::scalar::Real;
use crate::spaces::SpaceTimeField;

/// Outcome of one Neumann inversion on one `(ε, T)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametrixReport<T> {
    pub eps: T,
    pub t_window: T,
    /// `[R1, R2, R3, R]` probe proxies
    pub proxies: [T; 4],
    /// truncation predicted from the proxy
    pub predicted_terms: usize,
    /// applications of `𝒬` actually made
    pub terms: usize,
    /// `‖P_h u_k − ℓ‖_∞` after each term
    pub history: Vec<T>,
    pub tol: T,
    pub converged: bool,
    /// `‖∂_t u + aΔ_h u − ℓ‖_∞` with a three-point time difference
    pub consistency_final: T,
    /// same quantity for the direct scheme solution
    pub single_solve_residual: T,
    pub seconds: f64,
}

impl<T: Real> ParametrixReport<T> {
    pub fn residual_final(&self) -> T {
        self.history.last().copied().unwrap_or(T::zero())
    }

    /// `history[k+1] / history[k]`.
    pub fn ratios(&self) -> Vec<T> {
        self.history.windows(2).map(|w| if w[0] > T::zero() { w[1] / w[0] } else { T::zero() }).collect()
    }
}

fn sup_from<T: Real>(u: &SpaceTimeField<T>, from: usize) -> T {
    u.values[from * u.n_nodes()..].iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Sup-norm of the three-point residual of the direct scheme solution of `ℓ`.
pub fn single_solve_residual<T: Real>(par: &Parametrix<T>, l: &SpaceTimeField<T>) -> Result<T> {
    let u = heat_convolve(&par.prop, l)?;
    Ok(sup_from(&consistency_residual(&par.prop, &u, Some(l))?, 1))
}

/// `u = 𝒬 Σ_k (−R)^k ℓ`, computed as `u += 𝒬r_k`, `r_{k+1} = ℓ − P_h u`.
///
/// `proxies` may carry a previous [`Parametrix::norm_proxies`] result.
pub fn neumann_solve<T: Real>(par: &Parametrix<T>, l: &SpaceTimeField<T>, proxies: Option<[T; 4]>) -> Result<(SpaceTimeField<T>, ParametrixReport<T>)> {
    let start = Instant::now();
    let proxies = match proxies {
        Some(p) => p,
        None => par.norm_proxies()?,
    };
    let proxy = proxies[3];
    let cfg = &par.config;
    if !(proxy < T::one()) {
        return Err(PhiError::ContractionBudget {
            proxy: proxy.as_f64(),
            eps: cfg.eps.as_f64(),
            t_window: cfg.t_window.as_f64(),
            hint: format!("proxy must be < 1; {}", budget_hint(cfg)),
        });
    }
    let nn = par.grid.len();
    let mut r = l.clone();
    r.values[..nn].iter_mut().for_each(|v| *v = T::zero());
    let single = single_solve_residual(par, l)?;
    let tol = cfg.tol.unwrap_or(single);
    let l_norm = alpha_norm(&r, &cfg.spec)?;
    // smallest N with proxy^{N+1}‖ℓ‖ ≤ tol
    let predicted = if l_norm <= tol || proxy == T::zero() {
        0
    } else {
        let n = ((tol / l_norm).ln() / proxy.ln()).ceil() - T::one();
        n.max(T::zero()).to_usize().unwrap_or(usize::MAX)
    };
    if predicted > cfg.neumann_cap {
        return Err(PhiError::ContractionBudget {
            proxy: proxy.as_f64(),
            eps: cfg.eps.as_f64(),
            t_window: cfg.t_window.as_f64(),
            hint: format!("needs {predicted} Neumann terms, cap is {}; {}", cfg.neumann_cap, budget_hint(cfg)),
        });
    }
    let mut u = SpaceTimeField { values: vec![T::zero(); l.values.len()], ..l.clone() };
    let mut history = Vec::new();
    let mut terms = 0;
    let mut res = sup_from(&r, 1);
    if res > T::zero() {
        // the proxy is a lower bound, so keep going past N while the cap allows
        while terms <= cfg.neumann_cap {
            let q = par.apply(&r)?;
            u.add_assign(&q)?;
            terms += 1;
            r = par.residual(&u, l).scale(-T::one());
            res = sup_from(&r, 1);
            history.push(res);
            if res <= tol || (terms > predicted && history.len() >= 2 && res >= history[history.len() - 2]) {
                break;
            }
        }
    }
    let consistency = sup_from(&consistency_residual(&par.prop, &u, Some(l))?, 1);
    let report = ParametrixReport {
        eps: cfg.eps,
        t_window: cfg.t_window,
        proxies,
        predicted_terms: predicted,
        terms,
        history,
        tol,
        converged: res <= tol,
        consistency_final: consistency,
        single_solve_residual: single,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((u, report))
}

fn budget_hint<T: Real>(cfg: &ParametrixConfig<T>) -> String {
    format!(
        "reduce T below {} or eps below {} (the budget needs T^(alpha/2) < delta eps^alpha / 2C)",
        cfg.t_window * T::lit(0.25),
        cfg.eps * T::half()
    )
}

/// `E u₀ = u₀ − 𝒬(Id + R)⁻¹(aΔu₀)` on the parametrix window.
pub fn homogeneous_solve<T: Real>(par: &Parametrix<T>, u0: &[T], proxies: Option<[T; 4]>) -> Result<(SpaceTimeField<T>, ParametrixReport<T>)> {
    let nn = par.grid.len();
    if u0.len() != nn {
        return Err(PhiError::Parameter(format!("initial datum has {} values, grid has {nn}", u0.len())));
    }
    let lap = par.op.apply(u0);
    let nt = par.times.len();
    let mut f = vec![T::zero(); nn * nt];
    for k in 1..nt {
        let a = par.prop.a_nodes((par.times[k - 1] + par.times[k]) * T::half());
        for n in 0..nn {
            f[k * nn + n] = a[n] * lap[n];
        }
    }
    let f = SpaceTimeField::new(par.grid.clone(), par.times.clone(), f)?;
    let (w, rep) = neumann_solve(par, &f, proxies)?;
    let mut u = w.scale(-T::one());
    for k in 0..nt {
        u.slice_mut(k).iter_mut().zip(u0).for_each(|(v, &c)| *v += c);
    }
    Ok((u, rep))
}

/// One row of the `(ε, T)` budget search.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetCell<T> {
    pub eps: T,
    pub t_window: T,
    pub proxies: [T; 4],
    /// proxy evaluations spent
    pub evaluations: usize,
    pub within_budget: bool,
}

/// For each `ε`, bisects `log T` over `[t_lo, t_hi]` for the largest window
/// with `‖R‖` proxy `≤ δ`.
pub fn budget_search<T: Real>(
    grid: Arc<Grid<T>>,
    op: Arc<DiscreteOperator<T>>,
    coef: Arc<CoefficientField<T>>,
    base: ParametrixConfig<T>,
    eps_list: &[T],
    (t_lo, t_hi): (T, T),
    bisections: usize,
) -> Result<Vec<BudgetCell<T>>> {
    if !(t_lo > T::zero() && t_lo < t_hi) {
        return Err(PhiError::Parameter(format!("window range needs 0 < t_lo < t_hi, got ({t_lo}, {t_hi})")));
    }
    let ht = base.t_window / T::of_usize(base.steps(&grid));
    // returns the proxies and the window actually used (a whole number of steps)
    let eval = |eps: T, t: T| -> Result<([T; 4], T)> {
        let n = (t / ht).round().to_usize().unwrap_or(1).max(4);
        let t = T::of_usize(n) * ht;
        let cfg = ParametrixConfig { eps, vartheta: eps * T::half(), t_window: t, n_steps: Some(n), ..base };
        Ok((Parametrix::with_operator(grid.clone(), op.clone(), coef.clone(), cfg)?.norm_proxies()?, t))
    };
    let mut out = Vec::new();
    for &eps in eps_list {
        let mut evaluations = 1;
        let (hi, th) = eval(eps, t_hi)?;
        if hi[3] <= base.delta {
            out.push(BudgetCell { eps, t_window: th, proxies: hi, evaluations, within_budget: true });
            continue;
        }
        let (lo, tl) = eval(eps, t_lo)?;
        evaluations += 1;
        if lo[3] > base.delta {
            out.push(BudgetCell { eps, t_window: tl, proxies: lo, evaluations, within_budget: false });
            continue;
        }
        let (mut a, mut b, mut best) = (t_lo.ln(), t_hi.ln(), (tl, lo));
        for _ in 0..bisections {
            let m = (a + b) * T::half();
            let (p, tm) = eval(eps, m.exp())?;
            evaluations += 1;
            if p[3] <= base.delta {
                a = m;
                best = (tm, p);
            } else {
                b = m;
            }
        }
        out.push(BudgetCell { eps, t_window: best.0, proxies: best.1, evaluations, within_budget: true });
    }
    Ok(out)
}
