//! Boundary and interior parametrices, their error operators, Neumann
//! inversion, homogeneous solves and time gluing.

mod config;
mod gluing;
mod interior;
mod neumann;
mod probes;

use std::sync::Arc;

use rayon::prelude::*;

pub use config::ParametrixConfig;
pub use gluing::{extend_in_time, GluedSolution, SeamDiagnostics};
pub use interior::{interior_cutoff, InteriorDouble};
pub use neumann::{budget_search, homogeneous_solve, neumann_solve, single_solve_residual, BudgetCell, ParametrixReport};
pub use probes::{alpha_norm, probe_set};

use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::operators::{assemble_laplacian, CoefficientField, DiscreteOperator, Propagator, ShiftedSolver};
use crate::partition::{normalize, AnchorGroup, BumpFamily, PartitionConfig};
use crate::scalar::Real;
use crate::spaces::SpaceTimeField;

/// Which part of `P𝒬 − Id` to act with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorLabel {
    /// frozen-coefficient defect `Σ ψ̂(a − c)Δ H_c(φℓ)`
    R1,
    /// boundary commutator `Σ [aΔ, ψ̂] H_c(φℓ)`
    R2,
    /// interior commutator `[aΔ, Ψ̂]` of the double solve
    R3,
    /// `P(𝒬ℓ) − ℓ` computed directly
    Total,
}

impl ErrorLabel {
    pub const ALL: [ErrorLabel; 4] = [ErrorLabel::R1, ErrorLabel::R2, ErrorLabel::R3, ErrorLabel::Total];
}

/// The four error fields of one source.
#[derive(Debug, Clone)]
pub struct ErrorParts<T> {
    pub r1: SpaceTimeField<T>,
    pub r2: SpaceTimeField<T>,
    pub r3: SpaceTimeField<T>,
    pub total: SpaceTimeField<T>,
    /// `𝒬ℓ`
    pub q: SpaceTimeField<T>,
}

impl<T: Real> ErrorParts<T> {
    pub fn get(&self, label: ErrorLabel) -> &SpaceTimeField<T> {
        match label {
            ErrorLabel::R1 => &self.r1,
            ErrorLabel::R2 => &self.r2,
            ErrorLabel::R3 => &self.r3,
            ErrorLabel::Total => &self.total,
        }
    }

    /// `sup |R_total − (R1 + R2 + R3)|`.
    pub fn decomposition_gap(&self) -> T {
        let mut g = T::zero();
        for n in 0..self.total.values.len() {
            let s = self.r1.values[n] + self.r2.values[n] + self.r3.values[n];
            g = g.max((self.total.values[n] - s).abs());
        }
        g
    }
}

/// Assembled approximate inverse `𝒬 = 𝒬_B + 𝒬_I` on one window.
#[derive(Debug, Clone)]
pub struct Parametrix<T: Real> {
    pub config: ParametrixConfig<T>,
    pub grid: Arc<Grid<T>>,
    pub op: Arc<DiscreteOperator<T>>,
    pub times: Vec<T>,
    pub coef: Arc<CoefficientField<T>>,
    /// scheme with the true coefficient
    pub prop: Propagator<T>,
    pub family: BumpFamily<T>,
    pub groups: Vec<AnchorGroup<T>>,
    group_props: Vec<Propagator<T>>,
    pub interior: InteriorDouble<T>,
}

impl<T: Real> Parametrix<T> {
    pub fn new(grid: Arc<Grid<T>>, coef: CoefficientField<T>, config: ParametrixConfig<T>) -> Result<Self> {
        let op = Arc::new(assemble_laplacian(&grid)?);
        Self::with_operator(grid, op, Arc::new(coef), config)
    }

    pub fn with_operator(grid: Arc<Grid<T>>, op: Arc<DiscreteOperator<T>>, coef: Arc<CoefficientField<T>>, config: ParametrixConfig<T>) -> Result<Self> {
        config.validate()?;
        let times = config.times(&grid);
        let h_t = times[1] - times[0];
        let solver = Arc::new(ShiftedSolver::new(op.clone()));
        let prop = Propagator::with_solver(solver.clone(), coef.clone(), h_t, config.theta)?;
        let family = normalize(grid.clone(), PartitionConfig::lattice(&grid, config.eps, config.vartheta)?)?;
        // frozen coefficient a(p̄, 0) at each boundary anchor
        let frozen: Vec<T> = (0..family.len())
            .map(|k| {
                let a = family.config.anchor(k);
                coef.eval(T::zero(), a.y.unwrap_or(T::zero()), a.z.unwrap_or(T::zero()), T::zero())
            })
            .collect();
        if let Some(k) = frozen.iter().position(|c| !(*c > T::zero()) || !c.is_finite()) {
            let a = family.config.anchor(k);
            return Err(PhiError::Hypothesis(format!(
                "frozen coefficient a(p,0) = {} is not positive at boundary anchor y={:?}, z={:?}",
                frozen[k], a.y, a.z
            )));
        }
        let groups = family.groups(&frozen);
        let group_props = groups
            .iter()
            .map(|g| Propagator::with_solver(solver.clone(), Arc::new(CoefficientField::constant(g.frozen)?), h_t, config.theta))
            .collect::<Result<Vec<_>>>()?;
        let interior = InteriorDouble::new(&grid, config.eps, coef.clone(), h_t, config.theta)?;
        Ok(Self { config, grid, op, times, coef, prop, family, groups, group_props, interior })
    }

    pub fn h_t(&self) -> T {
        self.times[1] - self.times[0]
    }

    fn check_axis(&self, l: &SpaceTimeField<T>) -> Result<()> {
        if l.grid.same_shape(&self.grid) && l.times.len() == self.times.len() {
            Ok(())
        } else {
            Err(PhiError::Parameter("source does not live on the parametrix grid and window".into()))
        }
    }

    /// Frozen solves `u_g = H_{c_g}(φ_g ℓ)`, one per anchor group.
    fn boundary_solves(&self, l: &SpaceTimeField<T>) -> Result<Vec<Vec<T>>> {
        let nn = self.grid.len();
        let zero = vec![T::zero(); nn];
        self.groups
            .par_iter()
            .zip(&self.group_props)
            .map(|(g, p)| {
                let src: Vec<T> = l.values.chunks(nn).flat_map(|s| s.iter().zip(&g.phi).map(|(&a, &b)| a * b)).collect();
                p.evolve(&zero, Some(&src), &self.times)
            })
            .collect()
    }

    /// Double solve `w̄` driven by `(1 − φ)ℓ` on the first copy.
    fn interior_solve(&self, l: &SpaceTimeField<T>) -> Result<Vec<T>> {
        let total = self.family.total();
        let mut src = Vec::with_capacity(self.interior.len() * self.times.len());
        for s in l.values.chunks(self.grid.len()) {
            let masked: Vec<T> = s.iter().zip(total).map(|(&v, &p)| (T::one() - p) * v).collect();
            src.extend(self.interior.lift(&masked));
        }
        self.interior.solve(&src, &self.times)
    }

    fn field(&self, values: Vec<T>, like: &SpaceTimeField<T>) -> SpaceTimeField<T> {
        SpaceTimeField { values, ..like.clone() }
    }

    fn assemble_boundary(&self, parts: &[Vec<T>]) -> Vec<T> {
        let nn = self.grid.len();
        let mut out = vec![T::zero(); nn * self.times.len()];
        for (g, u) in self.groups.iter().zip(parts) {
            out.par_chunks_mut(nn).zip(u.par_chunks(nn)).for_each(|(o, s)| {
                o.iter_mut().zip(s).zip(&g.psi_hat).for_each(|((a, &v), &w)| *a += w * v);
            });
        }
        out
    }

    fn assemble_interior(&self, w: &[T]) -> Vec<T> {
        let nn = self.grid.len();
        w.chunks(self.interior.len())
            .flat_map(|s| self.interior.restrict(s, nn).into_iter().zip(&self.interior.cutoff).map(|(v, &c)| c * v))
            .collect()
    }

    /// `𝒬_B ℓ = Σ_g ψ̂_g H_{c_g}(φ_g ℓ)`.
    pub fn boundary_apply(&self, l: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        self.check_axis(l)?;
        let parts = self.boundary_solves(l)?;
        Ok(self.field(self.assemble_boundary(&parts), l))
    }

    /// `𝒬_I ℓ = Ψ̂ · (double solve of (1 − φ)ℓ)`.
    pub fn interior_apply(&self, l: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        self.check_axis(l)?;
        let w = self.interior_solve(l)?;
        Ok(self.field(self.assemble_interior(&w), l))
    }

    /// `𝒬ℓ`.
    pub fn apply(&self, l: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        self.check_axis(l)?;
        let (b, i) = rayon::join(|| self.boundary_solves(l), || self.interior_solve(l));
        let mut q = self.assemble_boundary(&b?);
        q.iter_mut().zip(self.assemble_interior(&i?)).for_each(|(a, v)| *a += v);
        Ok(self.field(q, l))
    }

    /// `P_h u − ℓ` with the true coefficient, zero at `t = 0`.
    pub fn residual(&self, u: &SpaceTimeField<T>, l: &SpaceTimeField<T>) -> SpaceTimeField<T> {
        let nn = self.grid.len();
        let mut r = self.prop.apply_scheme(&u.values, &self.times);
        r[nn..].iter_mut().zip(&l.values[nn..]).for_each(|(a, &b)| *a -= b);
        self.field(r, u)
    }

    /// All error fields for one source.
    pub fn error_parts(&self, l: &SpaceTimeField<T>) -> Result<ErrorParts<T>> {
        self.check_axis(l)?;
        let (b, i) = rayon::join(|| self.boundary_solves(l), || self.interior_solve(l));
        let (b, w) = (b?, i?);
        let nn = self.grid.len();
        let nt = self.times.len();
        let th = self.config.theta;
        let mut r1 = vec![T::zero(); nn * nt];
        let mut r2 = vec![T::zero(); nn * nt];
        let mut r3 = vec![T::zero(); nn * nt];
        let bar = |u: &[T], k: usize, len: usize| -> Vec<T> {
            let (p, c) = (&u[(k - 1) * len..k * len], &u[k * len..(k + 1) * len]);
            p.iter().zip(c).map(|(&a, &b)| th * b + (T::one() - th) * a).collect()
        };
        for k in 1..nt {
            let tm = (self.times[k - 1] + self.times[k]) * T::half();
            let a = self.prop.a_nodes(tm);
            let dst1 = &mut r1[k * nn..(k + 1) * nn];
            let dst2 = &mut r2[k * nn..(k + 1) * nn];
            for (g, u) in self.groups.iter().zip(&b) {
                let ub = bar(u, k, nn);
                let lap = self.op.apply(&ub);
                let wu: Vec<T> = ub.iter().zip(&g.psi_hat).map(|(&v, &s)| v * s).collect();
                let lap_w = self.op.apply(&wu);
                for n in 0..nn {
                    dst1[n] += g.psi_hat[n] * (a[n] - g.frozen) * lap[n];
                    dst2[n] += a[n] * (lap_w[n] - g.psi_hat[n] * lap[n]);
                }
            }
            let nd = self.interior.len();
            let wb = bar(&w, k, nd);
            let abar = self.interior.prop.a_nodes(tm);
            let lap_d: Vec<T> = self.interior.op.apply(&wb).into_iter().zip(&abar).map(|(v, &c)| v * c).collect();
            let restricted = self.interior.restrict(&wb, nn);
            let lapd_m = self.interior.restrict(&lap_d, nn);
            let cw: Vec<T> = restricted.iter().zip(&self.interior.cutoff).map(|(&v, &c)| v * c).collect();
            let lap_cw = self.op.apply(&cw);
            let dst3 = &mut r3[k * nn..(k + 1) * nn];
            for n in 0..nn {
                dst3[n] = a[n] * lap_cw[n] - self.interior.cutoff[n] * lapd_m[n];
            }
        }
        let mut q = self.assemble_boundary(&b);
        q.iter_mut().zip(self.assemble_interior(&w)).for_each(|(s, v)| *s += v);
        let q = self.field(q, l);
        let total = self.residual(&q, l);
        Ok(ErrorParts { r1: self.field(r1, l), r2: self.field(r2, l), r3: self.field(r3, l), total, q })
    }

    /// `R_label ℓ`.
    pub fn error_apply(&self, label: ErrorLabel, l: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        Ok(self.error_parts(l)?.get(label).clone())
    }

    /// Probe-set lower bounds for `‖R1‖, ‖R2‖, ‖R3‖, ‖R‖` on `x^γ C^α_Φ`.
    pub fn norm_proxies(&self) -> Result<[T; 4]> {
        let probes = probe_set(self.grid.clone(), &self.times, self.config.probes, self.config.eps, &self.config.spec)?;
        if probes.len() < 20.min(self.config.probes) || probes.is_empty() {
            return Err(PhiError::Parameter(format!("only {} usable probes", probes.len())));
        }
        let per: Vec<[T; 4]> = probes
            .par_iter()
            .map(|l| {
                let parts = self.error_parts(l)?;
                let mut v = [T::zero(); 4];
                for (slot, lab) in v.iter_mut().zip(ErrorLabel::ALL) {
                    *slot = alpha_norm(parts.get(lab), &self.config.spec)?;
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        let mut best = [T::zero(); 4];
        for v in per {
            for k in 0..4 {
                best[k] = best[k].max(v[k]);
            }
        }
        Ok(best)
    }

    /// `max_probes ‖R_label ℓ‖_α`.
    pub fn estimate_operator_norm(&self, label: ErrorLabel) -> Result<T> {
        let all = self.norm_proxies()?;
        Ok(all[ErrorLabel::ALL.iter().position(|&l| l == label).expect("label listed")])
    }
}

/// Max over a probe set of `‖A ℓ‖_α` for an arbitrary linear action.
pub fn probe_norm<T: Real>(probes: &[SpaceTimeField<T>], spec: &crate::spaces::NormSpec<T>, action: impl Fn(&SpaceTimeField<T>) -> Result<SpaceTimeField<T>> + Sync) -> Result<T> {
    if probes.is_empty() {
        return Err(PhiError::Parameter("probe set is empty".into()));
    }
    let v: Vec<T> = probes.par_iter().map(|p| alpha_norm(&action(p)?, spec)).collect::<Result<_>>()?;
    Ok(v.into_iter().fold(T::zero(), |m, x| m.max(x)))
}
