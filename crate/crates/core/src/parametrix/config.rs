use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::scalar::Real;
use crate::spaces::{uniform_times, NormSpec};

/// Parameters of the parametrix construction and its audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametrixConfig<T> {
    pub eps: T,
    pub vartheta: T,
    /// contraction budget for `‖R‖`
    pub delta: T,
    pub t_window: T,
    /// largest admissible Neumann truncation
    pub neumann_cap: usize,
    pub probes: usize,
    pub theta: T,
    /// time steps per window; `None` picks `max(16, ⌈T/h_x⌉)`
    pub n_steps: Option<usize>,
    /// norm used for probes and error operators (`k` is ignored)
    pub spec: NormSpec<T>,
    /// Neumann stopping tolerance; `None` uses the single-solve
    /// discretization residual
    pub tol: Option<T>,
}

impl<T: Real> ParametrixConfig<T> {
    pub fn new(eps: T, t_window: T, spec: NormSpec<T>) -> Self {
        Self {
            eps,
            vartheta: eps * T::half(),
            delta: T::half(),
            t_window,
            neumann_cap: 12,
            probes: 24,
            theta: T::half(),
            n_steps: None,
            spec,
            tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T, name: &str| -> Result<()> {
            if v > T::zero() && v < T::one() {
                Ok(())
            } else {
                Err(PhiError::Parameter(format!("{name} must lie in (0,1), got {v}")))
            }
        };
        unit(self.eps, "eps")?;
        unit(self.vartheta, "vartheta")?;
        unit(self.delta, "delta")?;
        if !(self.t_window > T::zero()) {
            return Err(PhiError::Parameter(format!("window T must be positive, got {}", self.t_window)));
        }
        if self.neumann_cap < 1 {
            return Err(PhiError::Parameter("Neumann truncation cap must be >= 1".into()));
        }
        self.spec.validate()
    }

    pub fn steps(&self, grid: &Grid<T>) -> usize {
        self.n_steps.unwrap_or_else(|| {
            let n = (self.t_window / grid.h()).ceil().to_usize().unwrap_or(16);
            n.max(16)
        })
    }

    pub fn times(&self, grid: &Grid<T>) -> Vec<T> {
        uniform_times(self.t_window, self.steps(grid))
    }

    /// Same configuration over a different window with the same step.
    pub fn with_window(&self, t_window: T, grid: &Grid<T>) -> Self {
        let ht = self.t_window / T::of_usize(self.steps(grid));
        let n = (t_window / ht).round().to_usize().unwrap_or(1).max(1);
        Self { t_window, n_steps: Some(n), ..*self }
    }
}
