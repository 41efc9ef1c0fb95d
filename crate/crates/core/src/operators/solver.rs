use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::DiscreteOperator;
use crate::error::{PhiError, Result};
use crate::scalar::Real;

/// Solver for `(D + κK) u = b` with `D` diagonal positive.
///
/// When `D` is constant on every x row the system is diagonalized by a DFT
/// in the periodic directions and each mode is a tridiagonal solve in x.
/// Otherwise preconditioned conjugate gradients are used, preconditioned by
/// the row-averaged fast solve.
pub struct ShiftedSolver<T: Real> {
    op: Arc<DiscreteOperator<T>>,
    fft_y: Option<(Arc<dyn Fft<T>>, Arc<dyn Fft<T>>)>,
    fft_z: Option<(Arc<dyn Fft<T>>, Arc<dyn Fft<T>>)>,
    mu_y: Vec<T>,
    mu_z: Vec<T>,
    pub max_iter: usize,
    pub rel_tol: T,
}

impl<T: Real> std::fmt::Debug for ShiftedSolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftedSolver").field("nx", &self.op.nx).field("ny", &self.op.ny).field("nz", &self.op.nz).finish()
    }
}

fn eigen<T: Real>(n: usize) -> Vec<T> {
    (0..n).map(|j| T::two() - T::two() * (T::TAU() * T::of_usize(j) / T::of_usize(n)).cos()).collect()
}

impl<T: Real> ShiftedSolver<T> {
    pub fn new(op: Arc<DiscreteOperator<T>>) -> Self {
        let mut planner = FftPlanner::<T>::new();
        let mut plans = |n: usize| {
            if n > 1 {
                Some((planner.plan_fft_forward(n), planner.plan_fft_inverse(n)))
            } else {
                None
            }
        };
        let fft_y = plans(op.ny);
        let fft_z = plans(op.nz);
        let mu_y = eigen(op.ny);
        let mu_z = eigen(op.nz);
        Self { op, fft_y, fft_z, mu_y, mu_z, max_iter: 500, rel_tol: T::solver_tol() }
    }

    pub fn operator(&self) -> &Arc<DiscreteOperator<T>> {
        &self.op
    }

    /// Exact solve with `D = d_row[i]` on row `i`.
    pub fn solve_rows(&self, d_row: &[T], kappa: T, b: &[T]) -> Vec<T> {
        let op = &*self.op;
        let (nx, ny, nz) = (op.nx, op.ny, op.nz);
        let p = ny * nz;
        let mut buf: Vec<Complex<T>> = b.iter().map(|&v| Complex::new(v, T::zero())).collect();
        // forward transform: z (contiguous), then y after transposing planes to (i, l, j)
        if let Some((f, _)) = &self.fft_z {
            f.process(&mut buf);
        }
        let mut tr = transpose_planes(&buf, nx, ny, nz);
        if let Some((f, _)) = &self.fft_y {
            f.process(&mut tr);
        }
        // mode m = l * ny + j sits at i * p + m
        let solved: Vec<Vec<Complex<T>>> = (0..p)
            .into_par_iter()
            .map(|m| {
                let (l, j) = (m / ny, m % ny);
                let (my, mz) = (self.mu_y[j], self.mu_z[l]);
                let mut diag = Vec::with_capacity(nx);
                for i in 0..nx {
                    let mut d = d_row[i] + kappa * (op.cy[i] * my + op.cz[i] * mz);
                    if i > 0 {
                        d += kappa * op.cx[i - 1];
                    }
                    if i + 1 < nx {
                        d += kappa * op.cx[i];
                    }
                    diag.push(d);
                }
                let rhs: Vec<Complex<T>> = (0..nx).map(|i| tr[i * p + m]).collect();
                thomas(&diag, &op.cx, kappa, rhs)
            })
            .collect();
        for (m, col) in solved.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                tr[i * p + m] = v;
            }
        }
        if let Some((_, f)) = &self.fft_y {
            f.process(&mut tr);
        }
        let mut back = transpose_planes_inv(&tr, nx, ny, nz);
        if let Some((_, f)) = &self.fft_z {
            f.process(&mut back);
        }
        let scale = T::one() / T::of_usize(p);
        back.into_iter().map(|c| c.re * scale).collect()
    }

    /// Solve with a general positive diagonal `d` (one entry per node).
    pub fn solve(&self, d: &[T], kappa: T, b: &[T]) -> Result<Vec<T>> {
        let op = &*self.op;
        let p = op.plane();
        let mut row_const = true;
        let mut d_row = Vec::with_capacity(op.nx);
        for row in d.chunks(p) {
            let first = row[0];
            if row.iter().any(|&v| v != first) {
                row_const = false;
            }
            d_row.push(row.iter().copied().sum::<T>() / T::of_usize(p));
        }
        if row_const {
            return Ok(self.solve_rows(&d_row, kappa, b));
        }
        self.pcg(d, &d_row, kappa, b)
    }

    fn apply_a(&self, d: &[T], kappa: T, u: &[T], out: &mut [T]) {
        self.op.apply_k(u, out);
        out.par_iter_mut().zip(d).zip(u).for_each(|((o, &dd), &uu)| *o = dd * uu + kappa * *o);
    }

    fn pcg(&self, d: &[T], d_row: &[T], kappa: T, b: &[T]) -> Result<Vec<T>> {
        let n = b.len();
        let dot = |a: &[T], c: &[T]| a.par_iter().zip(c).map(|(&s, &t)| s * t).sum::<T>();
        let bnorm = dot(b, b).sqrt();
        if bnorm == T::zero() {
            return Ok(vec![T::zero(); n]);
        }
        let mut x = self.solve_rows(d_row, kappa, b);
        let mut r = vec![T::zero(); n];
        self.apply_a(d, kappa, &x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
        let mut z = self.solve_rows(d_row, kappa, &r);
        let mut pdir = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![T::zero(); n];
        for _ in 0..self.max_iter {
            if dot(&r, &r).sqrt() <= self.rel_tol * bnorm {
                return Ok(x);
            }
            self.apply_a(d, kappa, &pdir, &mut ap);
            let alpha = rz / dot(&pdir, &ap);
            x.par_iter_mut().zip(&pdir).for_each(|(xi, &pi)| *xi += alpha * pi);
            r.par_iter_mut().zip(&ap).for_each(|(ri, &ai)| *ri -= alpha * ai);
            z = self.solve_rows(d_row, kappa, &r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            pdir.par_iter_mut().zip(&z).for_each(|(pi, &zi)| *pi = zi + beta * *pi);
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= T::lit(1e3) * self.rel_tol {
            return Ok(x);
        }
        Err(PhiError::NoConvergence {
            message: format!("preconditioned CG stalled at relative residual {res}"),
            gaps: vec![res.as_f64()],
        })
    }
}

/// Tridiagonal solve with main diagonal `diag` and symmetric off-diagonal
/// `−κ cx`.
fn thomas<T: Real>(diag: &[T], cx: &[T], kappa: T, mut rhs: Vec<Complex<T>>) -> Vec<Complex<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut denom = diag[0];
    if n > 1 {
        c[0] = -kappa * cx[0] / denom;
    }
    rhs[0] = rhs[0] / denom;
    for i in 1..n {
        let a = -kappa * cx[i - 1];
        denom = diag[i] - a * c[i - 1];
        if i + 1 < n {
            c[i] = -kappa * cx[i] / denom;
        }
        rhs[i] = (rhs[i] - rhs[i - 1] * a) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - rhs[i + 1] * c[i];
    }
    rhs
}

fn transpose_planes<T: Real>(buf: &[Complex<T>], nx: usize, ny: usize, nz: usize) -> Vec<Complex<T>> {
    if ny == 1 || nz == 1 {
        return buf.to_vec();
    }
    let p = ny * nz;
    let mut out = vec![Complex::new(T::zero(), T::zero()); buf.len()];
    out.par_chunks_mut(p).enumerate().for_each(|(i, dst)| {
        let src = &buf[i * p..(i + 1) * p];
        for j in 0..ny {
            for l in 0..nz {
                dst[l * ny + j] = src[j * nz + l];
            }
        }
    });
    let _ = nx;
    out
}

fn transpose_planes_inv<T: Real>(buf: &[Complex<T>], nx: usize, ny: usize, nz: usize) -> Vec<Complex<T>> {
    if ny == 1 || nz == 1 {
        return buf.to_vec();
    }
    let p = ny * nz;
    let mut out = vec![Complex::new(T::zero(), T::zero()); buf.len()];
    out.par_chunks_mut(p).enumerate().for_each(|(i, dst)| {
        let src = &buf[i * p..(i + 1) * p];
        for l in 0..nz {
            for j in 0..ny {
                dst[j * nz + l] = src[l * ny + j];
            }
        }
    });
    let _ = nx;
    out
}
