use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{phi_derivative, time_derivative, SpaceTimeField};
use crate::error::{PhiError, Result};
use crate::geometry::{periodic_diff, phi_distance_parts, Grid};
use crate::scalar::Real;

/// Parameters for the parabolic Hölder norm `‖x^{−γ}·‖_{k,α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec<T> {
    pub alpha: T,
    pub k: usize,
    pub gamma: T,
    pub pair_budget: usize,
    pub seed: u64,
}

impl<T: Real> NormSpec<T> {
    pub fn new(alpha: T, k: usize, gamma: T, pair_budget: usize, seed: u64) -> Result<Self> {
        let s = Self { alpha, k, gamma, pair_budget, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(PhiError::Parameter(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.pair_budget < 1000 {
            return Err(PhiError::Parameter(format!("pair_budget must be >= 1000, got {}", self.pair_budget)));
        }
        if !self.gamma.is_finite() {
            return Err(PhiError::Parameter("gamma must be finite".into()));
        }
        Ok(())
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// End points of a sampled pair: `(node, time index)` each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplePair {
    pub p: (usize, usize),
    pub q: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport<T> {
    pub sup_norm: T,
    pub alpha_seminorm: T,
    pub total: T,
    pub argmax_pair: Option<SamplePair>,
    /// per derivative word: `(label, sup, seminorm)`
    pub terms: Vec<(String, T, T)>,
}

impl SamplePair {
    /// `x:y:z:t` of both ends, for CSV output.
    pub fn describe<T: Real>(&self, grid: &Grid<T>, times: &[T]) -> String {
        let one = |(n, k): (usize, usize)| {
            let (x, y, z) = grid.xyz(n);
            format!("({:.5}:{:.5}:{:.5}:{:.5})", x, y, z, times[k])
        };
        format!("{}-{}", one(self.p), one(self.q))
    }
}

pub fn sup_norm<T: Real>(u: &SpaceTimeField<T>) -> Result<T> {
    if u.values.is_empty() {
        return Err(PhiError::Parameter("sup norm of an empty field".into()));
    }
    Ok(u.values.iter().fold(T::zero(), |m, v| m.max(v.abs())))
}

/// Deterministic pair schedule. The kind of pair depends only on the step
/// index, so a larger budget extends a smaller one.
struct PairSampler {
    rng: ChaCha8Rng,
    dims: [usize; 4],
    step: usize,
}

const NEAR: i64 = 4;

impl PairSampler {
    fn new<T: Real>(grid: &Grid<T>, nt: usize, seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), dims: [grid.nx, grid.ny, grid.nz, nt], step: 0 }
    }

    fn uniform(&mut self) -> [usize; 4] {
        let d = self.dims;
        [self.rng.gen_range(0..d[0]), self.rng.gen_range(0..d[1]), self.rng.gen_range(0..d[2]), self.rng.gen_range(0..d[3])]
    }

    fn next(&mut self) -> ([usize; 4], [usize; 4]) {
        let s = self.step;
        self.step += 1;
        let a = self.uniform();
        let mut b = a;
        match s % 6 {
            1 => b = self.uniform(),
            3 => b[3] = self.rng.gen_range(0..self.dims[3]),
            5 => {
                let c = self.uniform();
                b[..3].copy_from_slice(&c[..3]);
            }
            _ => {
                for ax in 0..4 {
                    let n = self.dims[ax] as i64;
                    if n == 1 {
                        continue;
                    }
                    let off = self.rng.gen_range(-NEAR..=NEAR);
                    let v = a[ax] as i64 + off;
                    b[ax] = if ax == 1 || ax == 2 { v.rem_euclid(n) as usize } else { v.clamp(0, n - 1) as usize };
                }
            }
        }
        (a, b)
    }
}

/// Sampled `[u]_α` with its maximizing pair.
pub fn alpha_seminorm_with_pair<T: Real>(u: &SpaceTimeField<T>, spec: &NormSpec<T>) -> Result<(T, Option<SamplePair>)> {
    spec.validate()?;
    let g = &*u.grid;
    let nt = u.n_times();
    let mut sampler = PairSampler::new(g, nt, spec.seed);
    let half_alpha = spec.alpha * T::half();
    let has_y = !g.y.is_empty();
    let has_z = !g.z.is_empty();
    let mut best = T::zero();
    let mut arg = None;
    for _ in 0..spec.pair_budget {
        let (a, b) = sampler.next();
        if a == b {
            continue;
        }
        let na = g.idx(a[0], a[1], a[2]);
        let nb = g.idx(b[0], b[1], b[2]);
        let dy = if has_y { periodic_diff(g.y[a[1]], g.y[b[1]]).abs() } else { T::zero() };
        let dz = if has_z { periodic_diff(g.z[a[2]], g.z[b[2]]).abs() } else { T::zero() };
        let d = phi_distance_parts(g.x[a[0]], g.x[b[0]], dy, dz, T::two());
        let dt = (u.times[a[3]] - u.times[b[3]]).abs();
        let den = d.powf(spec.alpha) + dt.powf(half_alpha);
        if !(den > T::zero()) {
            continue;
        }
        let q = (u.at(na, a[3]) - u.at(nb, b[3])).abs() / den;
        if q > best {
            best = q;
            arg = Some(SamplePair { p: (na, a[3]), q: (nb, b[3]) });
        }
    }
    Ok((best, arg))
}

/// Sampled lower bound for `[u]_α`: the largest quotient
/// `|u(p,t) − u(p',t')| / (d_{2,Φ}(p,p')^α + |t − t'|^{α/2})` over
/// `pair_budget` pairs, half of them within four cells of each other.
pub fn alpha_seminorm<T: Real>(u: &SpaceTimeField<T>, spec: &NormSpec<T>) -> Result<T> {
    alpha_seminorm_with_pair(u, spec).map(|r| r.0)
}

/// Frame-derivative words `(l₁ letters, l₂ time derivatives)` with
/// `l₁ + 2 l₂ ≤ k`.
fn words(m: usize, k: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = vec![(vec![], 0)];
    if k >= 1 {
        out.extend((0..m).map(|a| (vec![a], 0)));
    }
    if k >= 2 {
        for a in 0..m {
            for b in 0..m {
                out.push((vec![a, b], 0));
            }
        }
        out.push((vec![], 1));
    }
    out
}

fn word_label(w: &(Vec<usize>, usize)) -> String {
    const NAMES: [&str; 3] = ["Vx", "Vy", "Vz"];
    if w.1 == 1 {
        return "dt".into();
    }
    if w.0.is_empty() {
        return "id".into();
    }
    w.0.iter().map(|&a| NAMES.get(a).copied().unwrap_or("V?")).collect::<Vec<_>>().join("")
}

fn word_seed(seed: u64, w: &(Vec<usize>, usize)) -> u64 {
    let mut code: u64 = 1 + w.1 as u64 * 101;
    for &a in &w.0 {
        code = code * 7 + a as u64 + 1;
    }
    seed ^ code.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `‖x^{−γ}u‖_{k,α}`: sum of `sup + [·]_α` over all derivative words.
pub fn k_alpha_norm<T: Real>(u: &SpaceTimeField<T>, spec: &NormSpec<T>) -> Result<HolderReport<T>> {
    spec.validate()?;
    if spec.k > 2 {
        return Err(PhiError::Unsupported(format!("Hölder norms of order k = {} (only k <= 2)", spec.k)));
    }
    let g = u.grid.clone();
    let m = g.model.dim();
    let base = if spec.gamma == T::zero() {
        u.clone()
    } else {
        u.map_with_coords(|x, _, _, _, v| v / x.powf(spec.gamma))
    };
    let first: Vec<SpaceTimeField<T>> = if spec.k >= 1 {
        (0..m).map(|a| phi_derivative(&base, a)).collect::<Result<_>>()?
    } else {
        vec![]
    };
    let mut report = HolderReport { sup_norm: T::zero(), alpha_seminorm: T::zero(), total: T::zero(), argmax_pair: None, terms: vec![] };
    let mut best_semi = -T::one();
    for w in words(m, spec.k) {
        let field = match (w.0.as_slice(), w.1) {
            ([], 0) => base.clone(),
            ([a], 0) => first[*a].clone(),
            ([a, b], 0) => phi_derivative(&first[*b], *a)?,
            ([], 1) => time_derivative(&base)?,
            _ => unreachable!("word list only holds these shapes"),
        };
        let s = sup_norm(&field)?;
        let (semi, pair) = alpha_seminorm_with_pair(&field, &spec.with_seed(word_seed(spec.seed, &w)))?;
        report.sup_norm += s;
        report.alpha_seminorm += semi;
        if semi > best_semi {
            best_semi = semi;
            report.argmax_pair = pair;
        }
        report.terms.push((word_label(&w), s, semi));
    }
    report.total = report.sup_norm + report.alpha_seminorm;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;
    use crate::spaces::uniform_times;
    use std::sync::Arc;

    fn grid_a(nx: usize, ny: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::new(ManifoldModel::model_a(), nx, ny, 1).unwrap())
    }

    fn spec(k: usize) -> NormSpec<f64> {
        NormSpec::new(0.5, k, 0.0, 20_000, 7).unwrap()
    }

    #[test]
    fn sup_examples() {
        let g = grid_a(17, 8);
        let ts = uniform_times(0.1, 4);
        assert_eq!(sup_norm(&SpaceTimeField::zeros(g.clone(), ts.clone())).unwrap(), 0.0);
        let c = SpaceTimeField::from_fn(g.clone(), ts.clone(), |_, _, _, _| -2.5);
        assert_eq!(sup_norm(&c).unwrap(), 2.5);
        let x = SpaceTimeField::from_fn(g, ts, |x, _, _, _| x);
        assert_eq!(sup_norm(&x).unwrap(), 1.0);
    }

    #[test]
    fn seminorm_examples() {
        let g = grid_a(17, 8);
        let ts = uniform_times(0.1, 16);
        let c = SpaceTimeField::from_fn(g.clone(), ts.clone(), |_, _, _, _| 4.0);
        assert_eq!(alpha_seminorm(&c, &spec(0)).unwrap(), 0.0);
        let u = SpaceTimeField::from_fn(g, ts, |_, _, _, t| t);
        let s = alpha_seminorm(&u, &spec(0)).unwrap();
        assert!((s - 0.1f64.powf(0.75)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn budget_is_a_prefix() {
        let g = grid_a(33, 16);
        let u = SpaceTimeField::from_fn(g, uniform_times(0.05, 8), |x, y, _, t| (5.0 * x).sin() * y.cos() + t);
        let mut prev = 0.0;
        for b in [1000, 2000, 5000, 20_000] {
            let s = alpha_seminorm(&u, &NormSpec::new(0.5, 0, 0.0, b, 3).unwrap()).unwrap();
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn k_norm_examples() {
        let g = grid_a(33, 32);
        let ts = uniform_times(0.05, 8);
        let u = SpaceTimeField::from_fn(g.clone(), ts.clone(), |x, y, _, _| x * y.sin());
        let r0 = k_alpha_norm(&u, &spec(0)).unwrap();
        assert_eq!(r0.total, sup_norm(&u).unwrap() + alpha_seminorm(&u, &spec(0).with_seed(word_seed(7, &(vec![], 0)))).unwrap());
        let r1 = k_alpha_norm(&u, &spec(1)).unwrap();
        let labels: Vec<_> = r1.terms.iter().map(|t| t.0.as_str()).collect();
        assert_eq!(labels, vec!["id", "Vx", "Vy"]);
        // x²∂_x(x sin y) = x² sin y and x∂_y(x sin y) = x² cos y both peak at 1
        assert!((r1.terms[1].1 - 1.0).abs() < 1e-2);
        assert!((r1.terms[2].1 - 1.0).abs() < 1e-2);
        let r2 = k_alpha_norm(&u, &spec(2)).unwrap();
        assert!(r2.total >= r1.total && r1.total >= r0.total);
        assert!(matches!(k_alpha_norm(&u, &spec(3)), Err(PhiError::Unsupported(_))));
    }

    #[test]
    fn weight_is_isometry() {
        let g = grid_a(33, 16);
        let ts = uniform_times(0.05, 8);
        let one = SpaceTimeField::from_fn(g.clone(), ts.clone(), |_, _, _, _| 1.0);
        let w = SpaceTimeField::from_fn(g, ts, |x, _, _, _| x.powf(0.7));
        let a = k_alpha_norm(&one, &spec(2)).unwrap();
        let mut sp = spec(2);
        sp.gamma = 0.7;
        let b = k_alpha_norm(&w, &sp).unwrap();
        assert!((a.total - b.total).abs() < 1e-10);
    }

    #[test]
    fn spec_validation() {
        assert!(NormSpec::new(1.0f64, 0, 0.0, 5000, 0).is_err());
        assert!(NormSpec::new(0.5f64, 0, 0.0, 999, 0).is_err());
    }
}
