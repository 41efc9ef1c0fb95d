use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PhiError, Result};
use crate::geometry::Grid;
use crate::scalar::Real;
use crate::spaces::{alpha_seminorm, sup_norm, NormSpec, SpaceTimeField};

/// Measured `‖u‖_α = ‖x^{−γ}u‖_∞ + [x^{−γ}u]_α`.
pub fn alpha_norm<T: Real>(u: &SpaceTimeField<T>, spec: &NormSpec<T>) -> Result<T> {
    let w = if spec.gamma == T::zero() {
        u.clone()
    } else {
        u.map_with_coords(|x, _, _, _, v| v / x.powf(spec.gamma))
    };
    Ok(sup_norm(&w)? + alpha_seminorm(&w, &spec.with_k(0))?)
}

/// Deterministic probe set: collar bumps, trigonometric modes and random
/// smooth fields, each scaled to unit measured α-norm.
pub fn probe_set<T: Real>(grid: Arc<Grid<T>>, times: &[T], count: usize, eps: T, spec: &NormSpec<T>) -> Result<Vec<SpaceTimeField<T>>> {
    if count == 0 {
        return Err(PhiError::Parameter("probe set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_0F_9B0BE5);
    let t_end = *times.last().expect("nonempty time axis");
    let has_z = grid.model.chart.f > 0;
    let mut out = Vec::with_capacity(count);
    for p in 0..count {
        let f: Box<dyn Fn(T, T, T, T) -> T> = match p % 3 {
            0 => {
                // collar or interior bump, slowly modulated in time
                let x0 = T::lit(rng.gen_range(0.0..1.0f64).powi(2)) * T::lit(0.8) + eps * T::lit(0.25);
                let w = eps * T::lit(rng.gen_range(0.3..1.5));
                let ky = T::lit(rng.gen_range(0..3) as f64);
                let ph = T::lit(rng.gen_range(0.0..6.28));
                let om = T::lit(rng.gen_range(0.0..2.0));
                Box::new(move |x, y, _z, t| {
                    let d = (x - x0) / w;
                    (-d * d).exp() * (T::one() + T::half() * (ky * y + ph).cos()) * (T::one() + om * t / t_end)
                })
            }
            1 => {
                // frequencies spread up to a quarter of the grid Nyquist limit
                let mut freq = |top: usize| T::lit((top.max(2) as f64).powf(rng.gen_range(0.0..1.0)).floor());
                let ky = freq(grid.ny / 4);
                let kz = if has_z { freq(grid.nz / 4) } else { T::zero() };
                let kx = freq(grid.nx / 4);
                Box::new(move |x, y, z, t| (kx * T::PI() * x).cos() * (ky * y + kz * z).cos() * (T::one() - T::half() * t / t_end))
            }
            _ => {
                let terms: Vec<[T; 5]> = (0..4)
                    .map(|_| {
                        [
                            T::lit(rng.gen_range(-1.0..1.0)),
                            T::lit(rng.gen_range(0..4) as f64),
                            T::lit(rng.gen_range(0..3) as f64),
                            T::lit(rng.gen_range(0..2) as f64),
                            T::lit(rng.gen_range(0.0..6.28)),
                        ]
                    })
                    .collect();
                let zf = if has_z { T::one() } else { T::zero() };
                Box::new(move |x, y, z, t| {
                    terms
                        .iter()
                        .map(|c| c[0] * ((c[1] + T::one()) * T::PI() * x + c[4]).sin() * (c[2] * y + zf * c[3] * z + c[4] * t / t_end).cos())
                        .sum::<T>()
                })
            }
        };
        let u = SpaceTimeField::from_fn(grid.clone(), times.to_vec(), f);
        let n = alpha_norm(&u, spec)?;
        if !(n > T::zero()) {
            continue;
        }
        out.push(u.scale(T::one() / n));
    }
    Ok(out)
}
