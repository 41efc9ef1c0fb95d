use crate::error::{PhiError, Result};
use crate::scalar::Real;

/// Quintic smoothstep `10τ³ − 15τ⁴ + 6τ⁵` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep<T: Real>(tau: T) -> T {
    if tau <= T::zero() {
        return T::zero();
    }
    if tau >= T::one() {
        return T::one();
    }
    let t3 = tau * tau * tau;
    t3 * (T::lit(10.0) + tau * (T::lit(-15.0) + T::lit(6.0) * tau))
}

/// The cutoff profile: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, and on `[1/2, 1]` the
/// quintic with vanishing first and second derivatives at both ends.
#[inline]
pub(crate) fn sigma_unchecked<T: Real>(s: T) -> T {
    T::one() - smoothstep(T::two() * s - T::one())
}

pub fn sigma<T: Real>(s: T) -> Result<T> {
    if s.is_nan() || s < T::zero() {
        return Err(PhiError::Domain(format!("profile argument must be >= 0, got {s}")));
    }
    Ok(sigma_unchecked(s))
}

/// First derivative of the profile.
pub fn sigma_prime<T: Real>(s: T) -> T {
    let tau = T::two() * s - T::one();
    if tau <= T::zero() || tau >= T::one() {
        return T::zero();
    }
    let q = tau * (T::one() - tau);
    -T::two() * T::lit(30.0) * q * q
}
