//! Entropy-continuity modulus on the probability simplex and the Pinsker
//! constant derived from it.
//!
//! The modulus is the sharp bound `|H(p) - H(q)| <= t log(d-1) + h(t)` with
//! `t` the total variation distance `|p - q|_1 / 2`, capped at `1 - 1/d`
//! where the bound saturates at `log d`. Inverting it and chaining through
//! Pinsker's inequality turns an entropy gap into a divergence gap:
//! if `|H(p) - H(q)| >= eta` then `D(p||q) >= 2 c(eta, d)`.

use crate::error::{Error, Result};
use crate::qcore::binary_entropy;

const LN_2: f64 = std::f64::consts::LN_2;

fn modulus_of_tv(t: f64, d: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let h = binary_entropy(t).expect("t within [0, 1-1/d]");
    t * ((d - 1) as f64).log2() + h
}

/// Largest possible entropy difference at L1 distance `eps`:
/// `f(eps) = t log2(d-1) + h(t)` with `t = min(eps/2, 1 - 1/d)`.
pub fn entropy_modulus(eps: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("entropy modulus needs dimension >= 2"));
    }
    if !(0.0..=2.0 + 1e-12).contains(&eps) {
        return Err(Error::domain(format!(
            "L1 distance {eps} outside [0, 2]"
        )));
    }
    let cap = 1.0 - 1.0 / d as f64;
    Ok(modulus_of_tv((eps / 2.0).min(cap), d))
}

/// Smallest L1 distance forcing an entropy difference of `eta`: the inverse
/// of `entropy_modulus` in its strictly increasing range, by bisection.
pub fn inverse_entropy_modulus(eta: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("entropy modulus needs dimension >= 2"));
    }
    let log_d = (d as f64).log2();
    if !(eta > 0.0 && eta <= log_d + 1e-12) {
        return Err(Error::domain(format!(
            "entropy gap {eta} outside (0, log2 {d}]"
        )));
    }
    let cap = 1.0 - 1.0 / d as f64;
    // The modulus is strictly increasing in t on [0, 1-1/d], from 0 up to
    // exactly log d, so plain bisection converges.
    let (mut lo, mut hi) = (0.0f64, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if modulus_of_tv(mid, d) < eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi) // = 2t, the L1 distance
}

/// The Pinsker constant for entropy-gap detection:
/// `c(eta, d) = f^{-1}(eta)^2 / (4 ln 2)`, so that any two spectra whose
/// entropies differ by at least `eta` satisfy `D(p||q) >= 2 c(eta, d)`.
pub fn appendix_constant(eta: f64, d: usize) -> Result<f64> {
    let eps = inverse_entropy_modulus(eta, d)?;
    Ok(eps * eps / (4.0 * LN_2))
}
