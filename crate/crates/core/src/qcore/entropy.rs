//! Entropic functionals, classical and quantum, all in bits (base-2 logs).

use crate::error::{Error, Result};
use crate::qcore::state::DensityMatrix;
use crate::tol;

/// `x log2 x` with the continuous extension `0 log 0 = 0`.
fn xlog2(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a nonnegative vector. Entries inside the clipping band
/// around zero count as zero; a genuinely negative entry is an error.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for &x in p {
        if x < -tol::EIG_CLIP {
            return Err(Error::domain(format!(
                "negative probability {x:.3e} in distribution"
            )));
        }
        if x > tol::EIG_CLIP {
            h -= xlog2(x);
        }
    }
    Ok(h)
}

/// Binary entropy `h(x) = -x log2 x - (1-x) log2 (1-x)` on [0, 1].
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-tol::EIG_CLIP..=1.0 + tol::EIG_CLIP).contains(&x) {
        return Err(Error::domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    let x = x.clamp(0.0, 1.0);
    Ok(-xlog2(x) - xlog2(1.0 - x))
}

/// Relative entropy `D(p||q)` in bits; `f64::INFINITY` when the support of
/// `p` is not contained in the support of `q`.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "distributions of length {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi < -tol::EIG_CLIP || qi < -tol::EIG_CLIP {
            return Err(Error::domain("negative probability in distribution"));
        }
        let (pi, qi) = (pi.max(0.0), qi.max(0.0));
        if pi > tol::EIG_CLIP {
            if qi <= tol::EIG_CLIP {
                return Ok(f64::INFINITY);
            }
            d += pi * (pi / qi).log2();
        }
    }
    Ok(d)
}

/// Von Neumann entropy `S(rho) = -tr(rho log2 rho)`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    shannon_entropy(&rho.eigenvalues()?)
}

/// Conditional entropy `S(X|Y, rho) = S(rho) - S(rho_Y)` where `given` names
/// the conditioning subsystems Y.
pub fn conditional_entropy(rho: &DensityMatrix, given: &[impl AsRef<str>]) -> Result<f64> {
    let marginal = rho.partial_trace(given)?;
    Ok(von_neumann_entropy(rho)? - von_neumann_entropy(&marginal)?)
}

/// Mutual information `I(X;Y, rho) = S(rho_X) + S(rho_Y) - S(rho_XY)` for
/// disjoint label sets X and Y.
pub fn mutual_information(
    rho: &DensityMatrix,
    x: &[impl AsRef<str>],
    y: &[impl AsRef<str>],
) -> Result<f64> {
    for lx in x {
        if y.iter().any(|ly| ly.as_ref() == lx.as_ref()) {
            return Err(Error::DuplicateLabel(lx.as_ref().to_string()));
        }
    }
    let joint: Vec<&str> = x
        .iter()
        .map(AsRef::as_ref)
        .chain(y.iter().map(AsRef::as_ref))
        .collect();
    let sx = von_neumann_entropy(&rho.partial_trace(x)?)?;
    let sy = von_neumann_entropy(&rho.partial_trace(y)?)?;
    let sxy = von_neumann_entropy(&rho.partial_trace(&joint)?)?;
    Ok(sx + sy - sxy)
}

/// Coherent information `I_c(X>Y, rho) = S(rho_Y) - S(rho_XY) = -S(X|Y)`.
pub fn coherent_information(
    rho: &DensityMatrix,
    from: &[impl AsRef<str>],
    to: &[impl AsRef<str>],
) -> Result<f64> {
    let joint: Vec<&str> = from
        .iter()
        .map(AsRef::as_ref)
        .chain(to.iter().map(AsRef::as_ref))
        .collect();
    let sy = von_neumann_entropy(&rho.partial_trace(to)?)?;
    let sxy = von_neumann_entropy(&rho.partial_trace(&joint)?)?;
    Ok(sy - sxy)
}

/// The continuity modulus `nu(x) = 4x log2(dim) + 2h(x)` on `0 < x <= 1/2`.
pub fn nu(x: f64, dim: usize) -> Result<f64> {
    if !(x > 0.0 && x <= 0.5) {
        return Err(Error::domain(format!("nu argument {x} outside (0, 1/2]")));
    }
    if dim < 1 {
        return Err(Error::domain("nu needs a positive dimension"));
    }
    Ok(4.0 * x * (dim as f64).log2() + 2.0 * binary_entropy(x)?)
}
