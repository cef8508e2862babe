//! Dense complex linear algebra on top of nalgebra, with one audited
//! Hermitian eigensolver that every spectral computation in the crate is
//! required to go through.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Largest absolute entry of a matrix (max norm).
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Deviation of `m` from Hermitian symmetry, `max |m - m*|`.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Kronecker product with the row-major convention used throughout:
/// the first factor owns the most significant part of a joint index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().sum()
}

pub fn trace_re(m: &CMat) -> f64 {
    trace(m).re
}

/// Result of the audited Hermitian eigendecomposition.
///
/// Eigenvalues are sorted in descending order; `vectors` holds the matching
/// orthonormal eigenvectors as columns, so `vectors * diag(values) * vectors*`
/// reconstructs the input.
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEigen {
    /// Rebuild the matrix, optionally with transformed eigenvalues.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let lambda = CMat::from_diagonal(&CVec::from_iterator(
            n,
            self.values.iter().map(|&w| Complex64::new(f(w), 0.0)),
        ));
        &self.vectors * lambda * self.vectors.adjoint()
    }
}

/// The single Hermitian eigensolver kernel.
///
/// Checks Hermitian symmetry on entry, decomposes the symmetrized matrix
/// `(m + m*)/2`, sorts eigenpairs descending, and verifies the round-trip
/// residual against the symmetrized input before returning. Every entropy,
/// fidelity, square root, and rank computation in the crate funnels through
/// here, so a silently broken decomposition cannot leak into results.
pub fn herm_eigen(m: &CMat) -> Result<HermEigen> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = hermiticity_deviation(m);
    if dev > tol::HERMITICITY {
        return Err(Error::NotHermitian {
            dev,
            tol: tol::HERMITICITY,
        });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.clone().symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues of a Hermitian matrix are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }

    let out = HermEigen { values, vectors };
    let residual = max_abs(&(out.assemble(|w| w) - &sym));
    if residual > tol::EIG_RECON {
        return Err(Error::EigenResidual {
            residual,
            tol: tol::EIG_RECON,
        });
    }
    Ok(out)
}

/// Eigenvalues only, descending.
pub fn herm_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    Ok(herm_eigen(m)?.values)
}

/// Clip the spectrum of a nominally PSD operator: eigenvalues in
/// `[-EIG_CLIP, EIG_CLIP]` collapse to zero, anything below `PSD_NEG` is an
/// error. Returns the clipped spectrum (descending).
pub fn clipped_psd_spectrum(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(&min) = values
        .iter()
        .min_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"))
    {
        if min < tol::PSD_NEG {
            return Err(Error::NotPsd { min });
        }
    }
    Ok(values
        .iter()
        .map(|&w| if w.abs() <= tol::EIG_CLIP { 0.0 } else { w.max(0.0) })
        .collect())
}

/// Positive-semidefinite square root via the kernel, with spectrum clipping.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let eig = herm_eigen(m)?;
    let clipped = clipped_psd_spectrum(&eig.values)?;
    let half = HermEigen {
        values: clipped,
        vectors: eig.vectors,
    };
    Ok(half.assemble(f64::sqrt))
}

/// Inverse square root on the support of a strictly positive matrix.
/// Used to renormalize raw Kraus families; eigenvalues at or below
/// `RANK_CUTOFF` are treated as absent from the support.
pub fn psd_inv_sqrt(m: &CMat) -> Result<CMat> {
    let eig = herm_eigen(m)?;
    clipped_psd_spectrum(&eig.values)?;
    Ok(eig.assemble(|w| {
        if w > tol::RANK_CUTOFF {
            1.0 / w.sqrt()
        } else {
            0.0
        }
    }))
}

/// Trace norm of a Hermitian matrix: the sum of singular values, which for
/// Hermitian input is the sum of absolute eigenvalues.
pub fn trace_norm_hermitian(m: &CMat) -> Result<f64> {
    Ok(herm_eigenvalues(m)?.iter().map(|w| w.abs()).sum())
}

/// Singular values (descending) of an arbitrary rectangular complex matrix.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigen_sorts_descending_and_reconstructs() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0),
                c(0.0, -1.0),
                c(0.0, 0.0),
                c(0.0, 1.0),
                c(2.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(5.0, 0.0),
            ],
        );
        let eig = herm_eigen(&m).unwrap();
        // Block eigenvalues: 5 from the corner, 2 +- 1 from the Pauli-y block.
        assert!((eig.values[0] - 5.0).abs() < 1e-12);
        assert!((eig.values[1] - 3.0).abs() < 1e-12);
        assert!((eig.values[2] - 1.0).abs() < 1e-12);
        assert!(max_abs(&(eig.assemble(|w| w) - &m)) < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(herm_eigen(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn sqrt_squares_back() {
        let g = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)]);
        let m = &g * g.adjoint();
        let s = psd_sqrt(&m).unwrap();
        assert!(max_abs(&(&s * &s - &m)) < 1e-10);
    }

    #[test]
    fn inv_sqrt_normalizes() {
        let g = CMat::from_row_slice(2, 2, &[c(1.0, 0.5), c(0.0, 1.0), c(2.0, 0.0), c(0.3, 0.0)]);
        let m = &g * g.adjoint();
        let w = psd_inv_sqrt(&m).unwrap();
        let should_be_id = &w * &m * &w;
        assert!(max_abs(&(should_be_id - identity(2))) < 1e-10);
    }

    #[test]
    fn trace_norm_of_traceless_difference() {
        // diag(1/2, -1/2) has trace norm 1.
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.0), c(-0.5, 0.0)]));
        assert!((trace_norm_hermitian(&m).unwrap() - 1.0).abs() < 1e-14);
    }
}
