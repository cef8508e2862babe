//! Fidelity and trace distance.
//!
//! Conventions: `F(a,b) = ||sqrt(a) sqrt(b)||_1^2` (squared; reduces to the
//! inner product `<psi| a |psi>` against pure `b`), and the trace norm is the
//! sum of singular values, so orthogonal pure states have distance 2.

use crate::error::{Error, Result};
use crate::linalg;
use crate::qcore::state::Operator;

/// Fidelity of two PSD operators on the same layout:
/// `(tr sqrt( sqrt(a) b sqrt(a) ))^2`, clipped spectrum, via the audited
/// Hermitian kernel. Symmetric in its arguments; ranges over
/// `[0, tr(a) tr(b)]`.
pub fn fidelity(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    a.layout().expect_same(b.layout(), "fidelity")?;
    let ra = linalg::psd_sqrt(a.matrix())?;
    let inner = &ra * b.matrix() * &ra;
    let spectrum = linalg::clipped_psd_spectrum(&linalg::herm_eigenvalues(&inner)?)?;
    let root_sum: f64 = spectrum.iter().map(|w| w.sqrt()).sum();
    Ok(root_sum * root_sum)
}

/// Trace distance `||a - b||_1` of two operators on the same layout.
pub fn trace_distance(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    a.layout().expect_same(b.layout(), "trace_distance")?;
    linalg::trace_norm_hermitian(&(a.matrix() - b.matrix()))
}

/// `tr(a b)` for Hermitian operators on the same layout; the inner-product
/// form of the fidelity against a pure state, and the outcome probability of
/// a POVM element.
pub fn hs_inner(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    a.layout().expect_same(b.layout(), "operator inner product")?;
    let (am, bm) = (a.matrix(), b.matrix());
    if am.nrows() != bm.nrows() {
        return Err(Error::ShapeMismatch("operator inner product".into()));
    }
    let mut acc = 0.0;
    for i in 0..am.nrows() {
        for j in 0..am.ncols() {
            // tr(ab) = sum_ij a_ij b_ji; both Hermitian, so the sum is real.
            acc += (am[(i, j)] * bm[(j, i)]).re;
        }
    }
    Ok(acc)
}
