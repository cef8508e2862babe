//! Centralized numerical tolerances.
//!
//! Every threshold used by the library lives here with a note on where it
//! comes from, so no module carries ad-hoc magic numbers. Three regimes:
//!
//! * machine-precision slack for exact linear algebra on desk-scale matrices,
//! * structural tolerances that decide ranks and supports,
//! * validation tolerances for physicality checks on user input.

/// Eigenvalues of density operators within this band around zero are clipped
/// to zero before logs are taken. Hermitian eigensolvers on well-conditioned
/// desk-scale matrices are accurate to ~1e-14; 1e-12 leaves headroom.
pub const EIG_CLIP: f64 = 1e-12;

/// An eigenvalue of an allegedly positive-semidefinite operator below this is
/// a genuine negativity, not numerical dust, and is reported as an error.
pub const PSD_NEG: f64 = -1e-9;

/// Residual bound for the eigendecomposition round-trip `V diag(w) V* == M`,
/// checked on every call into the Hermitian kernel (max-abs entry norm).
pub const EIG_RECON: f64 = 1e-10;

/// Maximum allowed deviation from Hermitian symmetry, `max |M - M*|`.
pub const HERMITICITY: f64 = 1e-9;

/// Trace of a density operator must match 1 within this.
pub const TRACE_ONE: f64 = 1e-9;

/// Kraus completeness: `max |sum K*K - 1|` for a channel, and the
/// sub-normalization slack allowed for instruments.
pub const KRAUS_COMPLETENESS: f64 = 1e-9;

/// Singular values / Schmidt coefficients above this count toward rank.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Instrument branches with outcome probability at or below this are pruned
/// from outcome lists (their post-states are numerically meaningless).
pub const BRANCH_PRUNE: f64 = 1e-12;

/// Probability vectors must sum to 1 within this.
pub const PROB_SUM: f64 = 1e-12;

/// Convergence threshold for the simplex coordinate-descent refinement.
pub const SIMPLEX_STEP_MIN: f64 = 1e-4;

/// Agreement required between an optimizer's reported value and an
/// independent re-evaluation of the same point.
pub const CERTIFY: f64 = 1e-8;

/// Default cap on the ambient dimension of any constructed operator. Desk
/// scale: a 4096-dimensional dense complex matrix is 256 MiB; past this the
/// tooling refuses rather than thrashes.
pub const DEFAULT_DIM_CAP: usize = 4096;

use std::sync::atomic::{AtomicUsize, Ordering};

static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

/// Current ambient-dimension cap.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

/// Raise or lower the ambient-dimension cap (process-wide).
pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}
