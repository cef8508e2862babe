//! Desk-scale workbench for one-way entanglement distillation and quantum
//! state merging when the source is only known up to a set: compound sources
//! (an unknown member of a set, i.i.d.) and arbitrarily varying sources (an
//! adversarial sequence drawn from the set).
//!
//! The crate is organized around the quantities those protocols optimize:
//!
//! * [`qcore`] — dense complex states on labeled factor spaces, fidelity,
//!   trace distance, entropies.
//! * [`channels`] — Kraus maps, instruments, one-way LOCC, one-shot
//!   distillation rates.
//! * [`schur`] — Young frames, symmetric-group characters, isotypic
//!   projectors, spectrum estimation, entropy-band instruments.
//! * [`avqs`] — type enumeration, permutation averaging, robustification,
//!   and derandomized protocol selection for arbitrarily varying sources.
//! * [`merging`] — merging fidelity, merging cost, and the detection
//!   construction separating compound from arbitrarily varying costs.
//! * [`optimize`] — minimax search for distillation instruments against the
//!   worst mixture of a state set.
//! * [`scenario`] — reproducible run configurations and reports shared by
//!   the CLI and the test suites.
//!
//! Everything is finite-dimensional, dense, and deterministic given a seed.

#![forbid(unsafe_code)]

pub mod avqs;
pub mod channels;
pub mod error;
pub mod linalg;
pub mod merging;
pub mod optimize;
pub mod perm;
pub mod qcore;
pub mod random;
pub mod scenario;
pub mod schur;
pub mod serial;
pub mod tol;

pub use error::{Error, Result};
