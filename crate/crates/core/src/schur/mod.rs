//! Symmetric-group machinery for spectrum estimation on tensor powers:
//! Young frames and characters, isotypic projectors, entropy bands, and the
//! entropy-gap divergence constant.

mod bands;
mod frames;
mod modulus;
mod projectors;

pub use bands::{band_mass_table, entropy_band_instrument, EntropyBandInstrument};
pub use frames::{
    character, cycle_class_size, cycle_types, enumerate_frames, irrep_dimension, YoungFrame,
};
pub use modulus::{appendix_constant, entropy_modulus, inverse_entropy_modulus};
pub use projectors::{
    all_projectors, isotypic_projector, keyl_werner_bound, spectrum_probability,
    IsotypicProjector,
};
