//! States, layouts, and the entropic and distance functionals everything
//! else is built from.

mod entropy;
mod layout;
mod metrics;
mod state;

pub use entropy::{
    binary_entropy, coherent_information, conditional_entropy, mutual_information, nu,
    relative_entropy, shannon_entropy, von_neumann_entropy,
};
pub use layout::HilbertLayout;
pub use metrics::{fidelity, hs_inner, trace_distance};
pub use state::{DensityMatrix, Operator, PsdOperator, PureState};

#[allow(unused_imports)]
pub(crate) use state::{partial_trace_raw, permutation_index_map};
