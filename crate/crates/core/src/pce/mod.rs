//! Polynomial chaos surrogates in normalized Legendre polynomials.

pub mod archive;
pub mod family;
pub mod legendre;
pub mod multi_index;
pub mod surrogate;

pub use archive::SurrogateArchive;
pub use family::{fit_family, SurrogateFamily};
pub use legendre::{fill_normalized, gauss_legendre, legendre_normalized, scale_to_reference};
pub use multi_index::{
    total_order_cardinality, total_order_index_set, total_order_index_set_capped, MultiIndex,
    DEFAULT_TERM_CAP,
};
pub use surrogate::{design_matrix, fit_surrogate, relative_l2_error, FitOptions, FitReport, PceSurrogate};
