//! Mean-field simulator and stability toolkit for a nonreciprocal
//! driven-dissipative boson chain.

pub mod chaos;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod obc;
pub mod pbc;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Boundary, LatticeState, ModelParams, C64};

/// Package version plus a hash of the workspace sources, embedded in every
/// output manifest.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("CONDENSATE_SOURCE_HASH"));
