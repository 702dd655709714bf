pub mod ansatz;
pub mod controls;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod magnus;
pub mod pauli;
pub mod quadrature;
pub mod training;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
