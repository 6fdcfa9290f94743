pub mod bounds;
pub mod composite_saa;
pub mod cond_grad;
pub mod error;
pub mod mesh_fem;
pub mod pde_models;
pub mod random_field;
pub mod study;

pub use error::{Result, SaaError};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
