pub mod dyson;
pub mod error;
pub mod exact;
pub mod fock;
pub mod harness;
pub mod params;
pub mod propagator;
pub mod quadrature;
pub mod spin;
pub mod wigner;

pub use error::{Error, Result};
pub use fock::FieldState;
pub use params::ModelParams;
