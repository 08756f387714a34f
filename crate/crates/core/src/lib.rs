//! Generalized Lamb shifts and vacuum energies of random dipolar media from
//! multiple-scattering cluster expansions, with finite-configuration
//! log-determinant oracles and effective-medium comparators.

pub mod config;
pub mod effmedium;
pub mod error;
pub mod green;
pub mod lamb;
pub mod params;
pub mod phi;
pub mod polarizability;
pub mod quadrature;
pub mod special;

pub use error::{Result, VacuaError};
pub use num_complex::Complex64 as C64;
