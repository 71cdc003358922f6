//! Strong-stability-preserving Runge–Kutta and IMEX methods.
//!
//! The crate covers the method data model ([`tableau`]), order conditions
//! ([`conditions`]), SSP radii ([`ssp`]), linear stability ([`stability`]),
//! method search ([`optimizer`]), time stepping ([`integrators`]), test
//! problems ([`problems`]) and the experiment drivers ([`experiments`]).

pub mod error;
pub mod experiments;
mod linalg;
pub mod conditions;
pub mod tableau;

pub use error::{Error, Result};
pub mod integrators;
pub mod library;
pub mod optimizer;
pub mod problems;
pub mod ssp;
pub mod stability;
