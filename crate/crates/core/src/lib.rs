//! Spectral analysis of anisotropic thermo-elastic systems.
//!
//! The crate builds the elastic symbol A(ξ) of a medium, the coupled
//! thermo-elastic symbol B(ξ), its eigenvalue asymptotics, blow-ups at
//! degenerate directions, Fresnel surfaces and a frequency-space solver
//! used to measure dispersive decay rates.

pub mod blowup;
pub mod error;
pub mod evolve;
pub mod fresnel;
pub mod linalg;
pub mod media;
pub mod spectral;
pub mod sphere;
pub mod symbol;

pub use error::{Error, Result};
pub use media::{CouplingConstants, MediumSpec, PositivityReport};
