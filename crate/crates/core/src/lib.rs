//! Mode-by-mode evolution of massless Dirac fields on a Schwarzschild black
//! hole, on hyperboloidal slices reaching the horizon and null infinity.

pub mod asymptotics;
pub mod background;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod stencil;
pub mod swsh;

pub use error::{Error, Result};
pub use num_complex::Complex64;
