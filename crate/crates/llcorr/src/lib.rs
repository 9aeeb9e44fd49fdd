//! Correlation lengths and amplitudes of the repulsive one-dimensional Bose gas at finite temperature.

pub mod error;
pub mod lengths;
pub mod amplitudes;
pub mod deformed;
pub mod numerics;
pub mod poles;
pub mod thermo;
pub mod verification;

pub use error::{Error, Result};
pub use num_complex::Complex64;
