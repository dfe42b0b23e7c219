//! Numerical laboratory for Gaussian random Beltrami fields.
//!
//! The library samples the Gaussian ensemble of Beltrami fields on R^3 and
//! its frequency-L cousins on the 3-torus, evaluates their covariance
//! structure, counts their zeros against the closed-form Kac-Rice density,
//! and reproduces the explicit chaotic Beltrami field with its Melnikov
//! splitting constants.

pub mod axisym;
pub mod error;
pub mod field;
pub mod flow;
pub mod kacrice;
pub mod melnikov;
pub mod rng;
pub mod sphere;
pub mod torus;
pub mod zeros;

pub use error::{Error, Result};
pub use field::{FieldJet, SpectralDensityCoefficients};
pub use sphere::{MultiIndex, SphericalGrid};
