//! Special functions and quadrature on the unit sphere.
//!
//! Everything downstream (field evaluation, covariance kernels, the Kac-Rice
//! moment integrals) reduces to integrals over the unit sphere with surface
//! measure `dsigma`, for which this module provides exact closed-form monomial
//! values and product quadrature rules of prescribed polynomial exactness.

mod bessel;
mod harmonics;
mod quadrature;

pub use bessel::{bessel_j0, bessel_j01, bessel_j1, bessel_j1_prime, spherical_bessel};
pub use harmonics::{real_spherical_harmonic, real_spherical_harmonics_upto};
pub use quadrature::{build_quadrature, gauss_legendre, SphericalGrid};

use crate::error::{Error, Result};

/// Exponent triple of a monomial `xi1^a1 * xi2^a2 * xi3^a3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiIndex(pub u32, pub u32, pub u32);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0 + self.1 + self.2
    }

    pub fn eval(&self, xi: &[f64; 3]) -> f64 {
        xi[0].powi(self.0 as i32) * xi[1].powi(self.1 as i32) * xi[2].powi(self.2 as i32)
    }
}

/// Gamma function at half-integer argument `n/2`, `n >= 1`.
fn gamma_half(n: u32) -> f64 {
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1, Gamma(x+1) = x Gamma(x)
    let mut x = if n % 2 == 1 { std::f64::consts::PI.sqrt() } else { 1.0 };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        x *= k as f64 / 2.0;
        k += 2;
    }
    x
}

/// Closed-form value of the monomial integral over the unit sphere.
///
/// Vanishes unless all exponents are even; otherwise equals
/// `2 * prod_j Gamma((a_j+1)/2) / Gamma((|a|+3)/2)`.
pub fn sphere_monomial_integral(alpha: MultiIndex) -> f64 {
    let MultiIndex(a1, a2, a3) = alpha;
    if a1 % 2 != 0 || a2 % 2 != 0 || a3 % 2 != 0 {
        return 0.0;
    }
    let num = gamma_half(a1 + 1) * gamma_half(a2 + 1) * gamma_half(a3 + 1);
    2.0 * num / gamma_half(alpha.degree() + 3)
}

pub(crate) fn check_unit(xi: &[f64; 3], tol: f64) -> Result<()> {
    let n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    if (n2.sqrt() - 1.0).abs() > tol {
        return Err(Error::invalid(format!(
            "expected a unit vector, got |xi| = {}",
            n2.sqrt()
        )));
    }
    Ok(())
}
