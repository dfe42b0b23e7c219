//! Product quadrature on the sphere: Gauss-Legendre in the polar cosine
//! crossed with a uniform azimuthal rule.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Quadrature rule on the unit sphere with a stated polynomial exactness.
#[derive(Debug, Clone)]
pub struct SphericalGrid {
    /// Unit nodes.
    pub nodes: Vec<[f64; 3]>,
    /// Positive weights summing to the surface area 4 pi.
    pub weights: Vec<f64>,
    /// Every monomial of total degree <= exact_degree integrates exactly.
    pub exact_degree: u32,
}

impl SphericalGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate<F: Fn(&[f64; 3]) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * f(xi))
            .sum()
    }

    pub fn require_degree(&self, needed: u32) -> Result<()> {
        if self.exact_degree < needed {
            return Err(Error::precondition(format!(
                "grid exactness degree {} is below the required {}",
                self.exact_degree, needed
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Golub-Welsch.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Jacobi matrix: zero diagonal, off-diagonal k/sqrt(4k^2-1)
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (x, 2.0 * v0 * v0) // mu_0 = 2 on [-1, 1]
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Product rule exact for all monomials with total degree <= `exact_degree`.
pub fn build_quadrature(exact_degree: u32) -> SphericalGrid {
    let n_polar = (exact_degree as usize + 2) / 2 + 1; // 2n-1 >= degree, padded by one
    let n_azimuth = exact_degree as usize + 1;

    let (xs, ws) = gauss_legendre(n_polar);
    let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;

    let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
    let mut weights = Vec::with_capacity(n_polar * n_azimuth);
    for (x, w) in xs.iter().zip(&ws) {
        let sin_t = (1.0 - x * x).max(0.0).sqrt();
        for j in 0..n_azimuth {
            let phi = dphi * j as f64;
            nodes.push([sin_t * phi.cos(), sin_t * phi.sin(), *x]);
            weights.push(w * dphi);
        }
    }
    SphericalGrid { nodes, weights, exact_degree }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sphere_monomial_integral, MultiIndex};
    use std::f64::consts::PI;

    #[test]
    fn weights_sum_to_surface_area() {
        for deg in [0u32, 1, 2, 7, 13, 30] {
            let g = build_quadrature(deg);
            let total: f64 = g.weights.iter().sum();
            assert!((total - 4.0 * PI).abs() < 1e-12, "deg {deg}: {total}");
            assert!(g.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn nodes_are_unit() {
        let g = build_quadrature(12);
        for xi in &g.nodes {
            let n = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn degree7_example_monomial() {
        let g = build_quadrature(7);
        let got = g.integrate(|xi| xi[0] * xi[0] * xi[1].powi(4));
        let exact = sphere_monomial_integral(MultiIndex(2, 4, 0));
        assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn exactness_sweep_within_declared_degree() {
        for deg in [3u32, 8, 13] {
            let g = build_quadrature(deg);
            for a1 in 0..=deg {
                for a2 in 0..=(deg - a1) {
                    for a3 in 0..=(deg - a1 - a2) {
                        let alpha = MultiIndex(a1, a2, a3);
                        let got = g.integrate(|xi| alpha.eval(xi));
                        let exact = sphere_monomial_integral(alpha);
                        assert!(
                            (got - exact).abs() < 1e-11,
                            "deg {deg} alpha {alpha:?}: {got} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_low_order() {
        let (x, w) = gauss_legendre(2);
        assert!((x[0] + 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
        assert!((x[1] - 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }
}
