//! The Gaussian random Beltrami field on R^3.
//!
//! A field sample is `u = U_{phi p}`, the sphere-supported inverse Fourier
//! transform of the scalar random density `phi = sum_{lm} i^l a_{lm} Y_{lm}`
//! times the fixed polarization `p`. Evaluation goes through sphere
//! quadrature of the oscillatory integral; the Jacobian comes from the same
//! nodes with an extra `i xi` factor in the integrand.

use crate::error::{Error, Result};
use crate::rng::keyed_normal;
use crate::sphere::{
    real_spherical_harmonics_upto, spherical_bessel, SphericalGrid,
};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `q(t) = (1/8) sqrt(15/pi) (1 + sqrt(7) i t)`, the normalization factor of `p`.
pub fn q_factor(t: f64) -> Complex64 {
    let c = 0.125 * (15.0 / std::f64::consts::PI).sqrt();
    Complex64::new(c, c * 7.0f64.sqrt() * t)
}

/// The fixed polarization polynomial
/// `p(xi) = q(xi_1) (xi_1^2 - 1, xi_1 xi_2 - i xi_3, xi_1 xi_3 + i xi_2)`.
///
/// On the unit sphere it spans the kernel of the Beltrami constraint matrix
/// away from the poles `(+-1, 0, 0)`, is Hermitian, and is tangent:
/// `xi . p(xi) = 0` for `|xi| = 1`.
pub fn p_vector(xi: &[f64; 3]) -> Vector3<Complex64> {
    let q = q_factor(xi[0]);
    Vector3::new(
        q * Complex64::new(xi[0] * xi[0] - 1.0, 0.0),
        q * Complex64::new(xi[0] * xi[1], -xi[2]),
        q * Complex64::new(xi[0] * xi[2], xi[1]),
    )
}

/// The Beltrami constraint matrix, acting as `M_xi V = i xi x V - V`.
///
/// `M_xi f = 0` encodes the Fourier-side Beltrami equation `i xi x f = f`;
/// its determinant is `|xi|^2 - 1` and its rank is 2 on the unit sphere.
pub fn m_matrix(xi: &[f64; 3]) -> Matrix3<Complex64> {
    let i = Complex64::i();
    let z = Complex64::new(0.0, 0.0);
    let m1 = Complex64::new(-1.0, 0.0);
    Matrix3::new(
        m1, -i * xi[2], i * xi[1],
        i * xi[2], m1, -i * xi[0],
        -i * xi[1], i * xi[0], m1 - z,
    )
}

/// Truncated random spectral density: real coefficients `a_{lm}` for
/// `l <= n_max`, regenerable bit-for-bit from `(n_max, seed)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralDensityCoefficients {
    /// Truncation degree N.
    pub n_max: u32,
    /// Generator seed; coefficients are a pure function of (n_max, seed).
    pub seed: u64,
    /// Packed coefficients, `a_{lm}` at `l^2 + l + m`.
    pub coefficients: Vec<f64>,
}

impl SpectralDensityCoefficients {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn get(&self, l: u32, m: i32) -> f64 {
        debug_assert!(m.unsigned_abs() <= l);
        self.coefficients[(l * l) as usize + (l as i32 + m) as usize]
    }

    /// All-zero density of the same shape (for linearity checks).
    pub fn zeroed(&self) -> Self {
        SpectralDensityCoefficients {
            n_max: self.n_max,
            seed: self.seed,
            coefficients: vec![0.0; self.coefficients.len()],
        }
    }
}

/// Independent standard normal draws for every `(l, m)` with `l <= n_max`.
///
/// Each coefficient is keyed by `(seed, l, m)` through the counter-based
/// generator, so values do not depend on traversal order.
pub fn sample_coefficients(n_max: u32, seed: u64) -> SpectralDensityCoefficients {
    let dim = ((n_max + 1) * (n_max + 1)) as usize;
    let mut coefficients = vec![0.0; dim];
    for l in 0..=n_max {
        for m in -(l as i32)..=(l as i32) {
            let packed = (l * l) as u64 + (l as i64 + m as i64) as u64;
            coefficients[packed as usize] = keyed_normal(seed, packed, 0);
        }
    }
    SpectralDensityCoefficients { n_max, seed, coefficients }
}

/// Field value and Jacobian at a point.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub position: Vector3<f64>,
    pub u: Vector3<f64>,
    /// Jacobian, entry `(i, j) = d u_i / d x_j`.
    pub grad: Matrix3<f64>,
}

impl FieldJet {
    pub fn divergence(&self) -> f64 {
        self.grad.trace()
    }

    pub fn curl(&self) -> Vector3<f64> {
        Vector3::new(
            self.grad[(2, 1)] - self.grad[(1, 2)],
            self.grad[(0, 2)] - self.grad[(2, 0)],
            self.grad[(1, 0)] - self.grad[(0, 1)],
        )
    }

    pub fn jacobian_det(&self) -> f64 {
        self.grad.determinant()
    }
}

/// Required quadrature exactness for evaluating a truncation-N field at `x`.
pub fn required_degree(n_max: u32, x_norm: f64) -> u32 {
    2 * n_max + 8 + (1.4 * x_norm).ceil() as u32
}

/// Precomputed per-node data for fast repeated evaluation of one sample.
///
/// Building the table costs one pass of `phi p` over the grid; each
/// subsequent jet evaluation is a single sweep of plane-wave factors.
pub struct FieldSampler<'a> {
    grid: &'a SphericalGrid,
    /// `w_i phi(xi_i) p(xi_i)` per node.
    moments: Vec<Vector3<Complex64>>,
    n_max: u32,
}

impl<'a> FieldSampler<'a> {
    pub fn new(c: &SpectralDensityCoefficients, grid: &'a SphericalGrid) -> Self {
        let lmax = c.n_max as usize;
        // i^l cycles 1, i, -1, -i
        let i_pow = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let moments = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(xi, w)| {
                let ys = real_spherical_harmonics_upto(lmax, xi);
                let mut phi = Complex64::new(0.0, 0.0);
                for l in 0..=lmax {
                    let mut block = 0.0;
                    for idx in (l * l)..((l + 1) * (l + 1)) {
                        block += c.coefficients[idx] * ys[idx];
                    }
                    phi += i_pow[l % 4] * block;
                }
                p_vector(xi) * (phi * *w)
            })
            .collect();
        FieldSampler { grid, moments, n_max: c.n_max }
    }

    /// Largest `|x|` this sampler's grid is rated for.
    pub fn max_radius(&self) -> f64 {
        let slack = self.grid.exact_degree as i64 - (2 * self.n_max + 8) as i64;
        slack.max(0) as f64 / 1.4
    }

    /// Value and Jacobian of the field sample at `x`.
    pub fn jet(&self, x: &Vector3<f64>) -> FieldJet {
        let mut u = Vector3::<Complex64>::zeros();
        let mut grad = Matrix3::<Complex64>::zeros();
        for (xi, m) in self.grid.nodes.iter().zip(&self.moments) {
            let phase = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2];
            let e = Complex64::from_polar(1.0, phase);
            let term = m * e;
            u += term;
            for row in 0..3 {
                // d/dx_j multiplies the integrand by i xi_j
                let ti = term[row] * Complex64::i();
                grad[(row, 0)] += ti * xi[0];
                grad[(row, 1)] += ti * xi[1];
                grad[(row, 2)] += ti * xi[2];
            }
        }
        FieldJet {
            position: *x,
            u: u.map(|z| z.re),
            grad: grad.map(|z| z.re),
        }
    }

    /// Value only (skips the Jacobian accumulation).
    pub fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut u = Vector3::<Complex64>::zeros();
        for (xi, m) in self.grid.nodes.iter().zip(&self.moments) {
            let phase = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2];
            u += m * Complex64::from_polar(1.0, phase);
        }
        u.map(|z| z.re)
    }

    /// Residual imaginary part of the quadrature sum at `x`; should vanish
    /// because the integrand is Hermitian.
    pub fn imaginary_residue(&self, x: &Vector3<f64>) -> f64 {
        let mut u = Vector3::<Complex64>::zeros();
        for (xi, m) in self.grid.nodes.iter().zip(&self.moments) {
            let phase = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2];
            u += m * Complex64::from_polar(1.0, phase);
        }
        u.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// One-shot evaluation of a field sample at `x` (value plus Jacobian).
///
/// Checks that the grid exactness covers the truncation and the evaluation
/// radius; for many evaluations of the same sample build a [`FieldSampler`].
pub fn evaluate_field(
    c: &SpectralDensityCoefficients,
    x: &Vector3<f64>,
    grid: &SphericalGrid,
) -> Result<FieldJet> {
    grid.require_degree(required_degree(c.n_max, x.norm()))?;
    Ok(FieldSampler::new(c, grid).jet(x))
}

/// Independent series-route evaluation of the field value at `x`.
///
/// Builds the scalar Helmholtz potential from `Y_{lm} j_l` blocks and applies
/// the third-order curl operator by nested central finite differences with
/// one Richardson pass. Slow by design; this is the cross-check oracle for
/// the quadrature path.
pub fn evaluate_field_series(c: &SpectralDensityCoefficients, x: &Vector3<f64>) -> Vector3<f64> {
    let u_at = |h: f64| -> Vector3<f64> {
        // inner d_1 step scales with the outer step so one Richardson pass
        // cancels the O(h^2) error of both difference levels
        let f = |y: &Vector3<f64>| scalar_f(c, y, h);
        let fxx = |i: usize| {
            let mut ep = *x;
            let mut em = *x;
            ep[i] += h;
            em[i] -= h;
            (f(&ep) - 2.0 * f(x) + f(&em)) / (h * h)
        };
        let fxy = |i: usize, j: usize| {
            let mut pp = *x;
            let mut pm = *x;
            let mut mp = *x;
            let mut mm = *x;
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h)
        };
        let fx = |i: usize| {
            let mut ep = *x;
            let mut em = *x;
            ep[i] += h;
            em[i] -= h;
            (f(&ep) - f(&em)) / (2.0 * h)
        };
        // u = -(curl curl + curl)(f, 0, 0)
        //   = (d22 f + d33 f, -d12 f - d3 f, -d13 f + d2 f)
        Vector3::new(
            fxx(1) + fxx(2),
            -fxy(0, 1) - fx(2),
            -fxy(0, 2) + fx(1),
        )
    };

    // Richardson on the second-order stencils: (4 I(h/2) - I(h)) / 3
    let h = 8e-3;
    let coarse = u_at(h);
    let fine = u_at(h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// The scalar potential with the `q(D_1)` factor applied:
/// `f = (1/8) sqrt(15/pi) (Psi + sqrt(7) d_1 Psi)`, where
/// `Psi(x) = 4 pi sum (-1)^l a_{lm} j_l(|x|) Y_{lm}(x/|x|)`.
fn scalar_f(c: &SpectralDensityCoefficients, x: &Vector3<f64>, h: f64) -> f64 {
    let mut ep = *x;
    let mut em = *x;
    ep[0] += h;
    em[0] -= h;
    let d1 = (scalar_psi(c, &ep) - scalar_psi(c, &em)) / (2.0 * h);
    0.125 * (15.0 / std::f64::consts::PI).sqrt() * (scalar_psi(c, x) + 7.0f64.sqrt() * d1)
}

fn scalar_psi(c: &SpectralDensityCoefficients, x: &Vector3<f64>) -> f64 {
    let r = x.norm();
    let lmax = c.n_max as usize;
    if r < 1e-12 {
        // only l = 0 survives at the origin
        return 4.0 * std::f64::consts::PI * c.coefficients[0]
            / (4.0 * std::f64::consts::PI).sqrt();
    }
    let dir = [x[0] / r, x[1] / r, x[2] / r];
    let ys = real_spherical_harmonics_upto(lmax, &dir);
    let mut total = 0.0;
    for l in 0..=lmax {
        let jl = spherical_bessel(l as u32, r).expect("r >= 0");
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let mut block = 0.0;
        for idx in (l * l)..((l + 1) * (l + 1)) {
            block += c.coefficients[idx] * ys[idx];
        }
        total += sign * jl * block;
    }
    4.0 * std::f64::consts::PI * total
}

/// Covariance kernel `varkappa(x)` of the ensemble, by sphere quadrature of
/// the spectral measure `p tensor conj(p) dsigma`.
pub fn covariance_kernel(x: &Vector3<f64>, grid: &SphericalGrid) -> Result<Matrix3<f64>> {
    grid.require_degree(6 + (1.4 * x.norm()).ceil() as u32)?;
    let mut acc = Matrix3::<Complex64>::zeros();
    for (xi, w) in grid.nodes.iter().zip(&grid.weights) {
        let p = p_vector(xi);
        let phase = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2];
        let e = Complex64::from_polar(*w, phase);
        for r in 0..3 {
            for s in 0..3 {
                acc[(r, s)] += p[r] * p[s].conj() * e;
            }
        }
    }
    Ok(acc.map(|z| z.re))
}

/// Monte Carlo estimate of `E[u(x) tensor u(y)]` over `m_samples` fields.
pub fn empirical_covariance(
    n_max: u32,
    m_samples: usize,
    x: &Vector3<f64>,
    y: &Vector3<f64>,
    seed: u64,
) -> Result<Matrix3<f64>> {
    if m_samples < 2 {
        return Err(Error::invalid("empirical_covariance needs at least 2 samples"));
    }
    let radius = x.norm().max(y.norm());
    let grid = crate::sphere::build_quadrature(required_degree(n_max, radius));

    use rayon::prelude::*;
    let per_sample: Vec<Matrix3<f64>> = (0..m_samples)
        .into_par_iter()
        .map(|s| {
            let sample_seed = crate::rng::keyed_word(seed, 0x5a5a_0001, s as u64);
            let c = sample_coefficients(n_max, sample_seed);
            let sampler = FieldSampler::new(&c, &grid);
            let ux = sampler.value(x);
            let uy = sampler.value(y);
            ux * uy.transpose()
        })
        .collect();

    // deterministic reduction order
    let mut total = Matrix3::<f64>::zeros();
    for m in &per_sample {
        total += m;
    }
    Ok(total / m_samples as f64)
}
