//! Real spherical harmonics via normalized associated-Legendre recurrences.
//!
//! The normalization is carried inside the recurrence, so no factorials are
//! formed and degrees well beyond l = 40 stay in range. Conventions: the
//! family is orthonormal in L^2 of the sphere, `Y_{00} = 1/sqrt(4 pi)`, and
//! `Y_{lm}(-xi) = (-1)^l Y_{lm}(xi)`.

use super::check_unit;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-8;

/// Normalized associated Legendre values `S_{l}^{m}(cos theta)` for all
/// `m <= l <= lmax` at fixed colatitude, written into a packed table.
///
/// `S_l^m = sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!) * P_l^m` with the
/// Condon-Shortley phase included.
fn legendre_table(lmax: usize, cos_t: f64, sin_t: f64) -> Vec<f64> {
    let n = (lmax + 1) * (lmax + 2) / 2;
    let mut s = vec![0.0; n];
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;

    s[0] = 0.5 / std::f64::consts::PI.sqrt(); // S_0^0 = 1/sqrt(4 pi)
    for m in 1..=lmax {
        // diagonal: S_m^m = -sqrt(1 + 1/(2m)) sin(theta) S_{m-1}^{m-1}
        s[idx(m, m)] = -(1.0 + 0.5 / m as f64).sqrt() * sin_t * s[idx(m - 1, m - 1)];
    }
    for m in 0..lmax {
        // first subdiagonal: S_{m+1}^m = sqrt(2m+3) cos(theta) S_m^m
        s[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * cos_t * s[idx(m, m)];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            s[idx(l, m)] = a * (cos_t * s[idx(l - 1, m)] - b * s[idx(l - 2, m)]);
        }
    }
    s
}

/// Real spherical harmonic `Y_{lm}` at a unit vector.
///
/// `m > 0` couples to `cos(m phi)`, `m < 0` to `sin(|m| phi)`.
pub fn real_spherical_harmonic(l: u32, m: i32, xi: &[f64; 3]) -> Result<f64> {
    if m.unsigned_abs() > l {
        return Err(Error::invalid(format!("order m = {m} out of range for degree l = {l}")));
    }
    check_unit(xi, UNIT_TOL)?;
    let table = real_spherical_harmonics_upto(l as usize, xi);
    let base = (l as usize) * (l as usize); // offset of degree-l block, m = -l first
    Ok(table[base + (m + l as i32) as usize])
}

/// All real harmonics with degree `l <= lmax` at one unit vector.
///
/// Layout: degree blocks in order, each block running m = -l..=l, so the
/// value of `Y_{lm}` sits at `l^2 + (m + l)`. This is the bulk evaluator the
/// samplers use; the scalar wrapper above just indexes into it.
pub fn real_spherical_harmonics_upto(lmax: usize, xi: &[f64; 3]) -> Vec<f64> {
    let cos_t = xi[2].clamp(-1.0, 1.0);
    let sin_t = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
    let phi = xi[1].atan2(xi[0]);

    let s = legendre_table(lmax, cos_t, sin_t);
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let sqrt2 = std::f64::consts::SQRT_2;

    let mut out = vec![0.0; (lmax + 1) * (lmax + 1)];
    // cos(m phi), sin(m phi) by the angle-addition recurrence
    let (cp, sp) = (phi.cos(), phi.sin());
    let mut cos_m = vec![1.0; lmax + 1];
    let mut sin_m = vec![0.0; lmax + 1];
    for m in 1..=lmax {
        cos_m[m] = cos_m[m - 1] * cp - sin_m[m - 1] * sp;
        sin_m[m] = sin_m[m - 1] * cp + cos_m[m - 1] * sp;
    }

    for l in 0..=lmax {
        let base = l * l + l; // position of m = 0
        out[base] = s[idx(l, 0)];
        for m in 1..=l {
            let v = sqrt2 * s[idx(l, m)];
            out[base + m] = v * cos_m[m];
            out[base - m] = v * sin_m[m];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::sphere::build_quadrature;
    use std::f64::consts::PI;

    fn random_unit(rng: &mut CounterRng) -> [f64; 3] {
        loop {
            let v = [
                rng.next_range(-1.0, 1.0),
                rng.next_range(-1.0, 1.0),
                rng.next_range(-1.0, 1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 && n < 1.0 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }

    #[test]
    fn constant_harmonic() {
        let xi = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        let y = real_spherical_harmonic(0, 0, &xi).unwrap();
        assert!((y - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn y21_normalized_under_quadrature() {
        let grid = build_quadrature(8);
        let v = grid.integrate(|xi| {
            let y = real_spherical_harmonic(2, 1, xi).unwrap();
            y * y
        });
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn parity_identity() {
        let mut rng = CounterRng::new(71, 0);
        for _ in 0..100 {
            let xi = random_unit(&mut rng);
            let neg = [-xi[0], -xi[1], -xi[2]];
            let a = real_spherical_harmonic(3, 2, &xi).unwrap();
            let b = real_spherical_harmonic(3, 2, &neg).unwrap();
            assert!((b + a).abs() < 1e-12, "Y_32 parity: {a} vs {b}");
            for (l, m) in [(1, -1), (2, 0), (4, 3), (5, -4), (7, 7)] {
                let a = real_spherical_harmonic(l, m, &xi).unwrap();
                let b = real_spherical_harmonic(l, m, &neg).unwrap();
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                assert!((b - sign * a).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn gram_matrix_is_identity_up_to_degree_8() {
        let lmax = 8usize;
        let grid = build_quadrature(2 * lmax as u32);
        let dim = (lmax + 1) * (lmax + 1);
        let mut gram = vec![vec![0.0; dim]; dim];
        for (node, w) in grid.nodes.iter().zip(&grid.weights) {
            let ys = real_spherical_harmonics_upto(lmax, node);
            for i in 0..dim {
                for j in i..dim {
                    gram[i][j] += w * ys[i] * ys[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i][j] - expect).abs() < 1e-9,
                    "gram[{i}][{j}] = {}",
                    gram[i][j]
                );
            }
        }
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(real_spherical_harmonic(2, 3, &[0.0, 0.0, 1.0]).is_err());
        assert!(real_spherical_harmonic(2, 1, &[0.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn explicit_low_degree_values() {
        // Y_1^0 = sqrt(3/4pi) cos(theta), Y_1^1 ~ cos(phi) component
        let xi = [0.6, 0.0, 0.8];
        let y10 = real_spherical_harmonic(1, 0, &xi).unwrap();
        assert!((y10 - (3.0 / (4.0 * PI)).sqrt() * 0.8).abs() < 1e-14);
        let y11 = real_spherical_harmonic(1, 1, &xi).unwrap();
        assert!((y11 - (-(3.0 / (8.0 * PI)).sqrt() * 0.6 * std::f64::consts::SQRT_2)).abs() < 1e-14);
    }
}
