//! Spherical Bessel functions `j_l` and the cylindrical `J_0`, `J_1`.
//!
//! Upward recurrence is unstable once the order exceeds the argument, so
//! `j_l` switches to Miller's downward recurrence there, normalized against
//! `j_0`. The cylindrical pair is computed by the same downward scheme with
//! the even-order sum normalization `J_0 + 2 J_2 + 2 J_4 + ... = 1`.

use crate::error::{Error, Result};

/// Spherical Bessel function of the first kind, `j_l(r)`, finite at r = 0.
pub fn spherical_bessel(l: u32, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::invalid(format!("spherical_bessel needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(if l == 0 { 1.0 } else { 0.0 });
    }
    if r < 0.5 {
        // ascending series; the closed forms cancel catastrophically here
        // (sin r / r^2 - cos r / r loses ~eps/r^2 absolute accuracy)
        let mut lead = 1.0; // r^l / (2l+1)!!
        for k in 1..=l {
            lead *= r / (2 * k + 1) as f64;
        }
        let half_r2 = 0.5 * r * r;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=12u32 {
            term *= -half_r2 / (k * (2 * l + 2 * k + 1)) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return Ok(lead * sum);
    }

    let j0 = r.sin() / r;
    if l == 0 {
        return Ok(j0);
    }
    let j1 = r.sin() / (r * r) - r.cos() / r;
    if l == 1 {
        return Ok(j1);
    }

    if (l as f64) < r {
        // upward recurrence is stable while l < r
        let mut jm = j0;
        let mut jc = j1;
        for k in 1..l {
            let jn = (2 * k + 1) as f64 / r * jc - jm;
            jm = jc;
            jc = jn;
        }
        Ok(jc)
    } else {
        // Miller's algorithm: downward from a padded start order, then rescale
        let start = l + 26 + (2.0 * l as f64).sqrt() as u32;
        let mut fp = 0.0f64;
        let mut fc = 1e-300;
        let mut fl = 0.0;
        let mut f0 = 0.0;
        let mut f1 = 0.0;
        for k in (0..=start).rev() {
            let fm = (2 * k + 3) as f64 / r * fc - fp;
            fp = fc;
            fc = fm;
            if k == l {
                fl = fc;
            }
            if k == 1 {
                f1 = fc;
            }
            if k == 0 {
                f0 = fc;
            }
            // keep magnitudes in range
            if fc.abs() > 1e250 {
                fp /= 1e250;
                fc /= 1e250;
                fl /= 1e250;
                f1 /= 1e250;
            }
        }
        // normalize against whichever reference value is better conditioned
        let scale = if j0.abs() > j1.abs() { j0 / f0 } else { j1 / f1 };
        Ok(fl * scale)
    }
}

/// Cylindrical Bessel functions `J_0(x)` and `J_1(x)` by downward recurrence.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    let ax = x.abs();
    if ax == 0.0 {
        return (1.0, 0.0);
    }
    if ax < 1e-6 {
        let j0 = 1.0 - 0.25 * ax * ax;
        let j1 = 0.5 * ax - ax * ax * ax / 16.0;
        return (j0, if x < 0.0 { -j1 } else { j1 });
    }
    let start = (ax as u32) + 24 + (2.0 * ax).sqrt() as u32;
    let mut fp = 0.0f64;
    let mut fc = 1e-300;
    let mut sum = 0.0; // J_0 + 2 J_2 + 2 J_4 + ...
    let mut f0 = 0.0;
    let mut f1 = 0.0;
    for k in (0..=start).rev() {
        let fm = 2.0 * (k + 1) as f64 / ax * fc - fp;
        fp = fc;
        fc = fm;
        if k % 2 == 0 {
            sum += if k == 0 { fc } else { 2.0 * fc };
        }
        if k == 1 {
            f1 = fc;
        }
        if k == 0 {
            f0 = fc;
        }
        if fc.abs() > 1e250 {
            fp /= 1e250;
            fc /= 1e250;
            sum /= 1e250;
            f1 /= 1e250;
        }
    }
    let j0 = f0 / sum;
    let j1 = f1 / sum;
    (j0, if x < 0.0 { -j1 } else { j1 })
}

/// `J_0(x)`.
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j01(x).0
}

/// `J_1(x)`.
pub fn bessel_j1(x: f64) -> f64 {
    bessel_j01(x).1
}

/// `J_1'(x) = J_0(x) - J_1(x)/x`.
pub fn bessel_j1_prime(x: f64) -> f64 {
    let (j0, j1) = bessel_j01(x);
    j0 - j1 / x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_closed_form() {
        for r in [0.5, 1.0, 2.0, 7.0] {
            let v = spherical_bessel(0, r).unwrap();
            assert!((v - r.sin() / r).abs() < 1e-13, "r = {r}");
        }
        assert_eq!(spherical_bessel(0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn j1_vanishes_at_origin() {
        assert_eq!(spherical_bessel(1, 0.0).unwrap(), 0.0);
        assert_eq!(spherical_bessel(5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(spherical_bessel(2, -1.0).is_err());
    }

    /// Independent oracle: continued fraction (Lentz) for the ratio
    /// j_l/j_{l-1}, then one downward sweep pinned to j_0 = sin(r)/r.
    fn j_ratio_continued_fraction(l: u32, r: f64) -> f64 {
        // CF: j_l/j_{l-1} = 1 / ( (2l+1)/r - 1 / ( (2l+3)/r - ... ) )
        let tiny = 1e-290;
        let mut f = tiny;
        let mut c = f;
        let mut d = 0.0;
        let mut k = l;
        for _ in 0..10_000 {
            let b = (2 * k + 1) as f64 / r;
            d = b - d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b - 1.0 / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
            k += 1;
        }
        f
    }

    #[test]
    fn high_order_matches_continued_fraction_oracle() {
        let l = 20u32;
        let r = 5.0f64;
        // build j_20 from j_0 and the CF ratios
        let mut v = r.sin() / r;
        for k in 1..=l {
            v *= j_ratio_continued_fraction(k, r);
        }
        let mine = spherical_bessel(l, r).unwrap();
        assert!(
            (mine - v).abs() < 1e-11 * v.abs().max(1.0),
            "j_20(5): {mine} vs oracle {v}"
        );
    }

    #[test]
    fn three_term_recurrence_identity() {
        // j_{l-1} + j_{l+1} = (2l+1) j_l / r
        let mut r = 0.1;
        while r <= 30.0 {
            for l in 1..=25u32 {
                let a = spherical_bessel(l - 1, r).unwrap();
                let b = spherical_bessel(l + 1, r).unwrap();
                let c = spherical_bessel(l, r).unwrap();
                let lhs = a + b;
                let rhs = (2 * l + 1) as f64 * c / r;
                let scale = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    (lhs - rhs).abs() < 1e-10 * scale.max(1.0),
                    "l = {l}, r = {r}: {lhs} vs {rhs}"
                );
            }
            r += 1.37;
        }
    }

    #[test]
    fn derivative_recurrence_under_finite_differences() {
        // d/dr j_l = j_{l-1} - (l+1)/r j_l, checked by central differences
        let h = 1e-5;
        for (l, r) in [(1u32, 2.0), (3, 4.5), (8, 6.0), (12, 20.0)] {
            let d_fd = (spherical_bessel(l, r + h).unwrap() - spherical_bessel(l, r - h).unwrap())
                / (2.0 * h);
            let d_rec = spherical_bessel(l - 1, r).unwrap()
                - (l + 1) as f64 / r * spherical_bessel(l, r).unwrap();
            assert!((d_fd - d_rec).abs() < 1e-10, "l = {l}, r = {r}");
        }
    }

    #[test]
    fn cylindrical_reference_values() {
        // classical tabulated values
        let (j0, j1) = bessel_j01(1.0);
        assert!((j0 - 0.7651976865579666).abs() < 1e-14);
        assert!((j1 - 0.4400505857449335).abs() < 1e-14);
        let (j0, j1) = bessel_j01(2.4048255576957724);
        assert!(j0.abs() < 1e-13); // first zero of J_0
        assert!((j1 - 0.5191474972894669).abs() < 1e-13);
        let (j0, j1) = bessel_j01(10.0);
        assert!((j0 - (-0.2459357644513483)).abs() < 1e-13);
        assert!((j1 - 0.04347274616886144).abs() < 1e-13);
    }

    #[test]
    fn cylindrical_wronskian() {
        // J_0 J_1' - ... use J_{n+1} identity instead:
        // J_1'(x) = J_0(x) - J_1(x)/x, and Wronskian J_0 J_1' - J_0' J_1 with
        // J_0' = -J_1 gives J_0^2 + J_1^2 - J_0 J_1 / x ... check numerically
        // against central differences of J_1.
        for x in [0.7, 1.9, 2.7, 3.5, 5.0] {
            let h = 1e-6;
            let fd = (bessel_j1(x + h) - bessel_j1(x - h)) / (2.0 * h);
            assert!((fd - bessel_j1_prime(x)).abs() < 1e-9, "x = {x}");
        }
    }
}
