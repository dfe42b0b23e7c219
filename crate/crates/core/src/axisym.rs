//! The explicit axisymmetric Beltrami field with a heteroclinic cycle, and
//! the invariant-torus diagnostics built on its Poincare return map.
//!
//! In cylindrical coordinates the field is
//! `v = (d_r psi / r) E_z - (d_z psi / r) E_r + (psi / r^2) E_theta` with
//! stream function `psi = cos z + 3 r J_1(r)`. Its poloidal part is an
//! autonomous planar Hamiltonian system; the level sets of `psi` between the
//! separatrix value `c_0` and the elliptic maximum `c_0 + 2` are invariant
//! tori, which is where the rotation-number and twist estimators operate.

use crate::error::{Error, Result};
use crate::flow::{integrate_flow, integrate_to_event, Trajectory};
use crate::sphere::{bessel_j0, bessel_j1};
use nalgebra::{DVector, Vector2, Vector3};
use std::sync::OnceLock;

/// Planar domain of the reduced dynamics: -10 < z < 10, 9/10 < r < 18/5.
pub const DOMAIN_Z: (f64, f64) = (-10.0, 10.0);
pub const DOMAIN_R: (f64, f64) = (0.9, 3.6);

/// First positive zero of `J_0`, to machine precision.
pub fn j01() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        let (mut lo, mut hi) = (2.0f64, 3.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if bessel_j0(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..4 {
            // J_0' = -J_1
            x += bessel_j0(x) / bessel_j1(x);
        }
        x
    })
}

/// Separatrix level `c_0 = 3 j_{0,1} J_1(j_{0,1}) - 1`.
pub fn c0() -> f64 {
    3.0 * j01() * bessel_j1(j01()) - 1.0
}

/// Stream-function value at the elliptic centers `(0, j_{0,1})` (mod 2 pi in z).
pub fn psi_max() -> f64 {
    c0() + 2.0
}

/// Saddle exponent of the periodic orbits gamma_+- in the field's own time.
pub fn saddle_exponent() -> f64 {
    (3.0 * bessel_j1(j01()) / j01()).sqrt()
}

/// Saddle exponent of the reduced planar system (time = toroidal angle).
pub fn reduced_saddle_exponent() -> f64 {
    saddle_exponent() * j01() * j01() / c0()
}

/// Period of the circular orbits gamma_+-: angular speed there is c_0/j_{0,1}^2.
pub fn orbit_period() -> f64 {
    2.0 * std::f64::consts::PI * j01() * j01() / c0()
}

/// Stream function and its gradient `(d_z psi, d_r psi) = (-sin z, 3 r J_0(r))`.
pub fn stream_function(z: f64, r: f64) -> Result<(f64, Vector2<f64>)> {
    if r <= 0.0 {
        return Err(Error::invalid(format!("stream_function needs r > 0, got {r}")));
    }
    let value = z.cos() + 3.0 * r * bessel_j1(r);
    let grad = Vector2::new(-z.sin(), 3.0 * r * bessel_j0(r));
    Ok((value, grad))
}

/// The field in Cartesian components at `x`; errors on the symmetry axis.
pub fn axi_field(x: &Vector3<f64>) -> Result<Vector3<f64>> {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r <= 0.0 {
        return Err(Error::invalid("axi_field is singular on the z-axis"));
    }
    let z = x[2];
    let (psi, grad) = stream_function(z, r)?;
    let vz = grad[1] / r; // (d_r psi)/r
    let vr = -grad[0] / r; // -(d_z psi)/r
    let vth = psi / (r * r); // coefficient of E_theta = (-x2, x1, 0)
    Ok(Vector3::new(
        vr * x[0] / r - vth * x[1],
        vr * x[1] / r + vth * x[0],
        vz,
    ))
}

/// The two hyperbolic fixed points `p_+- = (+-pi, j_{0,1})` of the reduced system.
pub fn fixed_points() -> [(f64, f64); 2] {
    [(std::f64::consts::PI, j01()), (-std::f64::consts::PI, j01())]
}

/// Eigenvalues of the normal variational matrix at gamma_+-:
/// `A = [[0, 3 J_0'(j01)], [-1/j01, 0]]`, a saddle pair `+-lambda`.
pub fn monodromy_eigenvalues() -> (f64, f64) {
    let lambda = saddle_exponent();
    (lambda, -lambda)
}

/// Right-hand side of the 3-D field with a domain guard for flow work.
pub fn axi_rhs(_t: f64, y: &DVector<f64>) -> Option<DVector<f64>> {
    let x = Vector3::new(y[0], y[1], y[2]);
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if !(0.05..=50.0).contains(&r) || x[2].abs() > 50.0 {
        return None;
    }
    let v = axi_field(&x).ok()?;
    Some(DVector::from_vec(vec![v[0], v[1], v[2]]))
}

/// 3-D field state augmented with the unwrapped toroidal angle and the
/// poloidal arc length: `(x, y, z, theta, s)`.
fn augmented_rhs(_t: f64, y: &DVector<f64>) -> Option<DVector<f64>> {
    let x = Vector3::new(y[0], y[1], y[2]);
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r = r2.sqrt();
    if !(0.05..=50.0).contains(&r) || x[2].abs() > 50.0 {
        return None;
    }
    let v = axi_field(&x).ok()?;
    let theta_dot = (x[0] * v[1] - x[1] * v[0]) / r2;
    // poloidal projection speed in the (z, r) half-plane
    let r_dot = (x[0] * v[0] + x[1] * v[1]) / r;
    let s_dot = (v[2] * v[2] + r_dot * r_dot).sqrt();
    Some(DVector::from_vec(vec![v[0], v[1], v[2], theta_dot, s_dot]))
}

/// Chart on a neighborhood of the invariant torus `{psi = psi0}`:
/// `rho = psi - psi0`, `theta1` = arc-length fraction along the level curve,
/// `theta2` = the toroidal angle.
pub struct LevelChart {
    pub psi0: f64,
    curve: Trajectory,
    /// cumulative poloidal arc length at curve sample times
    arc: Vec<f64>,
    pub total_length: f64,
    pub poloidal_period: f64,
}

impl LevelChart {
    /// Build the chart for a regular torus level `psi0 in (c_0, c_0 + 2)`.
    pub fn new(psi0: f64) -> Result<Self> {
        let c = c0();
        if psi0 <= c || psi0 >= psi_max() {
            return Err(Error::invalid(format!(
                "psi0 = {psi0} is not a torus level; regular levels lie in ({c}, {})",
                psi_max()
            )));
        }
        // base point (0, r_s) on the outer branch: psi(0, r) decreasing in r past j01
        let (mut lo, mut hi) = (j01(), DOMAIN_R.1);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (p, _) = stream_function(0.0, mid)?;
            if p > psi0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r_s = 0.5 * (lo + hi);

        // trace one poloidal loop of the reduced flow, tracking the winding
        // angle around the elliptic center and the accumulated arc length
        let center = (0.0, j01());
        let rhs = move |_t: f64, y: &DVector<f64>| -> Option<DVector<f64>> {
            let (z, r) = (y[0], y[1]);
            if !(DOMAIN_Z.0..=DOMAIN_Z.1).contains(&z) || r < 0.2 || r > 10.0 {
                return None;
            }
            let zdot = 3.0 * bessel_j0(r);
            let rdot = z.sin() / r;
            let dz = z - center.0;
            let dr = r - center.1;
            let alpha_dot = (dz * rdot - dr * zdot) / (dz * dz + dr * dr);
            let s_dot = (zdot * zdot + rdot * rdot).sqrt();
            Some(DVector::from_vec(vec![zdot, rdot, alpha_dot, s_dot]))
        };
        // probe the winding direction from the initial alpha_dot
        let y0 = DVector::from_vec(vec![0.0, r_s, 0.0, 0.0]);
        let f0 = rhs(0.0, &y0).ok_or_else(|| Error::numerical("bad curve start"))?;
        let orient = f0[2].signum();
        let (t_period, _) = integrate_to_event(
            &rhs,
            &y0,
            0.0,
            2000.0,
            1e-12,
            |_t, y| orient * y[2] - 2.0 * std::f64::consts::PI,
            1e-12,
        )?;
        let curve = integrate_flow(&rhs, &y0, 0.0, t_period, 1e-12)?;
        let arc: Vec<f64> = curve.states.iter().map(|s| s[3]).collect();
        let total_length = *arc.last().unwrap();
        Ok(LevelChart { psi0, curve, arc, total_length, poloidal_period: t_period })
    }

    /// Point of the level curve at arc-length fraction `theta1 in [0, 1)`.
    pub fn point(&self, theta1: f64) -> (f64, f64) {
        let target = theta1.rem_euclid(1.0) * self.total_length;
        // locate the bracketing samples in arc length, refine in time
        let mut lo = 0;
        let mut hi = self.arc.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.arc[mid] <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = self.curve.times[lo];
        for _ in 0..60 {
            let y = self.curve.sample(t);
            let err = y[3] - target;
            let sdot = {
                let zdot = 3.0 * bessel_j0(y[1]);
                let rdot = y[0].sin() / y[1];
                (zdot * zdot + rdot * rdot).sqrt()
            };
            let dt = -err / sdot;
            t += dt;
            if dt.abs() < 1e-14 {
                break;
            }
        }
        let y = self.curve.sample(t);
        (y[0], y[1])
    }

    /// Chart coordinates of a nearby half-plane point.
    pub fn coords(&self, z: f64, r: f64) -> Result<(f64, f64)> {
        let (psi, _) = stream_function(z, r)?;
        let rho = psi - self.psi0;
        // nearest curve point: coarse scan, then Newton on the tangency condition
        let mut best_i = 0;
        let mut best_d = f64::INFINITY;
        for (i, y) in self.curve.states.iter().enumerate() {
            let d = (y[0] - z).powi(2) + (y[1] - r).powi(2);
            if d < best_d {
                best_d = d;
                best_i = i;
            }
        }
        let mut t = self.curve.times[best_i];
        for _ in 0..60 {
            let y = self.curve.sample(t);
            let zdot = 3.0 * bessel_j0(y[1]);
            let rdot = y[0].sin() / y[1];
            let h = (y[0] - z) * zdot + (y[1] - r) * rdot;
            let speed2 = zdot * zdot + rdot * rdot;
            let dt = -h / speed2; // ignores curvature; fine this close
            t += dt;
            if dt.abs() < 1e-13 {
                break;
            }
        }
        let y = self.curve.sample(t);
        Ok((rho, (y[3] / self.total_length).rem_euclid(1.0)))
    }

    /// Half-plane point with chart coordinates `(rho, theta1)`, reached from
    /// the curve by a Newton walk along the psi-gradient.
    pub fn point_off(&self, rho: f64, theta1: f64) -> Result<(f64, f64)> {
        let (mut z, mut r) = self.point(theta1);
        let target = self.psi0 + rho;
        for _ in 0..50 {
            let (psi, grad) = stream_function(z, r)?;
            let err = psi - target;
            if err.abs() < 1e-14 {
                break;
            }
            let g2 = grad.norm_squared();
            z -= err * grad[0] / g2;
            r -= err * grad[1] / g2;
        }
        Ok((z, r))
    }

    /// Area-form factor on the section at `rho = 0`:
    /// `F(0, theta1) = L psi0 / (r |grad psi|)` at the curve point.
    pub fn f_factor(&self, theta1: f64) -> Result<f64> {
        let (z, r) = self.point(theta1);
        let (_, grad) = stream_function(z, r)?;
        Ok(self.total_length * self.psi0 / (r * grad.norm()))
    }
}

/// One sample of the return map.
#[derive(Debug, Clone, Copy)]
pub struct SectionSample {
    pub rho: f64,
    pub theta1: f64,
    pub pi1: f64,
    pub pi2: f64,
    /// Lifted theta1 advance accumulated along the orbit (arc length / L).
    pub lift: f64,
    pub transversal: bool,
}

/// Integrate the full 3-D field from the section point `(rho, theta1)` until
/// the toroidal angle has advanced by `2 pi`, and express the landing point
/// in chart coordinates again.
pub fn return_map(chart: &LevelChart, rho: f64, theta1: f64, tol: f64) -> Result<SectionSample> {
    let (z, r) = chart.point_off(rho, theta1)?;
    let y0 = DVector::from_vec(vec![r, 0.0, z, 0.0, 0.0]);
    let two_pi = 2.0 * std::f64::consts::PI;
    let (_tc, yc) = integrate_to_event(
        &augmented_rhs,
        &y0,
        0.0,
        5000.0,
        tol,
        |_t, y| y[3] - two_pi,
        1e-10,
    )?;
    let r1 = (yc[0] * yc[0] + yc[1] * yc[1]).sqrt();
    let z1 = yc[2];
    let (pi1, pi2) = chart.coords(z1, r1)?;
    let v = axi_field(&Vector3::new(yc[0], yc[1], yc[2]))?;
    let theta_dot = (yc[0] * v[1] - yc[1] * v[0]) / (r1 * r1);
    Ok(SectionSample {
        rho,
        theta1,
        pi1,
        pi2,
        lift: yc[4] / chart.total_length,
        transversal: theta_dot > 1e-10,
    })
}

/// Sampled return-map data for a batch of section points.
pub fn poincare_map(
    chart: &LevelChart,
    inputs: &[(f64, f64)],
    iterates: u32,
    tol: f64,
) -> Result<Vec<Vec<SectionSample>>> {
    inputs
        .iter()
        .map(|&(rho, theta1)| {
            let mut orbit = Vec::with_capacity(iterates as usize);
            let (mut rho_c, mut th_c) = (rho, theta1);
            for _ in 0..iterates {
                let s = return_map(chart, rho_c, th_c, tol)?;
                rho_c = s.pi1;
                th_c = s.pi2;
                orbit.push(s);
            }
            Ok(orbit)
        })
        .collect()
}

/// Rotation-number estimate with its observed convergence gap.
#[derive(Debug, Clone, Copy)]
pub struct RotationEstimate {
    pub omega: f64,
    /// |estimate(n) - estimate(n/2)|; flagged non-convergent above 1e-5.
    pub convergence_gap: f64,
    pub converged: bool,
    pub iterates: u32,
}

/// Exponential bump weight for the weighted Birkhoff average.
fn bump(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / (x * (1.0 - x))).exp()
    }
}

fn weighted_average(increments: &[f64]) -> f64 {
    let n = increments.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, dx) in increments.iter().enumerate() {
        let w = bump((j as f64 + 0.5) / n as f64);
        num += w * dx;
        den += w;
    }
    num / den
}

/// Lifted theta1 increments over `iterates` returns, starting on the torus.
fn lift_increments(
    chart: &LevelChart,
    theta1_start: f64,
    iterates: u32,
    tol: f64,
) -> Result<Vec<f64>> {
    let (z, r) = chart.point(theta1_start);
    let mut y = DVector::from_vec(vec![r, 0.0, z, 0.0, 0.0]);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = 0.0;
    let mut s_prev = 0.0;
    let mut out = Vec::with_capacity(iterates as usize);
    for k in 1..=iterates {
        let target = two_pi * k as f64;
        let (tc, yc) = integrate_to_event(
            &augmented_rhs,
            &y,
            t,
            5000.0,
            tol,
            |_t, st| st[3] - target,
            1e-10,
        )?;
        out.push((yc[4] - s_prev) / chart.total_length);
        s_prev = yc[4];
        t = tc;
        y = yc;
    }
    Ok(out)
}

/// Rotation number of the invariant torus at level `psi0`, by a weighted
/// Birkhoff average of lifted theta1 increments of the return map.
pub fn rotation_number(psi0: f64, iterates: u32, tol: f64) -> Result<RotationEstimate> {
    if iterates < 8 {
        return Err(Error::invalid("rotation_number needs at least 8 iterates"));
    }
    let chart = LevelChart::new(psi0)?;
    let inc = lift_increments(&chart, 0.0, iterates, tol)?;
    let omega = weighted_average(&inc);
    let half = weighted_average(&inc[..inc.len() / 2]);
    let gap = (omega - half).abs();
    Ok(RotationEstimate { omega, convergence_gap: gap, converged: gap <= 1e-5, iterates })
}

/// Twist estimate with the Richardson gap of the rho-differencing.
#[derive(Debug, Clone, Copy)]
pub struct TwistEstimate {
    pub tau: f64,
    pub richardson_gap: f64,
}

/// Twist of the invariant torus at `psi0`:
/// `tau = int_0^1 d_rho pi2(0, theta1) / F(0, theta1) dtheta1`,
/// with the radial derivative by centered differences in `rho`.
pub fn estimate_twist(psi0: f64, tol: f64) -> Result<TwistEstimate> {
    let chart = LevelChart::new(psi0)?;
    let nodes = 24;
    let d_rho = 1e-4;

    let tau_at = |delta: f64| -> Result<f64> {
        let mut total = 0.0;
        for i in 0..nodes {
            let theta1 = i as f64 / nodes as f64;
            let plus = return_map(&chart, delta, theta1, tol)?;
            let minus = return_map(&chart, -delta, theta1, tol)?;
            // unwrap the angular difference to (-1/2, 1/2)
            let mut dpi2 = plus.pi2 - minus.pi2;
            dpi2 -= dpi2.round();
            let deriv = dpi2 / (2.0 * delta);
            total += deriv / chart.f_factor(theta1)?;
        }
        Ok(total / nodes as f64)
    };

    let coarse = tau_at(d_rho)?;
    let fine = tau_at(0.5 * d_rho)?;
    let tau = (4.0 * fine - coarse) / 3.0;
    Ok(TwistEstimate { tau, richardson_gap: (fine - coarse).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn j01_reference_value() {
        assert!((j01() - 2.404825557695773).abs() < 1e-12);
        assert!(bessel_j0(j01()).abs() < 1e-14);
    }

    #[test]
    fn stream_function_critical_point() {
        let (value, grad) = stream_function(std::f64::consts::PI, j01()).unwrap();
        let c0_expect = 3.0 * j01() * bessel_j1(j01()) - 1.0;
        assert!((value - c0_expect).abs() < 1e-14);
        assert!(grad.norm() < 1e-10);
        // reference numeric value of c_0
        assert!((value - 2.7453775090865196).abs() < 1e-12);
    }

    #[test]
    fn stream_gradient_at_z_zero() {
        let (_, grad) = stream_function(0.0, 1.7).unwrap();
        assert_eq!(grad[0], 0.0);
    }

    #[test]
    fn stream_gradient_matches_finite_differences() {
        let mut rng = CounterRng::new(3, 0);
        // h balances truncation (h^2) against the ~1e-15 relative noise of
        // the Bessel evaluations amplified by 1/h
        let h = 1e-5;
        for _ in 0..100 {
            let z = rng.next_range(DOMAIN_Z.0, DOMAIN_Z.1);
            let r = rng.next_range(DOMAIN_R.0, DOMAIN_R.1);
            let (_, grad) = stream_function(z, r).unwrap();
            let dz = (stream_function(z + h, r).unwrap().0 - stream_function(z - h, r).unwrap().0)
                / (2.0 * h);
            let dr = (stream_function(z, r + h).unwrap().0 - stream_function(z, r - h).unwrap().0)
                / (2.0 * h);
            assert!((grad[0] - dz).abs() < 1e-9, "z-gradient at ({z}, {r})");
            assert!((grad[1] - dr).abs() < 1e-9, "r-gradient at ({z}, {r})");
        }
    }

    #[test]
    fn field_on_circular_orbit_is_azimuthal() {
        // v(p_+-) = (c_0 / j01^2) E_theta
        let x = Vector3::new(j01(), 0.0, std::f64::consts::PI);
        let v = axi_field(&x).unwrap();
        let coeff = c0() / (j01() * j01());
        // E_theta at (j01, 0, z) is (0, j01, 0)
        assert!((v - Vector3::new(0.0, coeff * j01(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn on_axis_rejected() {
        assert!(axi_field(&Vector3::new(0.0, 0.0, 1.0)).is_err());
        assert!(stream_function(1.0, 0.0).is_err());
        assert!(stream_function(1.0, -1.0).is_err());
    }

    #[test]
    fn field_is_beltrami_by_finite_differences() {
        let mut rng = CounterRng::new(4, 0);
        let h = 1e-4;
        for _ in 0..50 {
            let z = rng.next_range(-9.0, 9.0);
            let r = rng.next_range(1.0, 3.5);
            let th = rng.next_range(0.0, 6.28);
            let x = Vector3::new(r * th.cos(), r * th.sin(), z);
            // Richardson-extrapolated central-difference curl
            let curl_at = |h: f64| {
                let mut j = nalgebra::Matrix3::<f64>::zeros();
                for col in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[col] += h;
                    xm[col] -= h;
                    let vp = axi_field(&xp).unwrap();
                    let vm = axi_field(&xm).unwrap();
                    for row in 0..3 {
                        j[(row, col)] = (vp[row] - vm[row]) / (2.0 * h);
                    }
                }
                Vector3::new(
                    j[(2, 1)] - j[(1, 2)],
                    j[(0, 2)] - j[(2, 0)],
                    j[(1, 0)] - j[(0, 1)],
                )
            };
            let curl = (4.0 * curl_at(h / 2.0) - curl_at(h)) / 3.0;
            let v = axi_field(&x).unwrap();
            assert!(
                (curl - v).norm() / v.norm() < 1e-7,
                "Beltrami residual {} at ({z}, {r})",
                (curl - v).norm() / v.norm()
            );
        }
    }

    #[test]
    fn field_annihilates_stream_gradient() {
        let mut rng = CounterRng::new(5, 0);
        for _ in 0..50 {
            let z = rng.next_range(-9.0, 9.0);
            let r = rng.next_range(1.0, 3.5);
            let th = rng.next_range(0.0, 6.28);
            let x = Vector3::new(r * th.cos(), r * th.sin(), z);
            let v = axi_field(&x).unwrap();
            let (_, g) = stream_function(z, r).unwrap();
            // grad psi in Cartesian
            let gp = Vector3::new(g[1] * x[0] / r, g[1] * x[1] / r, g[0]);
            assert!(v.dot(&gp).abs() < 1e-10, "v . grad psi = {}", v.dot(&gp));
        }
    }

    #[test]
    fn fixed_points_and_monodromy() {
        let [(z1, r1), (z2, r2)] = fixed_points();
        assert!((r1 - 2.4048).abs() < 1e-4 && (r2 - 2.4048).abs() < 1e-4);
        assert_eq!(z1, -z2);
        let (_, g1) = stream_function(z1, r1).unwrap();
        let (_, g2) = stream_function(z2, r2).unwrap();
        assert!(g1.norm() < 1e-10 && g2.norm() < 1e-10);
        let (value1, _) = stream_function(z1, r1).unwrap();
        let (value2, _) = stream_function(z2, r2).unwrap();
        assert_eq!(value1, value2);

        let (lp, lm) = monodromy_eigenvalues();
        assert!(lp > 0.0 && lm < 0.0 && (lp + lm).abs() < 1e-15);
        // derived frozen value of sqrt(3 J_1(j01)/j01)
        assert!((lp - 0.8047559944042174).abs() < 1e-12);
        // determinant 3 J_0'(j01)/j01 < 0
        let det = 3.0 * (-bessel_j1(j01())) / j01();
        assert!((lp * lm - det).abs() < 1e-12);
    }

    #[test]
    fn closed_orbit_returns_after_one_period() {
        let x0 = DVector::from_vec(vec![j01(), 0.0, std::f64::consts::PI]);
        let traj = integrate_flow(&axi_rhs, &x0, 0.0, orbit_period(), 1e-12).unwrap();
        let err = (traj.end_state() - &x0).norm();
        assert!(err < 1e-6, "period return error {err}");
        assert!((orbit_period() - 13.235640253775136).abs() < 1e-10);
    }

    #[test]
    fn psi_is_conserved_along_trajectories() {
        let x0 = DVector::from_vec(vec![2.9, 0.0, 0.3]);
        let (psi0, _) = stream_function(0.3, 2.9).unwrap();
        let traj = integrate_flow(&axi_rhs, &x0, 0.0, 100.0, 1e-10).unwrap();
        assert!(!traj.domain_exit);
        let mut worst: f64 = 0.0;
        for st in traj.states.iter().step_by(7) {
            let r = (st[0] * st[0] + st[1] * st[1]).sqrt();
            let (psi, _) = stream_function(st[2], r).unwrap();
            worst = worst.max((psi - psi0).abs());
        }
        assert!(worst < 1e-8, "psi drift {worst}");
    }

    #[test]
    fn monodromy_matches_variational_flow_oracle() {
        // integrate eta' = A(t) eta along gamma_+ for one period; A is the
        // in-plane Jacobian of (v_z, v_r) = (3 J_0(r), sin(z)/r)
        let h = 1e-6;
        let jac = |z: f64, r: f64| {
            let dvz_dz = 0.0;
            let dvz_dr = 3.0 * (bessel_j0(r + h) - bessel_j0(r - h)) / (2.0 * h);
            let dvr_dz = z.cos() / r;
            let dvr_dr = -z.sin() / (r * r);
            [[dvz_dz, dvz_dr], [dvr_dz, dvr_dr]]
        };
        // the base orbit sits at the fixed point of the reduced plane, so the
        // matrix is constant; integrate the two fundamental columns anyway
        let (zp, rp) = fixed_points()[0];
        let rhs = move |_t: f64, y: &DVector<f64>| {
            let a = jac(zp, rp);
            Some(DVector::from_vec(vec![
                a[0][0] * y[0] + a[0][1] * y[1],
                a[1][0] * y[0] + a[1][1] * y[1],
                a[0][0] * y[2] + a[0][1] * y[3],
                a[1][0] * y[2] + a[1][1] * y[3],
            ]))
        };
        let t_per = orbit_period();
        let y0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let traj = integrate_flow(&rhs, &y0, 0.0, t_per, 1e-12).unwrap();
        let m = traj.end_state();
        let mono = nalgebra::Matrix2::new(m[0], m[2], m[1], m[3]);
        let eig = mono.complex_eigenvalues();
        let mut mults: Vec<f64> = eig.iter().map(|c| c.re).collect();
        mults.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lam_minus = mults[0].ln() / t_per;
        let lam_plus = mults[1].ln() / t_per;
        let (lp, lm) = monodromy_eigenvalues();
        assert!((lam_plus - lp).abs() < 1e-4, "{lam_plus} vs {lp}");
        assert!((lam_minus - lm).abs() < 1e-4, "{lam_minus} vs {lm}");
    }

    #[test]
    fn return_map_fixes_the_invariant_circle() {
        let psi0 = c0() + 1.2;
        let chart = LevelChart::new(psi0).unwrap();
        for theta1 in [0.0, 0.3, 0.77] {
            let s = return_map(&chart, 0.0, theta1, 1e-12).unwrap();
            assert!(s.transversal);
            assert!(s.pi1.abs() < 1e-8, "rho should stay 0, got {}", s.pi1);
            // pi2 - theta1 should equal the lift fraction modulo 1
            let mut d = s.pi2 - theta1 - s.lift;
            d -= d.round();
            assert!(d.abs() < 1e-8, "lift mismatch {d}");
        }
    }

    #[test]
    fn separatrix_level_rejected() {
        assert!(LevelChart::new(c0()).is_err());
        assert!(LevelChart::new(psi_max() + 0.1).is_err());
        assert!(rotation_number(c0(), 100, 1e-12).is_err());
    }
}
