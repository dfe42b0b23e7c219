//! Melnikov analysis of the perturbed axisymmetric field: separatrices of the
//! reduced planar system, the splitting coefficients, and a direct numerical
//! check of the first-order splitting prediction.
//!
//! The reduced system (time = toroidal angle) is
//! `z' = 3 r^2 J_0(r)/psi`, `r' = r sin(z)/psi`, Hamiltonian for
//! `H = log psi` with symplectic form `r^{-1} dz ^ dr`. Its separatrices are
//! the two branches of the level curve `psi = c_0` joining the saddles
//! `(-pi, j01)` and `(pi, j01)`.
//!
//! Shooting along a separatrix is numerically hopeless near the saddles (the
//! orbit escapes through them once roundoff exceeds the exponentially small
//! distance), so the orbit is built in two phases: adaptive integration while
//! the state is farther than a switch radius from the saddle, then the
//! linearized stable-manifold decay `d(t) = d_switch e^{-lambda (t - t_switch)}`
//! for the remaining window.

use crate::axisym::{c0, j01, reduced_saddle_exponent, DOMAIN_R, DOMAIN_Z};
use crate::error::{Error, Result};
use crate::flow::{integrate_flow, integrate_to_event, Trajectory};
use crate::sphere::{bessel_j0, bessel_j1, bessel_j1_prime};
use nalgebra::{DVector, Matrix2, Vector2};

/// Distance from the saddle at which integration hands over to the
/// linearized tail. The tail's psi error is O(delta^2) ~ 1e-10.
const SWITCH_RADIUS: f64 = 1e-5;

/// Reduced planar vector field `(3 r^2 J_0(r)/psi, r sin(z)/psi)`.
pub fn reduced_rhs(z: f64, r: f64) -> Result<Vector2<f64>> {
    if !(DOMAIN_Z.0..=DOMAIN_Z.1).contains(&z) || !(DOMAIN_R.0..=DOMAIN_R.1).contains(&r) {
        return Err(Error::invalid(format!("({z}, {r}) is outside the planar domain")));
    }
    let psi = z.cos() + 3.0 * r * bessel_j1(r);
    Ok(Vector2::new(
        3.0 * r * r * bessel_j0(r) / psi,
        r * z.sin() / psi,
    ))
}

/// The Beltrami perturbation in cylindrical components `(w_z, w_r, w_theta)`:
/// `(J_1(r) sin(theta), J_1(r) cos(theta)/r, -J_1'(r) sin(theta)/r)`.
pub fn perturbation_w(z: f64, r: f64, theta: f64) -> Result<(f64, f64, f64)> {
    let _ = z;
    if r <= 0.0 {
        return Err(Error::invalid(format!("perturbation_w needs r > 0, got {r}")));
    }
    let j1 = bessel_j1(r);
    Ok((
        j1 * theta.sin(),
        j1 * theta.cos() / r,
        -bessel_j1_prime(r) * theta.sin() / r,
    ))
}

/// Radii `r_1 < j01 < r_2` where the separatrix level crosses `z = 0`,
/// i.e. the roots of `1 + 3 r J_1(r) = c_0` on either side of `j01`.
pub fn separatrix_radii() -> (f64, f64) {
    let level = c0() - 1.0;
    let f = |r: f64| 3.0 * r * bessel_j1(r) - level;
    let bisect = |mut lo: f64, mut hi: f64| {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (bisect(DOMAIN_R.0, j01()), bisect(j01(), DOMAIN_R.1))
}

/// Time-parametrized heteroclinic orbit of one separatrix branch.
#[derive(Debug, Clone)]
pub struct SeparatrixOrbit {
    /// 1 = inner branch (r < j01), 2 = outer branch (r > j01).
    pub branch: u8,
    pub initial_r: f64,
    pub t_max: f64,
    /// `(t, Z(t), R(t))` on a uniform grid over `[-t_max, t_max]`.
    pub samples: Vec<(f64, f64, f64)>,
    /// Worst `|psi - c_0|` over the stored samples.
    pub hamiltonian_drift: f64,
    forward: OrbitHalf,
    backward: OrbitHalf,
}

#[derive(Debug, Clone)]
struct OrbitHalf {
    traj: Trajectory,
    t_switch: f64,
    /// saddle the half-orbit limits to and the offset at the switch time
    saddle_z: f64,
    offset: Vector2<f64>,
}

impl OrbitHalf {
    fn state(&self, t_abs: f64) -> (f64, f64) {
        if t_abs <= self.t_switch {
            let sgn = self.traj.end_time().signum();
            let y = self.traj.sample(sgn * t_abs);
            (y[0], y[1])
        } else {
            let decay = (-reduced_saddle_exponent() * (t_abs - self.t_switch)).exp();
            (
                self.saddle_z + self.offset[0] * decay,
                j01() + self.offset[1] * decay,
            )
        }
    }
}

fn reduced_rhs_dv(_t: f64, y: &DVector<f64>) -> Option<DVector<f64>> {
    let v = reduced_rhs(y[0], y[1]).ok()?;
    Some(DVector::from_vec(vec![v[0], v[1]]))
}

fn integrate_half(r_k: f64, sign: f64, t_max: f64, tol: f64) -> Result<OrbitHalf> {
    let pi = std::f64::consts::PI;
    // distance to the nearer saddle; crossing SWITCH_RADIUS fires the event
    let event = move |_t: f64, y: &DVector<f64>| {
        let dz = (y[0] - pi).abs().min((y[0] + pi).abs());
        let dr = y[1] - j01();
        SWITCH_RADIUS - (dz * dz + dr * dr).sqrt()
    };
    let y0 = DVector::from_vec(vec![0.0, r_k]);
    // run the event search on the time-reversed field for the backward half
    let rhs = move |_t: f64, y: &DVector<f64>| {
        let v = reduced_rhs(y[0], y[1]).ok()?;
        Some(DVector::from_vec(vec![sign * v[0], sign * v[1]]))
    };
    let (t_sw, y_sw) = integrate_to_event(&rhs, &y0, 0.0, t_max, tol, event, 1e-12)?;
    let traj = integrate_flow(&reduced_rhs_dv, &y0, 0.0, sign * t_sw, tol)?;
    let yend = traj.end_state();
    let saddle_z = if (yend[0] - pi).abs() < (yend[0] + pi).abs() { pi } else { -pi };
    let offset = Vector2::new(y_sw[0] - saddle_z, y_sw[1] - j01());
    Ok(OrbitHalf { traj, t_switch: t_sw, saddle_z, offset })
}

impl SeparatrixOrbit {
    /// Integrate branch `k` out to `+-t_max` at tolerance `tol`.
    pub fn compute(k: u8, t_max: f64, tol: f64) -> Result<Self> {
        if !(k == 1 || k == 2) {
            return Err(Error::invalid("branch must be 1 or 2"));
        }
        if t_max <= 0.0 {
            return Err(Error::invalid("t_max must be positive"));
        }
        let (r1, r2) = separatrix_radii();
        let r_k = if k == 1 { r1 } else { r2 };

        let forward = integrate_half(r_k, 1.0, t_max, tol)?;
        let backward = integrate_half(r_k, -1.0, t_max, tol)?;

        let orbit = SeparatrixOrbit {
            branch: k,
            initial_r: r_k,
            t_max,
            samples: Vec::new(),
            hamiltonian_drift: 0.0,
            forward,
            backward,
        };
        let n_half = (t_max / 0.005).round() as usize;
        let mut samples = Vec::with_capacity(2 * n_half + 1);
        let mut drift: f64 = 0.0;
        let c = c0();
        for i in -(n_half as i64)..=(n_half as i64) {
            let t = i as f64 * t_max / n_half as f64;
            let (z, r) = orbit.state(t);
            drift = drift.max((z.cos() + 3.0 * r * bessel_j1(r) - c).abs());
            samples.push((t, z, r));
        }
        Ok(SeparatrixOrbit { samples, hamiltonian_drift: drift, ..orbit })
    }

    /// `(Z(t), R(t))` for `|t| <= t_max`.
    pub fn state(&self, t: f64) -> (f64, f64) {
        if t >= 0.0 {
            self.forward.state(t)
        } else {
            self.backward.state(-t)
        }
    }

    /// Time at which the forward half hands over to the linearized tail.
    pub fn switch_time(&self) -> f64 {
        self.forward.t_switch
    }
}

/// Melnikov coefficients of both branches with bookkeeping for the window.
#[derive(Debug, Clone, Copy)]
pub struct MelnikovResult {
    /// `(a_1, a_2)`; both vanish by the z -> -z symmetry of the Hamiltonian.
    pub a: [f64; 2],
    /// `(b_1, b_2)`.
    pub b: [f64; 2],
    pub t_max: f64,
    pub tol: f64,
    /// Largest |integrand| at the window ends across branches.
    pub tail_bound: f64,
}

fn melnikov_integrands(z: f64, r: f64, t: f64) -> (f64, f64) {
    let j0 = bessel_j0(r);
    let j1 = bessel_j1(r);
    let r2 = r * r;
    let a = r2 * (j1 * z.sin() * t.cos() + 3.0 * j0 * j1 * t.sin());
    let b = r2 * (j1 * z.sin() * t.sin() - 3.0 * j0 * j1 * t.cos());
    (a, b)
}

/// Coefficients `a_k`, `b_k` for one branch by composite Simpson quadrature
/// over the separatrix window; also returns |integrand| at `+-t_max`.
pub fn melnikov_coefficients(k: u8, t_max: f64, tol: f64) -> Result<(f64, f64, f64)> {
    let orbit = SeparatrixOrbit::compute(k, t_max, tol)?;
    // tail must be negligible at the stated window
    let (z_end, r_end) = orbit.state(t_max);
    let (a_end, b_end) = melnikov_integrands(z_end, r_end, t_max);
    let tail = a_end.abs().max(b_end.abs());
    if tail > 1e-6 {
        return Err(Error::precondition(format!(
            "integrand still {tail:.2e} at t_max = {t_max}; enlarge the window"
        )));
    }

    // Simpson with an even number of panels over [-t_max, t_max]
    let n = 32_000usize;
    let h = 2.0 * t_max / n as f64;
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    for i in 0..=n {
        let t = -t_max + i as f64 * h;
        let (z, r) = orbit.state(t);
        let (ga, gb) = melnikov_integrands(z, r, t);
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        a_sum += w * ga;
        b_sum += w * gb;
    }
    Ok((a_sum * h / 3.0, b_sum * h / 3.0, tail))
}

/// Both branches at the default window.
pub fn compute_melnikov(t_max: f64, tol: f64) -> Result<MelnikovResult> {
    let (a1, b1, tail1) = melnikov_coefficients(1, t_max, tol)?;
    let (a2, b2, tail2) = melnikov_coefficients(2, t_max, tol)?;
    Ok(MelnikovResult {
        a: [a1, a2],
        b: [b1, b2],
        t_max,
        tol,
        tail_bound: tail1.max(tail2),
    })
}

/// `M_k(t_0) = a_k sin(t_0) + b_k cos(t_0)` in the paper's normalization,
/// i.e. `c_0^2` times the Melnikov function of the reduced system.
pub fn melnikov_function(k: u8, t0: f64, result: &MelnikovResult) -> f64 {
    let i = (k - 1) as usize;
    result.a[i] * t0.sin() + result.b[i] * t0.cos()
}

/// Output of a direct splitting measurement against the Melnikov prediction.
#[derive(Debug, Clone, Copy)]
pub struct SplittingCheck {
    /// Signed gap between the unstable and stable manifolds on the section.
    pub measured: f64,
    /// First-order prediction `epsilon * Delta(t_0)`.
    pub predicted: f64,
    /// `|measured| / |predicted|`.
    pub ratio: f64,
}

/// First-order perturbed reduced system at strength `epsilon`.
fn perturbed_rhs(t: f64, y: &DVector<f64>, eps: f64) -> Option<DVector<f64>> {
    let (z, r) = (y[0], y[1]);
    if !(DOMAIN_Z.0..=DOMAIN_Z.1).contains(&z) || !(DOMAIN_R.0..=DOMAIN_R.1).contains(&r) {
        return None;
    }
    let psi = z.cos() + 3.0 * r * bessel_j1(r);
    let j0 = bessel_j0(r);
    let (wz, wr, wth) = perturbation_w(z, r, t).ok()?;
    let r2 = r * r;
    let dz = 3.0 * r2 * j0 / psi + eps * (r2 * wz / psi - 3.0 * r2 * r2 * j0 * wth / (psi * psi));
    let dr = r * z.sin() / psi + eps * (r2 * wr / psi - r2 * r * z.sin() * wth / (psi * psi));
    Some(DVector::from_vec(vec![dz, dr]))
}

/// One period of the non-autonomous flow starting at phase `t0`.
fn period_map(y: &Vector2<f64>, t0: f64, eps: f64, tol: f64) -> Result<Vector2<f64>> {
    let rhs = move |t: f64, y: &DVector<f64>| perturbed_rhs(t, y, eps);
    let y0 = DVector::from_vec(vec![y[0], y[1]]);
    let traj = integrate_flow(&rhs, &y0, t0, 2.0 * std::f64::consts::PI, tol)?;
    if traj.domain_exit {
        return Err(Error::numerical("period map left the planar domain"));
    }
    let e = traj.end_state();
    Ok(Vector2::new(e[0], e[1]))
}

/// Flow over `n` full periods from phase `t0`.
fn n_period_flow(y: &Vector2<f64>, t0: f64, n: u32, eps: f64, tol: f64) -> Result<Vector2<f64>> {
    let rhs = move |t: f64, y: &DVector<f64>| perturbed_rhs(t, y, eps);
    let y0 = DVector::from_vec(vec![y[0], y[1]]);
    let span = 2.0 * std::f64::consts::PI * n as f64;
    let traj = integrate_flow(&rhs, &y0, t0, span, tol)?;
    if traj.domain_exit {
        return Err(Error::numerical("manifold orbit left the planar domain"));
    }
    let e = traj.end_state();
    Ok(Vector2::new(e[0], e[1]))
}

/// Hyperbolic fixed point of the time-2pi map near `guess`, by Newton with a
/// finite-difference map Jacobian; also returns the Jacobian.
fn map_fixed_point(
    guess: Vector2<f64>,
    t0: f64,
    eps: f64,
    tol: f64,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let mut y = guess;
    let h = 1e-7;
    let mut jac = Matrix2::zeros();
    for _ in 0..40 {
        let py = period_map(&y, t0, eps, tol)?;
        for col in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[col] += h;
            ym[col] -= h;
            let pp = period_map(&yp, t0, eps, tol)?;
            let pm = period_map(&ym, t0, eps, tol)?;
            jac[(0, col)] = (pp[0] - pm[0]) / (2.0 * h);
            jac[(1, col)] = (pp[1] - pm[1]) / (2.0 * h);
        }
        let f = py - y;
        let m = jac - Matrix2::identity();
        let dy = m
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::numerical("singular Newton system for the fixed point"))?;
        y += dy;
        if dy.norm() < 1e-13 {
            return Ok((y, jac));
        }
    }
    Err(Error::numerical("fixed-point Newton did not converge"))
}

/// Unit eigenvector of a 2x2 matrix for the eigenvalue of largest (`unstable
/// = true`) or smallest modulus.
fn eigvec_2x2(m: &Matrix2<f64>, unstable: bool) -> Result<Vector2<f64>> {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        return Err(Error::numerical("map Jacobian has no real eigenvalues"));
    }
    let s = disc.sqrt();
    let l1 = 0.5 * (tr + s);
    let l2 = 0.5 * (tr - s);
    let lam = if (l1.abs() > l2.abs()) == unstable { l1 } else { l2 };
    // (M - lam I) v = 0
    let a = m[(0, 0)] - lam;
    let b = m[(0, 1)];
    let c = m[(1, 0)];
    let d = m[(1, 1)] - lam;
    let v = if a.abs() + b.abs() > c.abs() + d.abs() {
        Vector2::new(-b, a)
    } else {
        Vector2::new(-d, c)
    };
    Ok(v / v.norm())
}

/// Locate where a map-invariant manifold curve crosses the section `z = 0`:
/// sweep the seed offset `delta` along the eigendirection until the image
/// after `n` periods brackets the section, then bisect in `delta`.
fn manifold_section_crossing(
    fixed_pt: Vector2<f64>,
    dir: Vector2<f64>,
    n_periods: u32,
    backward: bool,
    t0: f64,
    eps: f64,
    tol: f64,
) -> Result<Vector2<f64>> {
    let endpoint = |delta: f64| -> Result<Vector2<f64>> {
        let seed = fixed_pt + dir * delta;
        if backward {
            // W^s of the forward map = W^u of the inverse map; flow backward
            let rhs = move |t: f64, y: &DVector<f64>| {
                let v = perturbed_rhs(-t, y, eps)?;
                Some(-v)
            };
            let y0 = DVector::from_vec(vec![seed[0], seed[1]]);
            let span = 2.0 * std::f64::consts::PI * n_periods as f64;
            let traj = integrate_flow(&rhs, &y0, -t0, span, tol)?;
            if traj.domain_exit {
                return Err(Error::numerical("stable-manifold orbit left the domain"));
            }
            let e = traj.end_state();
            Ok(Vector2::new(e[0], e[1]))
        } else {
            n_period_flow(&seed, t0, n_periods, eps, tol)
        }
    };

    // geometric sweep for a sign change of z at the image
    let target_sign = -fixed_pt[0].signum(); // crossing happens moving toward z = 0
    let g = |y: &Vector2<f64>| y[0] * target_sign + 0.0;
    let mut delta_lo = 1e-11;
    let mut g_lo = g(&endpoint(delta_lo)?);
    let mut delta_hi = delta_lo;
    let mut g_hi = g_lo;
    let mut bracketed = false;
    while delta_hi < 5e-3 {
        delta_hi *= 1.6;
        g_hi = g(&endpoint(delta_hi)?);
        if g_lo < 0.0 && g_hi >= 0.0 {
            bracketed = true;
            break;
        }
        delta_lo = delta_hi;
        g_lo = g_hi;
    }
    if !bracketed {
        return Err(Error::numerical(
            "manifold sweep never reached the section; seed range exhausted",
        ));
    }
    // bisection on delta (robust; the endpoint map is monotone enough here)
    for _ in 0..100 {
        let mid = 0.5 * (delta_lo + delta_hi);
        let gm = g(&endpoint(mid)?);
        if gm < 0.0 {
            delta_lo = mid;
        } else {
            delta_hi = mid;
        }
        if (delta_hi - delta_lo) < 1e-16 * delta_hi {
            break;
        }
    }
    endpoint(0.5 * (delta_lo + delta_hi))
}

/// Measure the heteroclinic splitting of the perturbed system at strength
/// `epsilon` on the section through `(0, r_k)`, and compare it with the
/// first-order Melnikov prediction.
pub fn splitting_check(eps: f64, k: u8, t0: f64, tol: f64) -> Result<SplittingCheck> {
    if !(0.0..=0.05).contains(&eps) {
        return Err(Error::invalid("epsilon must lie in [0, 0.05]"));
    }
    if !(k == 1 || k == 2) {
        return Err(Error::invalid("branch must be 1 or 2"));
    }
    let pi = std::f64::consts::PI;
    let slope = 1.0 / (c0() + 1.0).sqrt(); // |dr/dz| of the eigendirections

    // saddle roles per branch: the inner branch runs p_- -> p_+, the outer
    // branch runs p_+ -> p_-
    let (src_guess, dst_guess, dir_u, dir_s) = if k == 1 {
        (
            Vector2::new(-pi, j01()),
            Vector2::new(pi, j01()),
            Vector2::new(1.0, -slope),  // unstable at p_-, into r < j01
            Vector2::new(-1.0, -slope), // stable at p_+, from r < j01
        )
    } else {
        (
            Vector2::new(pi, j01()),
            Vector2::new(-pi, j01()),
            Vector2::new(-1.0, slope), // unstable at p_+, into r > j01
            Vector2::new(1.0, slope),  // stable at p_-, from r > j01
        )
    };

    let (p_src, jac_src) = map_fixed_point(src_guess, t0, eps, tol)?;
    let (p_dst, jac_dst) = map_fixed_point(dst_guess, t0, eps, tol)?;

    // orient the computed eigenvectors along the expected branch directions
    let mut vu = eigvec_2x2(&jac_src, true)?;
    if vu.dot(&dir_u) < 0.0 {
        vu = -vu;
    }
    let mut vs = eigvec_2x2(&jac_dst, false)?;
    if vs.dot(&dir_s) < 0.0 {
        vs = -vs;
    }

    let unstable_hit = manifold_section_crossing(p_src, vu, 2, false, t0, eps, tol)?;
    let stable_hit = manifold_section_crossing(p_dst, vs, 2, true, t0, eps, tol)?;
    let measured = unstable_hit[1] - stable_hit[1];

    // Delta(t_0) = M_k(t_0) / (|Y_0(p_0)| rho(p_0)) with rho = 1/r and
    // M_k = (a_k sin t_0 + b_k cos t_0)/c_0^2
    let mel = compute_melnikov(40.0, tol.max(1e-13))?;
    let m_k = melnikov_function(k, t0, &mel) / (c0() * c0());
    let r_k = if k == 1 { separatrix_radii().0 } else { separatrix_radii().1 };
    let y0_speed = reduced_rhs(0.0, r_k)?.norm();
    let delta_t0 = m_k / (y0_speed / r_k);
    let predicted = eps * delta_t0;
    let ratio = if predicted != 0.0 { (measured / predicted).abs() } else { f64::NAN };
    Ok(SplittingCheck { measured, predicted, ratio })
}
