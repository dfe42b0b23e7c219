//! Adaptive Dormand-Prince 5(4) integration with dense output and event
//! (section-crossing) detection.
//!
//! The right-hand side returns `None` outside its domain, which truncates the
//! trajectory and sets an explicit exit flag instead of erroring.

use crate::error::{Error, Result};
use nalgebra::DVector;

/// Right-hand side of a (possibly non-autonomous) ODE; `None` means the
/// state has left the field's domain.
pub trait Rhs {
    fn eval(&self, t: f64, y: &DVector<f64>) -> Option<DVector<f64>>;
}

impl<F> Rhs for F
where
    F: Fn(f64, &DVector<f64>) -> Option<DVector<f64>>,
{
    fn eval(&self, t: f64, y: &DVector<f64>) -> Option<DVector<f64>> {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub tolerance: f64,
}

/// Dense trajectory: step endpoints plus derivatives, interpolated by cubic
/// Hermite polynomials inside each step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub derivs: Vec<DVector<f64>>,
    pub stats: IntegratorStats,
    /// True when integration stopped early because the rhs left its domain.
    pub domain_exit: bool,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    /// Cubic Hermite interpolation at `t` (clamped to the covered interval).
    pub fn sample(&self, t: f64) -> DVector<f64> {
        let (i, j) = self.bracket(t);
        if i == j {
            return self.states[i].clone();
        }
        let (t0, t1) = (self.times[i], self.times[j]);
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let (y0, y1) = (&self.states[i], &self.states[j]);
        let (f0, f1) = (&self.derivs[i], &self.derivs[j]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        y0 * h00 + f0 * (h10 * h) + y1 * h01 + f1 * (h11 * h)
    }

    fn bracket(&self, t: f64) -> (usize, usize) {
        let n = self.times.len();
        let forward = self.times[n - 1] >= self.times[0];
        if (forward && t <= self.times[0]) || (!forward && t >= self.times[0]) {
            return (0, 0);
        }
        if (forward && t >= self.times[n - 1]) || (!forward && t <= self.times[n - 1]) {
            return (n - 1, n - 1);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if (self.times[mid] <= t) == forward {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct Stepper<'a, R: Rhs> {
    rhs: &'a R,
    tol: f64,
}

enum StepOutcome {
    Accepted { y: DVector<f64>, f_end: DVector<f64>, h_next: f64 },
    Rejected { h_next: f64 },
    DomainExit,
}

impl<'a, R: Rhs> Stepper<'a, R> {
    fn try_step(&self, t: f64, y: &DVector<f64>, f0: &DVector<f64>, h: f64) -> StepOutcome {
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(f0.clone());
        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    ys += kj * (a * h);
                }
            }
            match self.rhs.eval(t + C[stage] * h, &ys) {
                Some(f) => k.push(f),
                None => return StepOutcome::DomainExit,
            }
        }
        // the 5th-order solution is the last stage state (FSAL: k[6] lives there)
        let mut y5 = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[5][j];
            if a != 0.0 {
                y5 += kj * (a * h);
            }
        }
        let mut err_vec = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_vec += kj * (E[j] * h);
            }
        }
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let scale = self.tol + self.tol * y[i].abs().max(y5[i].abs());
            err = err.max((err_vec[i] / scale).abs());
        }

        let safety = 0.9;
        let factor = if err > 0.0 {
            (safety * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        if err <= 1.0 {
            StepOutcome::Accepted { y: y5, f_end: k.pop().unwrap(), h_next: h * factor }
        } else {
            StepOutcome::Rejected { h_next: h * factor }
        }
    }
}

/// Integrate from `t0` over `t_span` (either sign) with per-step error below
/// `tol`, recording every accepted step for dense output.
pub fn integrate_flow<R: Rhs>(
    rhs: &R,
    y0: &DVector<f64>,
    t0: f64,
    t_span: f64,
    tol: f64,
) -> Result<Trajectory> {
    if tol <= 0.0 {
        return Err(Error::invalid("integration tolerance must be positive"));
    }
    let dir = if t_span >= 0.0 { 1.0 } else { -1.0 };
    let t_end = t0 + t_span;
    let mut t = t0;
    let mut y = y0.clone();
    let mut f = rhs
        .eval(t, &y)
        .ok_or_else(|| Error::invalid("initial state is outside the field domain"))?;

    let mut traj = Trajectory {
        times: vec![t],
        states: vec![y.clone()],
        derivs: vec![f.clone()],
        stats: IntegratorStats { steps: 0, rejected: 0, tolerance: tol },
        domain_exit: false,
    };
    if t_span == 0.0 {
        return Ok(traj);
    }

    let stepper = Stepper { rhs, tol };
    let mut h = dir * (0.01 * t_span.abs()).min(0.1).max(1e-8);
    let h_min = 1e-14 * t_span.abs().max(1.0);

    while (t_end - t) * dir > 0.0 {
        if h.abs() < h_min {
            return Err(Error::numerical(format!(
                "step size underflow at t = {t} (h = {h})"
            )));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        match stepper.try_step(t, &y, &f, h) {
            StepOutcome::Accepted { y: y_new, f_end, h_next } => {
                t += h;
                y = y_new;
                f = f_end;
                traj.times.push(t);
                traj.states.push(y.clone());
                traj.derivs.push(f.clone());
                traj.stats.steps += 1;
                h = dir * h_next.abs();
            }
            StepOutcome::Rejected { h_next } => {
                traj.stats.rejected += 1;
                h = dir * h_next.abs();
            }
            StepOutcome::DomainExit => {
                // shrink into the boundary, then stop cleanly
                if h.abs() > 16.0 * h_min {
                    h *= 0.5;
                    continue;
                }
                traj.domain_exit = true;
                return Ok(traj);
            }
        }
        if traj.stats.steps + traj.stats.rejected > 50_000_000 {
            return Err(Error::numerical("step budget exhausted"));
        }
    }
    Ok(traj)
}

/// Integrate forward until the scalar event `g(t, y)` crosses zero from
/// below, then refine the crossing to `crossing_tol` in the event value.
///
/// Step endpoints bracket the crossing; refinement evaluates candidates by
/// re-integrating the bracketing step from its start, so the reported state
/// sits on the integrated solution rather than on the interpolant.
pub fn integrate_to_event<R: Rhs, G: Fn(f64, &DVector<f64>) -> f64>(
    rhs: &R,
    y0: &DVector<f64>,
    t0: f64,
    max_span: f64,
    tol: f64,
    event: G,
    crossing_tol: f64,
) -> Result<(f64, DVector<f64>)> {
    if max_span <= 0.0 {
        return Err(Error::invalid("event search span must be positive"));
    }
    let mut t = t0;
    let mut y = y0.clone();
    let mut f = rhs
        .eval(t, &y)
        .ok_or_else(|| Error::invalid("initial state is outside the field domain"))?;
    let mut g_prev = event(t, &y);
    let stepper = Stepper { rhs, tol };
    let mut h = 0.01f64.min(max_span);
    let h_min = 1e-14 * max_span.max(1.0);
    let t_end = t0 + max_span;
    let mut steps = 0usize;

    while t < t_end {
        if h.abs() < h_min {
            return Err(Error::numerical("step size underflow during event search"));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        match stepper.try_step(t, &y, &f, h) {
            StepOutcome::Accepted { y: y_new, f_end, h_next } => {
                let t_new = t + h;
                let g_new = event(t_new, &y_new);
                if g_prev < 0.0 && g_new >= 0.0 {
                    return refine_crossing(
                        rhs, &y, &f, t, h, g_prev, g_new, tol, &event, crossing_tol,
                    );
                }
                t = t_new;
                y = y_new;
                f = f_end;
                g_prev = g_new;
                h = h_next;
            }
            StepOutcome::Rejected { h_next } => {
                h = h_next;
            }
            StepOutcome::DomainExit => {
                return Err(Error::numerical("trajectory left the domain before the event"));
            }
        }
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::numerical("step budget exhausted during event search"));
        }
    }
    Err(Error::numerical("event not reached within the allowed span"))
}

#[allow(clippy::too_many_arguments)]
fn refine_crossing<R: Rhs, G: Fn(f64, &DVector<f64>) -> f64>(
    rhs: &R,
    y_start: &DVector<f64>,
    f_start: &DVector<f64>,
    t_start: f64,
    h_step: f64,
    g_lo: f64,
    g_hi: f64,
    tol: f64,
    event: &G,
    crossing_tol: f64,
) -> Result<(f64, DVector<f64>)> {
    let mut a = 0.0f64;
    let mut b = h_step;
    let mut ga = g_lo;
    let mut gb = g_hi;
    let mut best = (t_start + b, integrate_span(rhs, y_start, f_start, t_start, b, tol)?);
    for _ in 0..80 {
        if gb - ga == 0.0 {
            break;
        }
        // secant candidate, safeguarded away from the bracket ends
        let mut m = a - ga * (b - a) / (gb - ga);
        let lo = a + 0.05 * (b - a);
        let hi = b - 0.05 * (b - a);
        if !(lo..=hi).contains(&m) {
            m = 0.5 * (a + b);
        }
        let ym = integrate_span(rhs, y_start, f_start, t_start, m, tol)?;
        let gm = event(t_start + m, &ym);
        best = (t_start + m, ym);
        if gm.abs() <= crossing_tol {
            return Ok(best);
        }
        if gm < 0.0 {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
        if (b - a).abs() < 1e-15 * h_step.abs().max(1.0) {
            break;
        }
    }
    Ok(best)
}

/// Re-integrate a sub-span of one accepted step at the controller tolerance.
fn integrate_span<R: Rhs>(
    rhs: &R,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    t0: f64,
    span: f64,
    tol: f64,
) -> Result<DVector<f64>> {
    if span == 0.0 {
        return Ok(y0.clone());
    }
    let stepper = Stepper { rhs, tol };
    let mut t = 0.0;
    let mut y = y0.clone();
    let mut f = f0.clone();
    let mut h = span;
    while t < span {
        if t + h > span {
            h = span - t;
        }
        match stepper.try_step(t0 + t, &y, &f, h) {
            StepOutcome::Accepted { y: y_new, f_end, h_next } => {
                t += h;
                y = y_new;
                f = f_end;
                h = h_next;
            }
            StepOutcome::Rejected { h_next } => h = h_next,
            StepOutcome::DomainExit => {
                return Err(Error::numerical("domain exit inside a refinement span"))
            }
        }
        if h.abs() < 1e-16 * span.abs() {
            return Err(Error::numerical("refinement step underflow"));
        }
    }
    Ok(y)
}
