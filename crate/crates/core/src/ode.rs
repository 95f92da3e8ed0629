//! Adaptive embedded Runge-Kutta integration.
//!
//! Dormand-Prince 5(4) with PI step-size control and the standard
//! fifth-order continuous extension for dense output. States are small
//! fixed-size arrays; the right-hand side may reject a state (domain
//! exit), which the driver answers by shrinking the step and, if that
//! fails, reporting a pole error carrying the last valid state.

use crate::error::{Error, Result};

/// A first-order ODE system y' = f(t, y) on [f64; N].
pub trait OdeSystem<const N: usize> {
    /// Evaluate the right-hand side. An `Err` marks a domain violation at
    /// (t, y) rather than a fatal condition; the driver backs off.
    fn deriv(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()>;
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
{
    fn deriv(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()> {
        self(t, y, dy)
    }
}

/// Integrator tolerances and limits.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 50_000_000,
            h_init: None,
        }
    }
}

impl OdeOptions {
    pub fn with_tols(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-13) {
            return Err(Error::InvalidInput(format!(
                "rel_tol = {} must be >= 1e-13",
                self.rel_tol
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("abs_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Counters reported with every solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub steps: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub fn_evals: usize,
}

/// Solution samples at the requested output times.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub stats: OdeStats,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
// Error coefficients (5th-order weights minus embedded 4th-order weights).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2; // strongest shrink per step
const FAC_MAX: f64 = 10.0; // strongest growth per step

struct Stepper<'a, const N: usize, S: OdeSystem<N>> {
    sys: &'a S,
    opts: OdeOptions,
    stats: OdeStats,
}

impl<const N: usize, S: OdeSystem<N>> Stepper<'_, N, S> {
    fn eval(&mut self, t: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()> {
        self.stats.fn_evals += 1;
        self.sys.deriv(t, y, dy)
    }

    fn error_norm(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
        let mut sum = 0.0;
        for i in 0..N {
            let sc = self.opts.abs_tol + self.opts.rel_tol * y0[i].abs().max(y1[i].abs());
            let e = err[i] / sc;
            sum += e * e;
        }
        (sum / N as f64).sqrt()
    }

    /// Initial step-size heuristic based on the scaled magnitudes of the
    /// state, the derivative, and an Euler probe of the curvature.
    fn initial_step(&mut self, t0: f64, y0: &[f64; N], f0: &[f64; N], t_end: f64) -> Result<f64> {
        let dir = (t_end - t0).signum();
        let span = (t_end - t0).abs();
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..N {
            let sc = self.opts.abs_tol + self.opts.rel_tol * y0[i].abs();
            d0 += (y0[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        let mut y1 = *y0;
        for i in 0..N {
            y1[i] += dir * h0 * f0[i];
        }
        let mut f1 = [0.0; N];
        if self.eval(t0 + dir * h0, &y1, &mut f1).is_err() {
            return Ok(dir * (h0 * 1e-3).min(span));
        }
        let mut d2: f64 = 0.0;
        for i in 0..N {
            let sc = self.opts.abs_tol + self.opts.rel_tol * y0[i].abs();
            d2 += (((f1[i] - f0[i]) / sc) / h0).powi(2);
        }
        d2 = (d2 / N as f64).sqrt();
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok(dir * h0.min(h1).min(span).max(1e-12))
    }
}

/// Integrate from `t_span.0` to `t_span.1`, sampling the solution at the
/// strictly increasing `out_times` (all inside the span) via the
/// fifth-order continuous extension.
pub fn integrate_dense<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    y0: [f64; N],
    t_span: (f64, f64),
    out_times: &[f64],
    opts: &OdeOptions,
) -> Result<OdeSolution<N>> {
    opts.validate()?;
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::InvalidInput(format!(
            "t_span must be increasing, got ({t0}, {t_end})"
        )));
    }
    for w in out_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput("out_times must be strictly increasing".into()));
        }
    }
    if let (Some(&first), Some(&last)) = (out_times.first(), out_times.last()) {
        if first < t0 - 1e-12 || last > t_end + 1e-12 {
            return Err(Error::InvalidInput("out_times must lie inside t_span".into()));
        }
    }

    let mut stepper = Stepper { sys, opts: *opts, stats: OdeStats::default() };
    let mut t = t0;
    let mut y = y0;
    let mut k: [[f64; N]; 7] = [[0.0; N]; 7];
    stepper.eval(t, &y, &mut k[0])?;

    let mut h = match opts.h_init {
        Some(h) => h.min(t_end - t0),
        None => stepper.initial_step(t0, &y, &k[0].clone(), t_end)?,
    };

    let mut times = Vec::with_capacity(out_times.len());
    let mut states = Vec::with_capacity(out_times.len());
    let mut next_out = 0;
    while next_out < out_times.len() && out_times[next_out] <= t + 1e-300 {
        times.push(out_times[next_out]);
        states.push(y);
        next_out += 1;
    }

    let mut facold: f64 = 1e-4;
    let mut rejected_prev = false;

    while t < t_end {
        if stepper.stats.steps >= opts.max_steps {
            return Err(Error::IntegrationFailure {
                reason: format!("exceeded {} steps", opts.max_steps),
                t,
                state: y.to_vec(),
            });
        }
        let h_floor = 1e3 * f64::EPSILON * t.abs().max(1.0);
        if h.abs() < h_floor {
            return Err(Error::IntegrationFailure {
                reason: "step size underflow".into(),
                t,
                state: y.to_vec(),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        // Stages 2..7; a failed stage evaluation means the trial step left
        // the flow's domain, so shrink and retry.
        let mut stage_ok = true;
        let mut y_stage = [0.0; N];
        for s in 1..7 {
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            if stepper.eval(t + C[s] * h, &y_stage, &mut tail[0]).is_err() {
                stage_ok = false;
                break;
            }
        }
        if !stage_ok {
            h *= 0.5;
            if h.abs() < h_floor {
                return Err(Error::PoleExit { t, state: y.to_vec() });
            }
            continue;
        }
        // y_stage now holds the 5th-order solution (stage 7 abscissa = 1,
        // FSAL row), and k[6] = f(t+h, y1).
        let y1 = y_stage;
        let mut err = [0.0; N];
        for i in 0..N {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += E[j] * kj[i];
            }
            err[i] = h * acc;
        }
        let err_norm = stepper.error_norm(&y, &y1, &err);
        stepper.stats.steps += 1;

        let fac11 = err_norm.powf(EXPO1);
        if err_norm <= 1.0 {
            // Accept; serve dense output inside [t, t+h].
            stepper.stats.accepted += 1;
            let t_new = t + h;
            if next_out < out_times.len() && out_times[next_out] <= t_new + 1e-300 {
                let mut cont = [[0.0; N]; 5];
                let ydiff: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
                let bspl: [f64; N] = std::array::from_fn(|i| h * k[0][i] - ydiff[i]);
                for i in 0..N {
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff[i];
                    cont[2][i] = bspl[i];
                    cont[3][i] = ydiff[i] - h * k[6][i] - bspl[i];
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        acc += D[j] * kj[i];
                    }
                    cont[4][i] = h * acc;
                }
                while next_out < out_times.len() && out_times[next_out] <= t_new + 1e-300 {
                    let s = (out_times[next_out] - t) / h;
                    let s1 = 1.0 - s;
                    let mut yo = [0.0; N];
                    for i in 0..N {
                        yo[i] = cont[0][i]
                            + s * (cont[1][i]
                                + s1 * (cont[2][i] + s * (cont[3][i] + s1 * cont[4][i])));
                    }
                    times.push(out_times[next_out]);
                    states.push(yo);
                    next_out += 1;
                }
            }
            y = y1;
            t = t_new;
            k[0] = k[6]; // FSAL
            let mut fac = fac11 / facold.powf(BETA);
            facold = err_norm.max(1e-4);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if rejected_prev {
                h_new = h_new.min(h);
            }
            h = h_new;
            rejected_prev = false;
        } else {
            stepper.stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected_prev = true;
        }
    }

    Ok(OdeSolution { times, states, stats: stepper.stats })
}

/// Uniform sample times over [t0, t1], endpoints included.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut ts: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    ts[n - 1] = t1;
    ts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn harmonic(_t: f64, y: &[f64; 2], dy: &mut [f64; 2]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = -y[0];
        Ok(())
    }

    #[test]
    fn harmonic_oscillator_one_period() {
        let out = uniform_times(0.0, 2.0 * PI, 65);
        let sol = integrate_dense(&harmonic, [1.0, 0.0], (0.0, 2.0 * PI), &out, &OdeOptions::default())
            .unwrap();
        let last = sol.states.last().unwrap();
        assert_abs_diff_eq!(last[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(last[1], 0.0, epsilon = 1e-9);
        // Dense output matches the closed form everywhere sampled.
        for (t, y) in sol.times.iter().zip(sol.states.iter()) {
            assert_abs_diff_eq!(y[0], t.cos(), epsilon = 1e-8);
            assert_abs_diff_eq!(y[1], -t.sin(), epsilon = 1e-8);
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let out = vec![50.0];
        let errs: Vec<f64> = [1e-6, 1e-9, 1e-12]
            .iter()
            .map(|&rt| {
                let sol = integrate_dense(
                    &harmonic,
                    [1.0, 0.0],
                    (0.0, 50.0),
                    &out,
                    &OdeOptions::with_tols(rt, rt * 1e-2),
                )
                .unwrap();
                (sol.states[0][0] - 50.0_f64.cos()).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors {errs:?}");
    }

    #[test]
    fn domain_exit_reports_pole() {
        // y' = 1 with a wall at y = 1.
        let wall = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| -> Result<()> {
            if y[0] >= 1.0 {
                return Err(Error::Domain("wall".into()));
            }
            dy[0] = 1.0;
            Ok(())
        };
        let res = integrate_dense(&wall, [0.0], (0.0, 2.0), &[], &OdeOptions::default());
        match res {
            Err(Error::PoleExit { t, state }) => {
                assert!(t <= 1.0 + 1e-9);
                assert!(state[0] <= 1.0);
                assert!(state[0] > 0.9);
            }
            other => panic!("expected pole exit, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        let res = integrate_dense(
            &harmonic,
            [1.0, 0.0],
            (0.0, 1.0),
            &[],
            &OdeOptions::with_tols(1e-14, 1e-14),
        );
        assert!(res.is_err());
    }
}
