//! The classical adiabatic angle of the generalized harmonic oscillator,
//! computed three independent ways.
//!
//! For H = (a q^2 + 2b qp + c p^2)/2 with slowly cycled coefficients, the
//! angle variable picks up a geometric shift on top of the dynamical
//! phase. This module computes that shift by
//!
//! 1. `adiabatic_run` - integrating the linearized flow and subtracting
//!    the dynamical phase from the unwrapped angle,
//! 2. `hannay_from_form` - quadrature of the angle two-form over a fan
//!    surface spanning the loop, and
//! 3. `hannay_from_area` - holonomy on the unit hyperboloid: half the
//!    hyperbolic area enclosed by the projected loop.
//!
//! Conventions: the angle is Theta = atan2(omega*q, c*p + b*q), which
//! advances at exactly omega under frozen parameters and requires c > 0.
//! A loop whose azimuth phi increases (counterclockwise in the X-Y
//! projection of the Minkowski variables) acquires a positive angle
//! shift; reversing the orientation flips every sign.

use crate::dynamics::{integrate_oscillator, Schedule};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, unwrap_angles, PeriodicSpline};
use crate::ode::{uniform_times, OdeOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::f64::consts::PI;

/// Oscillator coefficients of H = (a q^2 + 2b qp + c p^2)/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticForm {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// omega^2 = a c - b^2; positive inside the future cone.
    pub fn omega_sq(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn omega(&self) -> Result<f64> {
        let w2 = self.omega_sq();
        if w2 <= 0.0 {
            return Err(Error::ConeSingularity(format!(
                "omega^2 = {w2} <= 0 for (a, b, c) = ({}, {}, {})",
                self.a, self.b, self.c
            )));
        }
        Ok(w2.sqrt())
    }

    pub fn energy(&self, q: f64, p: f64) -> f64 {
        0.5 * (self.a * q * q + 2.0 * self.b * q * p + self.c * p * p)
    }
}

/// The oscillator coefficients in Minkowski variables
/// T = (a + c)/2, X = (a - c)/2, Y = b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiPoint {
    pub t_coord: f64,
    pub x_coord: f64,
    pub y_coord: f64,
}

impl MinkowskiPoint {
    pub fn new(t_coord: f64, x_coord: f64, y_coord: f64) -> Self {
        Self { t_coord, x_coord, y_coord }
    }

    /// The invariant T^2 - X^2 - Y^2 (= omega^2 of the form).
    pub fn interval(&self) -> f64 {
        self.t_coord * self.t_coord - self.x_coord * self.x_coord - self.y_coord * self.y_coord
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.t_coord, self.x_coord, self.y_coord]
    }
}

/// Exact linear change of variables to the Minkowski picture.
pub fn to_minkowski(form: &QuadraticForm) -> MinkowskiPoint {
    MinkowskiPoint {
        t_coord: 0.5 * (form.a + form.c),
        x_coord: 0.5 * (form.a - form.c),
        y_coord: form.b,
    }
}

/// Inverse of [`to_minkowski`]: a = T + X, c = T - X, b = Y.
pub fn from_minkowski(pt: &MinkowskiPoint) -> QuadraticForm {
    QuadraticForm {
        a: pt.t_coord + pt.x_coord,
        b: pt.y_coord,
        c: pt.t_coord - pt.x_coord,
    }
}

/// Action-angle variables of a state under a frozen form.
///
/// I = H/omega and Theta = atan2(omega q, c p + b q). Under the frozen
/// flow, Theta advances linearly at exactly omega and I is constant.
pub fn action_angle(q: f64, p: f64, form: &QuadraticForm) -> Result<(f64, f64)> {
    if form.c <= 0.0 {
        return Err(Error::UnsupportedRegime(format!("c = {} <= 0", form.c)));
    }
    let omega = form.omega().map_err(|_| {
        Error::UnsupportedRegime(format!("omega^2 = {} <= 0", form.omega_sq()))
    })?;
    if q == 0.0 && p == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let action = form.energy(q, p) / omega;
    let angle = (omega * q).atan2(form.c * p + form.b * q);
    Ok((action, angle))
}

/// Coefficients of the angle two-form in the (db^dc, dc^da, da^db) basis:
/// (a, b, c) / (4 omega^3).
pub fn angle_two_form(form: &QuadraticForm) -> Result<[f64; 3]> {
    let omega = form.omega()?;
    let d = 4.0 * omega * omega * omega;
    Ok([form.a / d, form.b / d, form.c / d])
}

/// The angle two-form in the Minkowski basis (dX^dY, dY^dT, dT^dX):
/// (T, X, Y) / (2 omega^3). Same object as [`angle_two_form`] after the
/// linear change of variables.
pub fn angle_two_form_minkowski(pt: &MinkowskiPoint) -> Result<[f64; 3]> {
    let iv = pt.interval();
    if iv <= 0.0 || pt.t_coord <= 0.0 {
        return Err(Error::ConeSingularity(format!(
            "point (T, X, Y) = ({}, {}, {}) is not in the future cone",
            pt.t_coord, pt.x_coord, pt.y_coord
        )));
    }
    let d = 2.0 * iv * iv.sqrt();
    Ok([pt.t_coord / d, pt.x_coord / d, pt.y_coord / d])
}

/// Evaluate a two-form with Minkowski-basis coefficients on a pair of
/// tangent vectors ordered (T, X, Y).
pub fn eval_two_form(coef: &[f64; 3], v: &[f64; 3], w: &[f64; 3]) -> f64 {
    coef[0] * (v[1] * w[2] - v[2] * w[1])
        + coef[1] * (v[2] * w[0] - v[0] * w[2])
        + coef[2] * (v[0] * w[1] - v[1] * w[0])
}

/// Convert two-form coefficients from the Minkowski basis
/// (dX^dY, dY^dT, dT^dX) to the (db^dc, dc^da, da^db) basis.
pub fn two_form_minkowski_to_abc(c: &[f64; 3]) -> [f64; 3] {
    [0.5 * (c[0] + c[1]), 0.5 * c[2], 0.5 * (c[0] - c[1])]
}

fn default_scale() -> f64 {
    1.0
}
fn default_omega_min() -> f64 {
    0.05
}
fn default_orientation() -> i8 {
    1
}

/// Truncated Fourier series for (a, b, c) over s in [0, 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierCoeffs {
    pub offset: [f64; 3],
    #[serde(default)]
    pub cos: Vec<[f64; 3]>,
    #[serde(default)]
    pub sin: Vec<[f64; 3]>,
}

/// The supported closed-curve families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LoopKind {
    /// Constant hyperbolic radius psi0 at overall scale (omega = scale),
    /// azimuth running once around.
    Cap {
        psi0: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Periodic cubic spline through (a, b, c) keyframes.
    Keyframes { points: Vec<[f64; 3]> },
    /// Truncated Fourier series in (a, b, c).
    Fourier { coeffs: FourierCoeffs },
}

/// Serialized loop description: curve family plus validity margin and
/// orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopSpec {
    #[serde(flatten)]
    pub kind: LoopKind,
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    #[serde(default = "default_orientation")]
    pub orientation: i8,
}

impl LoopSpec {
    pub fn build(&self) -> Result<ParameterLoop> {
        ParameterLoop::new(self.kind.clone(), self.omega_min, self.orientation)
    }
}

#[derive(Clone)]
enum LoopEval {
    Cap { psi0: f64, scale: f64 },
    Spline { a: PeriodicSpline, b: PeriodicSpline, c: PeriodicSpline },
    Fourier(FourierCoeffs),
}

/// A smooth closed curve s in [0, 1] -> QuadraticForm staying inside the
/// future cone with margin omega >= omega_min and c > 0.
#[derive(Clone)]
pub struct ParameterLoop {
    pub kind: LoopKind,
    pub omega_min: f64,
    pub orientation: i8,
    eval: LoopEval,
}

/// Summary of a loop validity check.
#[derive(Debug, Clone, Copy)]
pub struct LoopCheck {
    pub min_omega: f64,
    pub min_c: f64,
    pub mean_omega: f64,
    /// Largest Minkowski coordinate magnitude, for tolerance scaling.
    pub scale: f64,
}

impl ParameterLoop {
    pub fn new(kind: LoopKind, omega_min: f64, orientation: i8) -> Result<Self> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidInput(format!(
                "orientation must be +1 or -1, got {orientation}"
            )));
        }
        if !(omega_min > 0.0) {
            return Err(Error::InvalidInput("omega_min must be positive".into()));
        }
        let eval = match &kind {
            LoopKind::Cap { psi0, scale } => {
                if *psi0 < 0.0 || !(*scale > 0.0) {
                    return Err(Error::InvalidInput(
                        "cap loop needs psi0 >= 0 and scale > 0".into(),
                    ));
                }
                LoopEval::Cap { psi0: *psi0, scale: *scale }
            }
            LoopKind::Keyframes { points } => {
                if points.len() < 3 {
                    return Err(Error::InvalidInput("keyframes loop needs >= 3 points".into()));
                }
                LoopEval::Spline {
                    a: PeriodicSpline::new(points.iter().map(|p| p[0]).collect())?,
                    b: PeriodicSpline::new(points.iter().map(|p| p[1]).collect())?,
                    c: PeriodicSpline::new(points.iter().map(|p| p[2]).collect())?,
                }
            }
            LoopKind::Fourier { coeffs } => LoopEval::Fourier(coeffs.clone()),
        };
        Ok(Self { kind, omega_min, orientation, eval })
    }

    pub fn spec(&self) -> LoopSpec {
        LoopSpec {
            kind: self.kind.clone(),
            omega_min: self.omega_min,
            orientation: self.orientation,
        }
    }

    fn form_raw(&self, s: f64) -> QuadraticForm {
        match &self.eval {
            LoopEval::Cap { psi0, scale } => {
                let phi = 2.0 * PI * s;
                let t = scale * psi0.cosh();
                let x = scale * psi0.sinh() * phi.cos();
                let y = scale * psi0.sinh() * phi.sin();
                from_minkowski(&MinkowskiPoint::new(t, x, y))
            }
            LoopEval::Spline { a, b, c } => QuadraticForm::new(a.eval(s), b.eval(s), c.eval(s)),
            LoopEval::Fourier(fc) => {
                let mut abc = fc.offset;
                for (k, ck) in fc.cos.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64 * s;
                    for d in 0..3 {
                        abc[d] += ck[d] * w.cos();
                    }
                }
                for (k, sk) in fc.sin.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64 * s;
                    for d in 0..3 {
                        abc[d] += sk[d] * w.sin();
                    }
                }
                QuadraticForm::new(abc[0], abc[1], abc[2])
            }
        }
    }

    fn velocity_raw(&self, s: f64) -> [f64; 3] {
        match &self.eval {
            LoopEval::Cap { psi0, scale } => {
                let phi = 2.0 * PI * s;
                let dx = -scale * psi0.sinh() * 2.0 * PI * phi.sin();
                let dy = scale * psi0.sinh() * 2.0 * PI * phi.cos();
                // dT = 0; da = dT + dX, db = dY, dc = dT - dX.
                [dx, dy, -dx]
            }
            LoopEval::Spline { a, b, c } => [a.deriv(s), b.deriv(s), c.deriv(s)],
            LoopEval::Fourier(fc) => {
                let mut d = [0.0; 3];
                for (k, ck) in fc.cos.iter().enumerate() {
                    let wk = 2.0 * PI * (k + 1) as f64;
                    for i in 0..3 {
                        d[i] -= ck[i] * wk * (wk * s).sin();
                    }
                }
                for (k, sk) in fc.sin.iter().enumerate() {
                    let wk = 2.0 * PI * (k + 1) as f64;
                    for i in 0..3 {
                        d[i] += sk[i] * wk * (wk * s).cos();
                    }
                }
                d
            }
        }
    }

    /// Oriented form at loop parameter s in [0, 1].
    pub fn form(&self, s: f64) -> QuadraticForm {
        if self.orientation >= 0 {
            self.form_raw(s)
        } else {
            self.form_raw(1.0 - s)
        }
    }

    /// d(a, b, c)/ds along the oriented traversal.
    pub fn velocity(&self, s: f64) -> [f64; 3] {
        if self.orientation >= 0 {
            self.velocity_raw(s)
        } else {
            let v = self.velocity_raw(1.0 - s);
            [-v[0], -v[1], -v[2]]
        }
    }

    /// Oriented Minkowski position (T, X, Y).
    pub fn minkowski(&self, s: f64) -> [f64; 3] {
        to_minkowski(&self.form(s)).as_array()
    }

    /// Oriented Minkowski velocity.
    pub fn minkowski_velocity(&self, s: f64) -> [f64; 3] {
        let v = self.velocity(s);
        [0.5 * (v[0] + v[2]), 0.5 * (v[0] - v[2]), v[1]]
    }

    /// A copy traversed the other way.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.orientation = -out.orientation;
        out
    }

    /// Check omega >= omega_min and c > 0 on a dense sample.
    pub fn validate(&self) -> Result<LoopCheck> {
        const N: usize = 4096;
        let mut min_omega = f64::INFINITY;
        let mut min_c = f64::INFINITY;
        let mut sum_omega = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..N {
            let s = k as f64 / N as f64;
            let f = self.form(s);
            let w2 = f.omega_sq();
            if w2 <= 0.0 {
                return Err(Error::ConeSingularity(format!(
                    "omega^2 = {w2} <= 0 at s = {s}"
                )));
            }
            let w = w2.sqrt();
            min_omega = min_omega.min(w);
            min_c = min_c.min(f.c);
            sum_omega += w;
            let m = to_minkowski(&f);
            scale = scale
                .max(m.t_coord.abs())
                .max(m.x_coord.abs())
                .max(m.y_coord.abs());
        }
        if min_omega < self.omega_min - 1e-12 {
            return Err(Error::ConeSingularity(format!(
                "loop reaches omega = {min_omega} below the validity margin {}",
                self.omega_min
            )));
        }
        if min_c <= 0.0 {
            return Err(Error::ConeSingularity(format!(
                "loop reaches c = {min_c} <= 0, where the angle convention degenerates"
            )));
        }
        Ok(LoopCheck {
            min_omega,
            min_c,
            mean_omega: sum_omega / N as f64,
            scale,
        })
    }
}

/// Rebuild a loop as keyframes after mapping each sampled Minkowski point
/// through `f`; used for boosts and pointwise rescalings.
pub fn transform_loop_minkowski(
    lp: &ParameterLoop,
    n_samples: usize,
    f: impl Fn(f64, [f64; 3]) -> [f64; 3],
) -> Result<ParameterLoop> {
    if n_samples < 16 {
        return Err(Error::InvalidInput("need at least 16 resample points".into()));
    }
    let points: Vec<[f64; 3]> = (0..n_samples)
        .map(|k| {
            let s = k as f64 / n_samples as f64;
            let m = f(s, lp.minkowski(s));
            let q = from_minkowski(&MinkowskiPoint::new(m[0], m[1], m[2]));
            [q.a, q.b, q.c]
        })
        .collect();
    ParameterLoop::new(LoopKind::Keyframes { points }, lp.omega_min, 1)
}

/// Integral of omega over the traversal time: T * int_0^1 omega(s) ds.
pub fn dynamical_phase(lp: &ParameterLoop, loop_time: f64) -> Result<f64> {
    if !(loop_time > 0.0) {
        return Err(Error::InvalidInput("loop_time must be positive".into()));
    }
    lp.validate()?;
    let integral = adaptive_simpson(
        |s| lp.form(s).omega_sq().max(0.0).sqrt(),
        0.0,
        1.0,
        1e-11,
        1e-14,
        32,
    )?;
    Ok(loop_time * integral)
}

/// Geometric centroid of the loop projected to the hyperboloid and scaled
/// back to the mean omega; the future cone is convex, so the fan from this
/// base to the loop stays inside it.
pub fn default_fan_base(lp: &ParameterLoop) -> Result<MinkowskiPoint> {
    const N: usize = 2048;
    let mut c = [0.0; 3];
    let mut sum_omega = 0.0;
    for k in 0..N {
        let s = k as f64 / N as f64;
        let m = lp.minkowski(s);
        for d in 0..3 {
            c[d] += m[d] / N as f64;
        }
        sum_omega += lp.form(s).omega_sq().max(0.0).sqrt() / N as f64;
    }
    let centroid = MinkowskiPoint::new(c[0], c[1], c[2]);
    let iv = centroid.interval();
    if iv <= 0.0 || centroid.t_coord <= 0.0 {
        return Err(Error::SurfaceConstruction(
            "loop centroid fell outside the future cone".into(),
        ));
    }
    let factor = sum_omega / iv.sqrt();
    Ok(MinkowskiPoint::new(c[0] * factor, c[1] * factor, c[2] * factor))
}

/// Surface quadrature of the angle two-form over the fan spanned from the
/// default base point to the loop.
pub fn hannay_from_form(lp: &ParameterLoop) -> Result<f64> {
    hannay_from_form_with_base(lp, default_fan_base(lp)?)
}

/// Same, but over the fan from a caller-supplied base point.
pub fn hannay_from_form_with_base(lp: &ParameterLoop, base: MinkowskiPoint) -> Result<f64> {
    let check = lp.validate()?;
    if base.interval() <= 0.0 || base.t_coord <= 0.0 {
        return Err(Error::SurfaceConstruction(
            "fan base point is not in the future cone".into(),
        ));
    }
    let b = base.as_array();
    let crossed = Cell::new(false);
    let abs_tol = 1e-13 * check.scale.max(1.0);
    let value = adaptive_simpson(
        |s| {
            let g = lp.minkowski(s);
            let gv = lp.minkowski_velocity(s);
            let du = [g[0] - b[0], g[1] - b[1], g[2] - b[2]];
            let inner = adaptive_simpson(
                |u| {
                    let x = [
                        (1.0 - u) * b[0] + u * g[0],
                        (1.0 - u) * b[1] + u * g[1],
                        (1.0 - u) * b[2] + u * g[2],
                    ];
                    let iv = x[0] * x[0] - x[1] * x[1] - x[2] * x[2];
                    if iv <= 0.0 || x[0] <= 0.0 {
                        crossed.set(true);
                        return 0.0;
                    }
                    let d = 2.0 * iv * iv.sqrt();
                    let w = [x[0] / d, x[1] / d, x[2] / d];
                    let ds_vec = [u * gv[0], u * gv[1], u * gv[2]];
                    eval_two_form(&w, &du, &ds_vec)
                },
                0.0,
                1.0,
                1e-10,
                abs_tol,
                8,
            );
            inner.unwrap_or_else(|_| {
                crossed.set(true);
                0.0
            })
        },
        0.0,
        1.0,
        1e-9,
        abs_tol,
        32,
    )?;
    if crossed.get() {
        return Err(Error::SurfaceConstruction(
            "fan surface crossed the cone omega^2 = 0; supply a custom base".into(),
        ));
    }
    Ok(value)
}

/// Result of the holonomy route: half the enclosed hyperbolic area, plus
/// the winding number of the projected azimuth about the pole.
#[derive(Debug, Clone, Copy)]
pub struct AreaResult {
    pub value: f64,
    pub winding: i64,
}

/// Project the loop to the unit hyperboloid and integrate the smooth
/// primitive (cosh(psi) - 1) d(phi); by Stokes this is the enclosed
/// hyperbolic area regardless of the winding about the pole, and the
/// adiabatic angle is half of it.
pub fn hannay_from_area(lp: &ParameterLoop) -> Result<AreaResult> {
    let check = lp.validate()?;

    // Degenerate point loop: zero area by convention.
    const N: usize = 2048;
    let first = lp.minkowski(0.0);
    let mut extent: f64 = 0.0;
    let mut min_rho2 = f64::INFINITY;
    for k in 0..N {
        let s = k as f64 / N as f64;
        let m = lp.minkowski(s);
        extent = extent.max(
            (m[0] - first[0])
                .abs()
                .max((m[1] - first[1]).abs())
                .max((m[2] - first[2]).abs()),
        );
        // Pole distance measured on the hyperboloid projection.
        let iv = m[0] * m[0] - m[1] * m[1] - m[2] * m[2];
        min_rho2 = min_rho2.min((m[1] * m[1] + m[2] * m[2]) / iv);
    }
    if extent <= 1e-12 * check.scale.max(1.0) {
        return Ok(AreaResult { value: 0.0, winding: 0 });
    }
    if min_rho2 < 1e-16 {
        return Err(Error::UndefinedPhi);
    }

    let integrand = |s: f64, with_cosh: bool| {
        let m = lp.minkowski(s);
        let v = lp.minkowski_velocity(s);
        let iv = m[0] * m[0] - m[1] * m[1] - m[2] * m[2];
        let omega = iv.sqrt();
        let rho2 = m[1] * m[1] + m[2] * m[2];
        let phi_dot = (m[1] * v[2] - m[2] * v[1]) / rho2;
        if with_cosh {
            (m[0] / omega - 1.0) * phi_dot
        } else {
            phi_dot
        }
    };
    let area = adaptive_simpson(|s| integrand(s, true), 0.0, 1.0, 1e-10, 1e-13, 32)?;
    let total_phi = adaptive_simpson(|s| integrand(s, false), 0.0, 1.0, 1e-10, 1e-13, 32)?;
    Ok(AreaResult {
        value: 0.5 * area,
        winding: (total_phi / (2.0 * PI)).round() as i64,
    })
}

/// All three angle estimates for one adiabatic traversal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HannayResult {
    /// Unwrapped angle accumulated over the traversal.
    pub theta_total: f64,
    /// Integral of omega dt.
    pub dynamical_phase: f64,
    /// theta_total - dynamical_phase.
    pub hannay_ode: f64,
    /// Surface quadrature of the angle two-form.
    pub hannay_form: f64,
    /// Half the enclosed hyperbolic area.
    pub hannay_area: f64,
    /// Winding of the projected azimuth about the pole.
    pub winding: i64,
    /// |I(T) - I(0)| / I(0).
    pub action_drift: f64,
    pub loop_time: f64,
}

/// Options for the adiabatic ODE route.
#[derive(Debug, Clone, Copy)]
pub struct AdiabaticOptions {
    pub ode: OdeOptions,
    /// Output samples per local oscillation period used for unwrapping.
    pub samples_per_period: usize,
}

impl Default for AdiabaticOptions {
    fn default() -> Self {
        Self { ode: OdeOptions::default(), samples_per_period: 32 }
    }
}

struct OdeRun {
    theta_total: f64,
    dynamical_phase: f64,
    action_drift: f64,
}

fn adiabatic_core(
    lp: &ParameterLoop,
    loop_time: f64,
    state0: (f64, f64),
    opts: &AdiabaticOptions,
) -> Result<OdeRun> {
    if state0.0 == 0.0 && state0.1 == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let dyn_phase = dynamical_phase(lp, loop_time)?;
    let periods = dyn_phase / (2.0 * PI);
    let n_out = ((opts.samples_per_period.max(8) as f64 * periods).ceil() as usize)
        .clamp(512, 4_000_000)
        + 1;
    let lp_sched = lp.clone();
    let schedule = Schedule::from_fn(move |t| lp_sched.form(t / loop_time));
    let out = uniform_times(0.0, loop_time, n_out);
    let traj = integrate_oscillator(&schedule, state0, (0.0, loop_time), &out, &opts.ode)?;
    let wrapped = traj
        .diagnostic("angle")
        .ok_or_else(|| Error::InvalidInput("missing angle diagnostic".into()))?;
    if wrapped.iter().any(|w| w.is_nan()) {
        return Err(Error::ConeSingularity(
            "angle undefined somewhere along the run".into(),
        ));
    }
    let unwrapped = unwrap_angles(wrapped);
    let actions = traj.diagnostic("action").unwrap();
    let i0 = actions[0];
    let i1 = *actions.last().unwrap();
    Ok(OdeRun {
        theta_total: unwrapped[unwrapped.len() - 1] - unwrapped[0],
        dynamical_phase: dyn_phase,
        action_drift: (i1 - i0).abs() / i0.abs(),
    })
}

/// Traverse the loop once in time `loop_time`, recording the unwrapped
/// angle and the action, and fill in the two geometric estimates for
/// comparison.
pub fn adiabatic_run(
    lp: &ParameterLoop,
    loop_time: f64,
    state0: (f64, f64),
    opts: &AdiabaticOptions,
) -> Result<HannayResult> {
    let run = adiabatic_core(lp, loop_time, state0, opts)?;
    let form_value = hannay_from_form(lp)?;
    let area = hannay_from_area(lp)?;
    Ok(HannayResult {
        theta_total: run.theta_total,
        dynamical_phase: run.dynamical_phase,
        hannay_ode: run.theta_total - run.dynamical_phase,
        hannay_form: form_value,
        hannay_area: area.value,
        winding: area.winding,
        action_drift: run.action_drift,
        loop_time,
    })
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub loop_time: f64,
    pub hannay_ode: f64,
    pub error_vs_area: f64,
    pub action_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub hannay_area: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Slope of ln|error| against ln(1/T).
    pub fitted_slope: f64,
}

/// Run the adiabatic route at each loop time and fit the convergence
/// order of |hannay_ode - hannay_area| against 1/T.
pub fn convergence_study(
    lp: &ParameterLoop,
    t_list: &[f64],
    state0: (f64, f64),
    opts: &AdiabaticOptions,
) -> Result<ConvergenceStudy> {
    if t_list.len() < 2 {
        return Err(Error::InvalidInput("need at least two loop times".into()));
    }
    for w in t_list.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput("loop times must be increasing".into()));
        }
    }
    let area = hannay_from_area(lp)?.value;
    let runs: Vec<OdeRun> = t_list
        .par_iter()
        .map(|&t| adiabatic_core(lp, t, state0, opts))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ConvergenceRow> = t_list
        .iter()
        .zip(runs.iter())
        .map(|(&t, r)| ConvergenceRow {
            loop_time: t,
            hannay_ode: r.theta_total - r.dynamical_phase,
            error_vs_area: ((r.theta_total - r.dynamical_phase) - area).abs(),
            action_drift: r.action_drift,
        })
        .collect();
    // Least-squares slope in log-log coordinates.
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.loop_time).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error_vs_area.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - xm) * (y - ym)).sum();
    Ok(ConvergenceStudy { hannay_area: area, rows, fitted_slope: sxy / sxx })
}

/// Half the hyperbolic cap area 2 pi (cosh(psi0) - 1): the closed-form
/// angle shift for a constant-psi0 loop traversed counterclockwise once.
pub fn cap_reference_value(psi0: f64) -> f64 {
    PI * (psi0.cosh() - 1.0)
}
