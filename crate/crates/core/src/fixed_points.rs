//! Fixed points of the two-mode dynamics, their linear stability, and the
//! critical surface alpha*gamma = beta^2 where the oscillation frequency
//! of the linearized motion vanishes.

use crate::error::{Error, Result};
use crate::model::{
    eom_full, hamiltonian_hessian, josephson_fields, ModelParams, PhaseState,
};
use crate::numerics::bisect;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How a fixed point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    /// sin(theta_bar) != 0 solutions of E_J = E_C = 0.
    PhaseLocked,
    /// theta_bar in {0, pi} roots of the real-phase equation.
    RealPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Center,
    Saddle,
    Degenerate,
}

/// A classified equilibrium of the (p, theta) flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub p_bar: f64,
    pub theta_bar: f64,
    pub kind: FixedPointKind,
    pub stability: Stability,
    /// Oscillation frequency for a center, growth rate for a saddle,
    /// zero for a degenerate point.
    pub omega_or_lyapunov: f64,
    /// Norm of the defining equations at the reported point.
    pub residual: f64,
}

/// Hessian-determinant threshold below which a point counts as softened.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Residual bound every reported fixed point satisfies.
pub const RESIDUAL_TOL: f64 = 1e-10;

fn eom_residual(p_bar: f64, theta_bar: f64, params: &ModelParams) -> f64 {
    match eom_full(PhaseState::new(p_bar, theta_bar), params) {
        Ok((pd, td)) => pd.hypot(td),
        Err(_) => f64::INFINITY,
    }
}

/// Classify an equilibrium from the Hessian of the Hamiltonian: the
/// linearization eigenvalues are +-sqrt(-det H), so det > 0 gives a
/// center with omega = sqrt(det) and det < 0 a saddle with rate
/// sqrt(-det).
pub fn bogoliubov_frequency(
    params: &ModelParams,
    fp: &FixedPoint,
) -> Result<(Stability, f64)> {
    if 1.0 - fp.p_bar * fp.p_bar <= DEGENERACY_TOL {
        // Pole equilibria of the spin flow; the (p, theta) chart is
        // singular there and no frequency is assigned.
        return Ok((Stability::Degenerate, 0.0));
    }
    let residual = eom_residual(fp.p_bar, fp.theta_bar, params);
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::InvalidInput(format!(
            "fixed point residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }
    let h = hamiltonian_hessian(PhaseState::new(fp.p_bar, fp.theta_bar), params)?;
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if det > DEGENERACY_TOL {
        Ok((Stability::Center, det.sqrt()))
    } else if det < -DEGENERACY_TOL {
        Ok((Stability::Saddle, (-det).sqrt()))
    } else {
        Ok((Stability::Degenerate, 0.0))
    }
}

fn classified(p_bar: f64, theta_bar: f64, kind: FixedPointKind, params: &ModelParams) -> FixedPoint {
    let mut fp = FixedPoint {
        p_bar,
        theta_bar,
        kind,
        stability: Stability::Degenerate,
        omega_or_lyapunov: 0.0,
        residual: eom_residual(p_bar, theta_bar, params),
    };
    if let Ok((stab, rate)) = bogoliubov_frequency(params, &fp) {
        fp.stability = stab;
        fp.omega_or_lyapunov = rate;
    }
    fp
}

/// Fixed points with sin(theta_bar) != 0, solving E_J = E_C = 0:
///
/// ```text
/// p_bar = (beta*Delta - alpha*eps) / (alpha*gamma - beta^2)
/// sqrt(1 - p_bar^2) cos(theta_bar) = (beta*eps - gamma*Delta) / (alpha*gamma - beta^2)
/// ```
///
/// Returns the theta_bar and -theta_bar branches when feasible, the empty
/// list when |p_bar| > 1 or |cos(theta_bar)| > 1.
pub fn fixed_points_phase_locked(params: &ModelParams) -> Result<Vec<FixedPoint>> {
    let det = params.alpha * params.gamma - params.beta * params.beta;
    if det.abs() < DEGENERACY_TOL {
        return Err(Error::SingularDenominator(format!(
            "alpha*gamma - beta^2 = {det:.3e}"
        )));
    }
    let p_bar = (params.beta * params.delta - params.alpha * params.epsilon) / det;
    let u = (params.beta * params.epsilon - params.gamma * params.delta) / det;
    if p_bar.abs() > 1.0 {
        return Ok(Vec::new());
    }
    let s_bar = (1.0 - p_bar * p_bar).sqrt();
    if s_bar <= 1e-14 {
        // Solution sits at a pole; feasible only when the tunneling term
        // vanishes there, and theta is then undefined.
        if u.abs() <= 1e-14 {
            return Ok(vec![FixedPoint {
                p_bar: p_bar.signum(),
                theta_bar: 0.0,
                kind: FixedPointKind::PhaseLocked,
                stability: Stability::Degenerate,
                omega_or_lyapunov: 0.0,
                residual: 0.0,
            }]);
        }
        return Ok(Vec::new());
    }
    let cos_theta = u / s_bar;
    if cos_theta.abs() > 1.0 {
        return Ok(Vec::new());
    }
    let theta = cos_theta.clamp(-1.0, 1.0).acos();
    let mut out = vec![classified(p_bar, theta, FixedPointKind::PhaseLocked, params)];
    if theta.sin().abs() > 1e-12 {
        out.push(classified(p_bar, -theta, FixedPointKind::PhaseLocked, params));
    }
    Ok(out)
}

/// Value whose roots in p are the theta_bar = 0 (sign = +1) or
/// theta_bar = pi (sign = -1) equilibria.
fn real_phase_equation(p: f64, sign: f64, params: &ModelParams) -> f64 {
    let s = (1.0 - p * p).sqrt();
    params.epsilon
        + (params.gamma - params.alpha) * p
        + sign * (params.beta * (1.0 - 2.0 * p * p) - params.delta * p) / s
}

/// All theta_bar in {0, pi} equilibria, found by sign-change bracketing on
/// a 2000-point grid in p followed by bisection to 1e-12. Pole equilibria
/// (|p| = 1, possible when Delta +- beta = 0) are reported as degenerate.
pub fn fixed_points_real_phase(params: &ModelParams) -> Vec<FixedPoint> {
    const GRID: usize = 2000;
    const EDGE: f64 = 1e-9;
    let mut out = Vec::new();
    for (sign, theta_bar) in [(1.0, 0.0), (-1.0, std::f64::consts::PI)] {
        let f = |p: f64| real_phase_equation(p, sign, params);
        let lo = -1.0 + EDGE;
        let hi = 1.0 - EDGE;
        let dp = (hi - lo) / (GRID - 1) as f64;
        let mut prev_p = lo;
        let mut prev_f = f(lo);
        if prev_f == 0.0 {
            out.push(classified(prev_p, theta_bar, FixedPointKind::RealPhase, params));
        }
        for k in 1..GRID {
            let p = lo + k as f64 * dp;
            let fp = f(p);
            if fp == 0.0 {
                out.push(classified(p, theta_bar, FixedPointKind::RealPhase, params));
            } else if prev_f != 0.0 && prev_f.signum() != fp.signum() {
                if let Ok(root) = bisect(f, prev_p, p, 1e-12) {
                    out.push(classified(root, theta_bar, FixedPointKind::RealPhase, params));
                }
            }
            prev_p = p;
            prev_f = fp;
        }
    }
    // Pole equilibria of the spin flow: S = (0, 0, s) is steady iff
    // Delta + beta*s = 0.
    for s in [1.0_f64, -1.0] {
        if (params.delta + params.beta * s).abs() <= DEGENERACY_TOL {
            out.push(FixedPoint {
                p_bar: s,
                theta_bar: 0.0,
                kind: FixedPointKind::RealPhase,
                stability: Stability::Degenerate,
                omega_or_lyapunov: 0.0,
                residual: 0.0,
            });
        }
    }
    out
}

/// Residual of the defining equations E_J = E_C = 0 for a candidate
/// equilibrium, used by verification sweeps.
pub fn josephson_residual(fp: &FixedPoint, params: &ModelParams) -> Result<f64> {
    let f = josephson_fields(PhaseState::new(fp.p_bar, fp.theta_bar), params)?;
    Ok(f.e_j.abs().max(f.e_c.abs()))
}

/// A rectangular region of (alpha, beta, gamma) space. An axis with equal
/// endpoints is frozen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRegion {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
}

/// One grid node of a critical-surface scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanCell {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega_sq: f64,
    pub on_surface: bool,
}

/// Grid of omega^2 = alpha*gamma - beta^2 values together with the
/// extracted zero-level set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalScan {
    pub cells: Vec<ScanCell>,
    /// Line segments of the zero set, one per crossed grid cell, as
    /// (alpha, beta, gamma) endpoint pairs.
    pub zero_segments: Vec<[[f64; 3]; 2]>,
    pub resolution: [usize; 3],
}

fn axis_values(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    let step = (range.1 - range.0) / (n - 1) as f64;
    (0..n).map(|k| range.0 + k as f64 * step).collect()
}

/// Sample omega^2 over the region and extract the zero-level set by edge
/// interpolation on each beta slice. Slices are processed in parallel and
/// merged in deterministic order.
pub fn critical_surface_scan(region: &ScanRegion, resolution: [usize; 3]) -> Result<CriticalScan> {
    for (k, (range, n)) in [
        (region.alpha, resolution[0]),
        (region.beta, resolution[1]),
        (region.gamma, resolution[2]),
    ]
    .iter()
    .enumerate()
    {
        if !range.0.is_finite() || !range.1.is_finite() {
            return Err(Error::InvalidInput("scan region must be finite".into()));
        }
        if *n == 0 || (*n == 1 && range.0 != range.1) {
            return Err(Error::InvalidInput(format!(
                "axis {k}: resolution must be >= 2 unless the axis is frozen"
            )));
        }
    }
    let alphas = axis_values(region.alpha, resolution[0]);
    let betas = axis_values(region.beta, resolution[1]);
    let gammas = axis_values(region.gamma, resolution[2]);

    let omega_sq = |a: f64, b: f64, g: f64| a * g - b * b;

    let slices: Vec<(Vec<ScanCell>, Vec<[[f64; 3]; 2]>)> = betas
        .par_iter()
        .map(|&b| {
            let na = alphas.len();
            let ng = gammas.len();
            let mut vals = vec![0.0; na * ng];
            for (i, &a) in alphas.iter().enumerate() {
                for (j, &g) in gammas.iter().enumerate() {
                    vals[i * ng + j] = omega_sq(a, b, g);
                }
            }
            let mut cells = Vec::with_capacity(na * ng);
            for (i, &a) in alphas.iter().enumerate() {
                for (j, &g) in gammas.iter().enumerate() {
                    let v = vals[i * ng + j];
                    let mut on = v.abs() <= 1e-12;
                    if !on {
                        let mut neighbors = Vec::with_capacity(4);
                        if i > 0 {
                            neighbors.push(vals[(i - 1) * ng + j]);
                        }
                        if i + 1 < na {
                            neighbors.push(vals[(i + 1) * ng + j]);
                        }
                        if j > 0 {
                            neighbors.push(vals[i * ng + j - 1]);
                        }
                        if j + 1 < ng {
                            neighbors.push(vals[i * ng + j + 1]);
                        }
                        on = neighbors.iter().any(|&w| w == 0.0 || w.signum() != v.signum());
                    }
                    cells.push(ScanCell { alpha: a, beta: b, gamma: g, omega_sq: v, on_surface: on });
                }
            }
            let mut segments = Vec::new();
            if na >= 2 && ng >= 2 {
                for i in 0..na - 1 {
                    for j in 0..ng - 1 {
                        let corners = [
                            (alphas[i], gammas[j], vals[i * ng + j]),
                            (alphas[i + 1], gammas[j], vals[(i + 1) * ng + j]),
                            (alphas[i + 1], gammas[j + 1], vals[(i + 1) * ng + j + 1]),
                            (alphas[i], gammas[j + 1], vals[i * ng + j + 1]),
                        ];
                        let mut crossings: Vec<[f64; 3]> = Vec::new();
                        for e in 0..4 {
                            let (a0, g0, f0) = corners[e];
                            let (a1, g1, f1) = corners[(e + 1) % 4];
                            if f0 == 0.0 && f1 == 0.0 {
                                continue;
                            }
                            if f0 == 0.0 {
                                crossings.push([a0, b, g0]);
                            } else if f0.signum() != f1.signum() && f1 != 0.0 {
                                let t = f0 / (f0 - f1);
                                crossings.push([a0 + t * (a1 - a0), b, g0 + t * (g1 - g0)]);
                            }
                        }
                        crossings.dedup_by(|x, y| {
                            (x[0] - y[0]).abs() < 1e-14 && (x[2] - y[2]).abs() < 1e-14
                        });
                        if crossings.len() >= 2 {
                            segments.push([crossings[0], crossings[1]]);
                            if crossings.len() == 4 {
                                segments.push([crossings[2], crossings[3]]);
                            }
                        }
                    }
                }
            }
            (cells, segments)
        })
        .collect();

    let mut cells = Vec::new();
    let mut zero_segments = Vec::new();
    for (c, s) in slices {
        cells.extend(c);
        zero_segments.extend(s);
    }
    Ok(CriticalScan { cells, zero_segments, resolution })
}
