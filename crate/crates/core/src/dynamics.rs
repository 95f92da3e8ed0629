//! Time integration of the model flows and phase-portrait extraction.
//!
//! Three flows share one adaptive integrator: the canonical (p, theta)
//! flow, the classical-spin flow on the unit sphere (pole-safe where the
//! canonical chart is singular), and the linearized oscillator flow used
//! by the adiabatic-angle machinery. Parameters may be frozen, keyframed
//! with C2 periodic splines, or given in closed form.

use crate::error::{Error, Result};
use crate::fixed_points::{
    fixed_points_phase_locked, fixed_points_real_phase, FixedPoint, Stability,
};
use crate::hannay::{action_angle, QuadraticForm};
use crate::model::{
    eom_full, hamiltonian_full, hamiltonian_hessian, phase_to_spin, spin_eom,
    spin_hamiltonian, ModelParams, PhaseState, SpinState,
};
use crate::numerics::PeriodicSpline;
use crate::ode::{integrate_dense, uniform_times, OdeOptions, OdeStats, OdeSystem};
use rayon::prelude::*;
use std::marker::PhantomData;
use std::sync::Arc;

/// Fixed-size parameter vectors that can ride a [`Schedule`].
pub trait ParamSet: Copy + Send + Sync + 'static {
    const DIM: usize;
    fn to_vec(&self) -> Vec<f64>;
    fn from_slice(c: &[f64]) -> Self;
}

impl ParamSet for ModelParams {
    const DIM: usize = 5;
    fn to_vec(&self) -> Vec<f64> {
        vec![self.delta, self.epsilon, self.alpha, self.beta, self.gamma]
    }
    fn from_slice(c: &[f64]) -> Self {
        ModelParams::new(c[0], c[1], c[2], c[3], c[4])
    }
}

impl ParamSet for QuadraticForm {
    const DIM: usize = 3;
    fn to_vec(&self) -> Vec<f64> {
        vec![self.a, self.b, self.c]
    }
    fn from_slice(c: &[f64]) -> Self {
        QuadraticForm::new(c[0], c[1], c[2])
    }
}

/// Time-dependent parameters: constant, keyframed with smooth periodic
/// interpolation, or closed-form. Keyframed schedules are C2 and close so
/// that value and first derivative match across the period.
#[derive(Clone)]
pub enum Schedule<P: ParamSet> {
    Constant(P),
    Keyframed(Arc<KeyframedSchedule<P>>),
    Func(Arc<dyn Fn(f64) -> P + Send + Sync>),
}

pub struct KeyframedSchedule<P> {
    splines: Vec<PeriodicSpline>,
    period: f64,
    _p: PhantomData<P>,
}

impl<P: ParamSet> Schedule<P> {
    pub fn keyframed(points: &[P], period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidInput("schedule period must be positive".into()));
        }
        if points.len() < 3 {
            return Err(Error::InvalidInput("keyframed schedule needs >= 3 points".into()));
        }
        let splines = (0..P::DIM)
            .map(|d| PeriodicSpline::new(points.iter().map(|p| p.to_vec()[d]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule::Keyframed(Arc::new(KeyframedSchedule {
            splines,
            period,
            _p: PhantomData,
        })))
    }

    pub fn from_fn(f: impl Fn(f64) -> P + Send + Sync + 'static) -> Self {
        Schedule::Func(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> P {
        match self {
            Schedule::Constant(p) => *p,
            Schedule::Keyframed(k) => {
                let s = (t / k.period).rem_euclid(1.0);
                let c: Vec<f64> = k.splines.iter().map(|sp| sp.eval(s)).collect();
                P::from_slice(&c)
            }
            Schedule::Func(f) => f(t),
        }
    }
}

/// Canonical (p, theta) flow; state layout [p, theta].
pub struct PhaseFlow<'a>(pub &'a Schedule<ModelParams>);

impl OdeSystem<2> for PhaseFlow<'_> {
    fn deriv(&self, t: f64, y: &[f64; 2], dy: &mut [f64; 2]) -> Result<()> {
        let params = self.0.at(t);
        let (pd, td) = eom_full(PhaseState::new(y[0], y[1]), &params)?;
        dy[0] = pd;
        dy[1] = td;
        Ok(())
    }
}

/// Classical-spin flow; state layout [sx, sy, sz]. No renormalization is
/// applied during integration; norm drift is a measured diagnostic.
pub struct SpinFlow<'a>(pub &'a Schedule<ModelParams>);

impl OdeSystem<3> for SpinFlow<'_> {
    fn deriv(&self, t: f64, y: &[f64; 3], dy: &mut [f64; 3]) -> Result<()> {
        let params = self.0.at(t);
        let s = SpinState { sx: y[0], sy: y[1], sz: y[2] };
        *dy = spin_eom(&s, &params);
        Ok(())
    }
}

/// Linearized generalized-oscillator flow; state layout [q, p] with
/// q_dot = b q + c p, p_dot = -a q - b p.
pub struct OscillatorFlow<'a>(pub &'a Schedule<QuadraticForm>);

impl OdeSystem<2> for OscillatorFlow<'_> {
    fn deriv(&self, t: f64, y: &[f64; 2], dy: &mut [f64; 2]) -> Result<()> {
        let f = self.0.at(t);
        dy[0] = f.b * y[0] + f.c * y[1];
        dy[1] = -f.a * y[0] - f.b * y[1];
        Ok(())
    }
}

/// Sampled solution with named per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    pub states: Vec<Vec<f64>>,
    pub diagnostics: Vec<(String, Vec<f64>)>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn state_component(&self, idx: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[idx]).collect()
    }
}

fn to_trajectory<const N: usize>(
    times: Vec<f64>,
    states: Vec<[f64; N]>,
    diagnostics: Vec<(String, Vec<f64>)>,
    stats: OdeStats,
) -> Trajectory {
    Trajectory {
        times,
        dim: N,
        states: states.iter().map(|s| s.to_vec()).collect(),
        diagnostics,
        stats,
    }
}

/// Integrate the canonical flow, recording the instantaneous energy.
pub fn integrate_phase(
    schedule: &Schedule<ModelParams>,
    state0: PhaseState,
    t_span: (f64, f64),
    out_times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let sol = integrate_dense(
        &PhaseFlow(schedule),
        [state0.p, state0.theta],
        t_span,
        out_times,
        opts,
    )?;
    let energy: Vec<f64> = sol
        .times
        .iter()
        .zip(sol.states.iter())
        .map(|(&t, y)| {
            hamiltonian_full(PhaseState::new(y[0].clamp(-1.0, 1.0), y[1]), &schedule.at(t))
                .unwrap_or(f64::NAN)
        })
        .collect();
    Ok(to_trajectory(
        sol.times,
        sol.states,
        vec![("energy".into(), energy)],
        sol.stats,
    ))
}

/// Integrate the spin flow, recording norm and instantaneous energy.
pub fn integrate_spin(
    schedule: &Schedule<ModelParams>,
    state0: SpinState,
    t_span: (f64, f64),
    out_times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let sol = integrate_dense(
        &SpinFlow(schedule),
        [state0.sx, state0.sy, state0.sz],
        t_span,
        out_times,
        opts,
    )?;
    let norm: Vec<f64> = sol
        .states
        .iter()
        .map(|y| (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt())
        .collect();
    let energy: Vec<f64> = sol
        .times
        .iter()
        .zip(sol.states.iter())
        .map(|(&t, y)| {
            spin_hamiltonian(&SpinState { sx: y[0], sy: y[1], sz: y[2] }, &schedule.at(t))
        })
        .collect();
    Ok(to_trajectory(
        sol.times,
        sol.states,
        vec![("norm".into(), norm), ("energy".into(), energy)],
        sol.stats,
    ))
}

/// Integrate the oscillator flow, recording energy, action, and the
/// wrapped angle where the instantaneous form supports them.
pub fn integrate_oscillator(
    schedule: &Schedule<QuadraticForm>,
    state0: (f64, f64),
    t_span: (f64, f64),
    out_times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let sol = integrate_dense(
        &OscillatorFlow(schedule),
        [state0.0, state0.1],
        t_span,
        out_times,
        opts,
    )?;
    let mut energy = Vec::with_capacity(sol.times.len());
    let mut action = Vec::with_capacity(sol.times.len());
    let mut angle = Vec::with_capacity(sol.times.len());
    for (&t, y) in sol.times.iter().zip(sol.states.iter()) {
        let f = schedule.at(t);
        energy.push(0.5 * (f.a * y[0] * y[0] + 2.0 * f.b * y[0] * y[1] + f.c * y[1] * y[1]));
        match action_angle(y[0], y[1], &f) {
            Ok((i, th)) => {
                action.push(i);
                angle.push(th);
            }
            Err(_) => {
                action.push(f64::NAN);
                angle.push(f64::NAN);
            }
        }
    }
    Ok(to_trajectory(
        sol.times,
        sol.states,
        vec![
            ("energy".into(), energy),
            ("action".into(), action),
            ("angle".into(), angle),
        ],
        sol.stats,
    ))
}

/// Which conserved quantity a drift report concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConservedQuantity {
    Energy,
    SpinNorm,
    Action,
}

impl ConservedQuantity {
    fn diagnostic_name(&self) -> &'static str {
        match self {
            ConservedQuantity::Energy => "energy",
            ConservedQuantity::SpinNorm => "norm",
            ConservedQuantity::Action => "action",
        }
    }
}

/// Maximum and RMS drift of a conserved quantity relative to its initial
/// value.
#[derive(Debug, Clone, Copy)]
pub struct DriftReport {
    pub initial: f64,
    pub max_abs: f64,
    pub rms_abs: f64,
    pub max_rel: f64,
    pub rms_rel: f64,
}

pub fn conservation_report(traj: &Trajectory, kind: ConservedQuantity) -> Result<DriftReport> {
    let series = traj
        .diagnostic(kind.diagnostic_name())
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "trajectory lacks the '{}' diagnostic",
                kind.diagnostic_name()
            ))
        })?;
    if series.is_empty() {
        return Ok(DriftReport {
            initial: f64::NAN,
            max_abs: 0.0,
            rms_abs: 0.0,
            max_rel: 0.0,
            rms_rel: 0.0,
        });
    }
    let initial = series[0];
    let scale = if initial.abs() > f64::MIN_POSITIVE { initial.abs() } else { 1.0 };
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    for &v in series {
        let d = (v - initial).abs();
        max_abs = max_abs.max(d);
        sum_sq += d * d;
    }
    let rms_abs = (sum_sq / series.len() as f64).sqrt();
    Ok(DriftReport {
        initial,
        max_abs,
        rms_abs,
        max_rel: max_abs / scale,
        rms_rel: rms_abs / scale,
    })
}

/// A closed (or horizon-capped) orbit sample at a given energy.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub energy: f64,
    pub region: usize,
    /// Samples on the (p, theta) cylinder.
    pub phase_points: Vec<[f64; 2]>,
    /// The same samples on the unit sphere.
    pub spin_points: Vec<[f64; 3]>,
    pub closed: bool,
}

/// Everything the portrait extraction produces.
#[derive(Debug, Clone)]
pub struct Portrait {
    pub fixed_points: Vec<FixedPoint>,
    pub separatrix_energies: Vec<f64>,
    pub region_count: usize,
    pub orbits: Vec<Orbit>,
    /// Sampled separatrix branches as (p, theta) polylines.
    pub separatrices: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy)]
pub struct PortraitOptions {
    pub grid_theta: usize,
    pub grid_p: usize,
    pub orbit_samples: usize,
    pub separatrix_offset: f64,
    pub ode: OdeOptions,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self {
            grid_theta: 240,
            grid_p: 241,
            orbit_samples: 512,
            separatrix_offset: 1e-6,
            ode: OdeOptions::default(),
        }
    }
}

/// Energy grid over the (theta, p) cylinder with pole rows; regions are
/// the connected components that remain after removing a thin band around
/// each separatrix energy level.
struct EnergyGrid {
    n_theta: usize,
    n_p: usize,
    thetas: Vec<f64>,
    ps: Vec<f64>,
    h: Vec<f64>,
    region: Vec<i32>, // -1 = separatrix band
    region_count: usize,
}

impl EnergyGrid {
    fn node(&self, jp: usize, kt: usize) -> usize {
        jp * self.n_theta + kt
    }

    fn build(params: &ModelParams, sep_energies: &[f64], n_theta: usize, n_p: usize) -> Self {
        let thetas: Vec<f64> = (0..n_theta)
            .map(|k| {
                -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64
            })
            .collect();
        let ps: Vec<f64> = (0..n_p)
            .map(|j| -1.0 + 2.0 * j as f64 / (n_p - 1) as f64)
            .collect();
        let mut h = vec![0.0; n_theta * n_p];
        for (j, &p) in ps.iter().enumerate() {
            for (k, &th) in thetas.iter().enumerate() {
                h[j * n_theta + k] =
                    hamiltonian_full(PhaseState::new(p.clamp(-1.0, 1.0), th), params).unwrap();
            }
        }
        let mut grid = EnergyGrid {
            n_theta,
            n_p,
            thetas,
            ps,
            h,
            region: vec![0; n_theta * n_p],
            region_count: 0,
        };
        grid.mark_bands(sep_energies);
        grid.flood_fill();
        grid
    }

    fn neighbors(&self, jp: usize, kt: usize) -> [(usize, usize); 4] {
        let up = if jp + 1 < self.n_p { jp + 1 } else { jp };
        let dn = jp.saturating_sub(1);
        [
            (jp, (kt + 1) % self.n_theta),
            (jp, (kt + self.n_theta - 1) % self.n_theta),
            (up, kt),
            (dn, kt),
        ]
    }

    fn mark_bands(&mut self, sep_energies: &[f64]) {
        if sep_energies.is_empty() {
            return;
        }
        let mut band = vec![false; self.h.len()];
        for jp in 0..self.n_p {
            for kt in 0..self.n_theta {
                let idx = self.node(jp, kt);
                let hv = self.h[idx];
                let local: f64 = self
                    .neighbors(jp, kt)
                    .iter()
                    .map(|&(j, k)| (self.h[self.node(j, k)] - hv).abs())
                    .fold(0.0, f64::max);
                for &e in sep_energies {
                    if (hv - e).abs() <= local {
                        band[idx] = true;
                        break;
                    }
                }
            }
        }
        for (idx, b) in band.iter().enumerate() {
            if *b {
                self.region[idx] = -1;
            }
        }
    }

    fn flood_fill(&mut self) {
        let mut next_id = 0;
        let mut queue = std::collections::VecDeque::new();
        for jp in 0..self.n_p {
            for kt in 0..self.n_theta {
                let idx = self.node(jp, kt);
                if self.region[idx] != 0 {
                    continue;
                }
                next_id += 1;
                self.region[idx] = next_id;
                queue.push_back((jp, kt));
                while let Some((j, k)) = queue.pop_front() {
                    for (nj, nk) in self.neighbors(j, k) {
                        let nidx = self.node(nj, nk);
                        if self.region[nidx] == 0 {
                            self.region[nidx] = next_id;
                            queue.push_back((nj, nk));
                        }
                    }
                }
            }
        }
        self.region_count = next_id as usize;
    }
}

/// Compute all fixed points, separatrix energies, representative orbits,
/// and the count of separatrix-bounded regions.
pub fn classify_phase_portrait(
    params: &ModelParams,
    energy_levels: &[f64],
    opts: &PortraitOptions,
) -> Result<Portrait> {
    let mut fixed_points: Vec<FixedPoint> = Vec::new();
    if let Ok(mut fps) = fixed_points_phase_locked(params) {
        fixed_points.append(&mut fps);
    }
    fixed_points.append(&mut fixed_points_real_phase(params));
    // De-duplicate coincident points from the two searches.
    fixed_points.sort_by(|a, b| {
        (a.theta_bar, a.p_bar)
            .partial_cmp(&(b.theta_bar, b.p_bar))
            .unwrap()
    });
    fixed_points.dedup_by(|a, b| {
        (a.p_bar - b.p_bar).abs() < 1e-8 && (a.theta_bar - b.theta_bar).abs() < 1e-8
    });

    if fixed_points.is_empty() {
        return Ok(Portrait {
            fixed_points,
            separatrix_energies: Vec::new(),
            region_count: 0,
            orbits: Vec::new(),
            separatrices: Vec::new(),
        });
    }

    let mut separatrix_energies: Vec<f64> = fixed_points
        .iter()
        .filter(|fp| fp.stability == Stability::Saddle)
        .map(|fp| hamiltonian_full(PhaseState::new(fp.p_bar, fp.theta_bar), params).unwrap())
        .collect();
    separatrix_energies.sort_by(f64::total_cmp);
    separatrix_energies.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let grid = EnergyGrid::build(params, &separatrix_energies, opts.grid_theta, opts.grid_p);

    // Representative orbit seeds: for each (region, level) pair, the first
    // in-region p-column crossing of the level, refined by bisection.
    let mut seeds: Vec<(usize, f64, PhaseState)> = Vec::new();
    for &level in energy_levels {
        let mut found = vec![false; grid.region_count + 1];
        for kt in 0..grid.n_theta {
            for jp in 0..grid.n_p - 1 {
                let i0 = grid.node(jp, kt);
                let i1 = grid.node(jp + 1, kt);
                let r = grid.region[i0];
                if r <= 0 || grid.region[i1] != r || found[r as usize] {
                    continue;
                }
                let d0 = grid.h[i0] - level;
                let d1 = grid.h[i1] - level;
                if d0 == 0.0 {
                    found[r as usize] = true;
                    seeds.push((
                        r as usize,
                        level,
                        PhaseState::new(grid.ps[jp], grid.thetas[kt]),
                    ));
                } else if d0.signum() != d1.signum() {
                    let th = grid.thetas[kt];
                    let f =
                        |p: f64| hamiltonian_full(PhaseState::new(p, th), params).unwrap() - level;
                    if let Ok(p_star) =
                        crate::numerics::bisect(f, grid.ps[jp], grid.ps[jp + 1], 1e-12)
                    {
                        found[r as usize] = true;
                        seeds.push((r as usize, level, PhaseState::new(p_star, th)));
                    }
                }
            }
        }
    }

    // Slowest center sets the integration horizon.
    let omega_ref = fixed_points
        .iter()
        .filter(|f| f.stability == Stability::Center && f.omega_or_lyapunov > 1e-6)
        .map(|f| f.omega_or_lyapunov)
        .fold(f64::INFINITY, f64::min);
    let omega_ref = if omega_ref.is_finite() { omega_ref } else { 1.0 };

    let orbits: Vec<Orbit> = seeds
        .par_iter()
        .map(|&(region, level, seed)| trace_orbit(params, seed, region, level, omega_ref, opts))
        .collect::<Result<Vec<_>>>()?;

    // Separatrix branches from slightly offset saddle points.
    let saddles: Vec<&FixedPoint> = fixed_points
        .iter()
        .filter(|f| f.stability == Stability::Saddle)
        .collect();
    let separatrices: Vec<Vec<[f64; 2]>> = saddles
        .par_iter()
        .flat_map(|fp| {
            let branches = trace_separatrix(params, fp, opts);
            branches.into_par_iter()
        })
        .collect();

    Ok(Portrait {
        fixed_points,
        separatrix_energies,
        region_count: grid.region_count,
        orbits,
        separatrices,
    })
}

fn spin_to_phase(s: &[f64; 3]) -> [f64; 2] {
    [s[2], s[1].atan2(s[0])]
}

fn trace_orbit(
    params: &ModelParams,
    seed: PhaseState,
    region: usize,
    level: f64,
    omega_ref: f64,
    opts: &PortraitOptions,
) -> Result<Orbit> {
    let schedule = Schedule::Constant(*params);
    let s0 = phase_to_spin(seed)?;
    let horizon = 60.0 / omega_ref;
    let n_dense = 4096;
    let out = uniform_times(0.0, horizon, n_dense);
    let traj = integrate_spin(&schedule, s0, (0.0, horizon), &out, &opts.ode)?;

    let start = [s0.sx, s0.sy, s0.sz];
    let dist = |a: &[f64], b: &[f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    let extent = traj
        .states
        .iter()
        .map(|s| dist(s, &start))
        .fold(0.0, f64::max);
    let tol_close = (1e-3 * extent).max(1e-12);
    let mut cut = traj.states.len();
    let mut closed = false;
    let mut left = false;
    for (k, s) in traj.states.iter().enumerate().skip(1) {
        let d = dist(s, &start);
        if !left && d > 10.0 * tol_close {
            left = true;
        }
        if left && d < tol_close {
            cut = k + 1;
            closed = true;
            break;
        }
    }
    let stride = (cut / opts.orbit_samples.max(2)).max(1);
    let spin_points: Vec<[f64; 3]> = traj.states[..cut]
        .iter()
        .step_by(stride)
        .map(|s| [s[0], s[1], s[2]])
        .collect();
    let phase_points: Vec<[f64; 2]> = spin_points.iter().map(spin_to_phase).collect();
    Ok(Orbit { energy: level, region, phase_points, spin_points, closed })
}

fn trace_separatrix(
    params: &ModelParams,
    saddle: &FixedPoint,
    opts: &PortraitOptions,
) -> Vec<Vec<[f64; 2]>> {
    let Ok(hess) = hamiltonian_hessian(PhaseState::new(saddle.p_bar, saddle.theta_bar), params)
    else {
        return Vec::new();
    };
    let rate = saddle.omega_or_lyapunov;
    if rate <= 0.0 {
        return Vec::new();
    }
    // Unstable eigenvector of [[H_tp, H_pp], [-H_tt, -H_tp]] in (theta, p).
    let (h_tt, h_tp, h_pp) = (hess[0][0], hess[0][1], hess[1][1]);
    let mut v = [h_pp, rate - h_tp];
    if v[0].abs() + v[1].abs() < 1e-12 {
        v = [rate + h_tp, -h_tt];
    }
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let v = [v[0] / n, v[1] / n];

    let schedule = Schedule::Constant(*params);
    let horizon = 40.0 / rate;
    let out = uniform_times(0.0, horizon, 2048);
    let mut curves = Vec::new();
    for sign in [1.0, -1.0] {
        let theta0 = saddle.theta_bar + sign * opts.separatrix_offset * v[0];
        let p0 = saddle.p_bar + sign * opts.separatrix_offset * v[1];
        let Ok(s0) = phase_to_spin(PhaseState::new(p0.clamp(-1.0, 1.0), theta0)) else {
            continue;
        };
        if let Ok(traj) = integrate_spin(&schedule, s0, (0.0, horizon), &out, &opts.ode) {
            curves.push(
                traj.states
                    .iter()
                    .map(|s| spin_to_phase(&[s[0], s[1], s[2]]))
                    .collect(),
            );
        }
    }
    curves
}

/// Result of integrating the canonical and spin flows side by side.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceReport {
    pub max_deviation: f64,
    /// Time actually covered; shorter than requested if the canonical
    /// flow reached the pole.
    pub t_reached: f64,
    pub partial: bool,
}

/// Integrate both representations from matched initial conditions and
/// report the maximum pointwise distance between the mapped states.
pub fn equivalence_check(
    state0: PhaseState,
    params: &ModelParams,
    t_span: (f64, f64),
    opts: &OdeOptions,
) -> Result<EquivalenceReport> {
    let schedule = Schedule::Constant(*params);
    let s0 = phase_to_spin(state0)?;
    let n_out = 2001;

    let mut span = t_span;
    let mut partial = false;
    let (phase_traj, spin_traj) = loop {
        let out = uniform_times(span.0, span.1, n_out);
        match integrate_phase(&schedule, state0, span, &out, opts) {
            Ok(pt) => {
                let st = integrate_spin(&schedule, s0, span, &out, opts)?;
                break (pt, st);
            }
            Err(Error::PoleExit { t, .. }) => {
                partial = true;
                let new_end = span.0 + 0.99 * (t - span.0);
                if new_end <= span.0 {
                    return Err(Error::PoleExit { t, state: vec![state0.p, state0.theta] });
                }
                span = (span.0, new_end);
            }
            Err(e) => return Err(e),
        }
    };

    let mut max_dev: f64 = 0.0;
    for (py, sy) in phase_traj.states.iter().zip(spin_traj.states.iter()) {
        let mapped = phase_to_spin(PhaseState::new(py[0].clamp(-1.0, 1.0), py[1]))?;
        let d = ((mapped.sx - sy[0]).powi(2)
            + (mapped.sy - sy[1]).powi(2)
            + (mapped.sz - sy[2]).powi(2))
        .sqrt();
        max_dev = max_dev.max(d);
    }
    Ok(EquivalenceReport { max_deviation: max_dev, t_reached: span.1, partial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn frozen_oscillator_recovers_period() {
        let schedule = Schedule::Constant(QuadraticForm::new(1.0, 0.0, 1.0));
        let out = uniform_times(0.0, 2.0 * PI, 129);
        let traj = integrate_oscillator(
            &schedule,
            (1.0, 0.0),
            (0.0, 2.0 * PI),
            &out,
            &OdeOptions::default(),
        )
        .unwrap();
        let last = traj.states.last().unwrap();
        assert_abs_diff_eq!(last[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(last[1], 0.0, epsilon = 1e-8);
        // Closed-form solution q = cos t, p = -sin t at every sample.
        for (t, y) in traj.times.iter().zip(traj.states.iter()) {
            assert_abs_diff_eq!(y[0], t.cos(), epsilon = 1e-8);
            assert_abs_diff_eq!(y[1], -t.sin(), epsilon = 1e-8);
        }
    }

    #[test]
    fn frozen_model_energy_drift_small() {
        let params = ModelParams::new(0.3, 0.1, 0.8, 0.2, 1.1);
        let schedule = Schedule::Constant(params);
        let out = uniform_times(0.0, 1000.0, 2001);
        let traj = integrate_phase(
            &schedule,
            PhaseState::new(0.2, 0.7),
            (0.0, 1000.0),
            &out,
            &OdeOptions::with_tols(1e-12, 1e-14),
        )
        .unwrap();
        let drift = conservation_report(&traj, ConservedQuantity::Energy).unwrap();
        assert!(drift.max_rel < 1e-9, "energy drift {}", drift.max_rel);
    }

    #[test]
    fn spin_fixed_point_stays_put() {
        let schedule = Schedule::Constant(ModelParams::zero_field(0.7, 0.2, 1.2));
        let s0 = SpinState::new(0.0, 1.0, 0.0).unwrap();
        let out = uniform_times(0.0, 100.0, 101);
        let traj =
            integrate_spin(&schedule, s0, (0.0, 100.0), &out, &OdeOptions::default()).unwrap();
        for y in &traj.states {
            assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(y[2], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spin_norm_drift_below_tolerance() {
        let params = ModelParams::new(0.4, 0.0, 1.0, 0.5, 1.0);
        let schedule = Schedule::Constant(params);
        let s0 = phase_to_spin(PhaseState::new(0.4, 0.9)).unwrap();
        let out = uniform_times(0.0, 1000.0, 1001);
        let traj = integrate_spin(
            &schedule,
            s0,
            (0.0, 1000.0),
            &out,
            &OdeOptions::with_tols(1e-12, 1e-14),
        )
        .unwrap();
        let drift = conservation_report(&traj, ConservedQuantity::SpinNorm).unwrap();
        assert!(drift.max_abs < 1e-9, "norm drift {}", drift.max_abs);
    }

    #[test]
    fn empty_trajectory_has_zero_drift() {
        let traj = Trajectory {
            times: vec![],
            dim: 2,
            states: vec![],
            diagnostics: vec![("energy".into(), vec![])],
            stats: OdeStats::default(),
        };
        let drift = conservation_report(&traj, ConservedQuantity::Energy).unwrap();
        assert_eq!(drift.max_abs, 0.0);
        assert!(conservation_report(&traj, ConservedQuantity::SpinNorm).is_err());
    }

    #[test]
    fn drift_scales_with_tolerance() {
        let params = ModelParams::new(0.4, 0.0, 1.0, 0.5, 1.0);
        let schedule = Schedule::Constant(params);
        let s0 = phase_to_spin(PhaseState::new(0.4, 0.9)).unwrap();
        let out = uniform_times(0.0, 100.0, 201);
        let drifts: Vec<f64> = [1e-5, 1e-7, 1e-9]
            .iter()
            .map(|&rt| {
                let traj = integrate_spin(
                    &schedule,
                    s0,
                    (0.0, 100.0),
                    &out,
                    &OdeOptions::with_tols(rt, rt * 1e-2),
                )
                .unwrap();
                conservation_report(&traj, ConservedQuantity::SpinNorm)
                    .unwrap()
                    .max_abs
            })
            .collect();
        assert!(
            drifts[0] > drifts[1] && drifts[1] > drifts[2],
            "drifts {drifts:?}"
        );
    }

    #[test]
    fn keyframed_schedule_is_periodic_and_smooth() {
        let points: Vec<ModelParams> = (0..8)
            .map(|k| {
                let s = k as f64 / 8.0;
                ModelParams::zero_field(
                    2.0 + 0.5 * (2.0 * PI * s).cos(),
                    0.3 * (2.0 * PI * s).sin(),
                    2.0 - 0.5 * (2.0 * PI * s).cos(),
                )
            })
            .collect();
        let sched = Schedule::keyframed(&points, 10.0).unwrap();
        let a = sched.at(0.0);
        let b = sched.at(10.0);
        assert_abs_diff_eq!(a.alpha, b.alpha, epsilon = 1e-12);
        assert_abs_diff_eq!(a.beta, b.beta, epsilon = 1e-12);
        // First derivative continuity across the seam.
        let h = 1e-6;
        let fwd = (sched.at(h).alpha - a.alpha) / h;
        let bwd = (a.alpha - sched.at(10.0 - h).alpha) / h;
        assert!((fwd - bwd).abs() < 1e-4, "derivative jump {}", (fwd - bwd).abs());
    }

    #[test]
    fn portrait_reproduces_spin_sphere_structure() {
        // Six fixed points; past the critical surface the easy-axis pair
        // turns unstable and the sphere splits into four regions.
        let params = ModelParams::zero_field(1.0, 1.5, 1.0);
        let portrait =
            classify_phase_portrait(&params, &[-0.1, 0.5], &PortraitOptions::default()).unwrap();
        assert_eq!(portrait.fixed_points.len(), 6);
        let saddles: Vec<_> = portrait
            .fixed_points
            .iter()
            .filter(|f| f.stability == Stability::Saddle)
            .collect();
        assert_eq!(saddles.len(), 2);
        for s in &saddles {
            assert_abs_diff_eq!(s.p_bar, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(s.theta_bar.abs(), PI / 2.0, epsilon = 1e-10);
        }
        assert_eq!(portrait.separatrix_energies.len(), 1);
        assert_abs_diff_eq!(portrait.separatrix_energies[0], 0.0, epsilon = 1e-12);
        assert_eq!(portrait.region_count, 4);
        assert!(!portrait.separatrices.is_empty());

        // Below the critical surface the easy-axis pair is stable.
        let params = ModelParams::zero_field(1.0, 0.5, 1.0);
        let portrait =
            classify_phase_portrait(&params, &[0.1], &PortraitOptions::default()).unwrap();
        let easy_axis: Vec<_> = portrait
            .fixed_points
            .iter()
            .filter(|f| f.p_bar.abs() < 1e-8)
            .collect();
        assert_eq!(easy_axis.len(), 2);
        for f in easy_axis {
            assert_eq!(f.stability, Stability::Center);
        }
    }

    #[test]
    fn equivalence_of_phase_and_spin_flows() {
        let params = ModelParams::new(0.0, 0.0, 1.0, 0.4, 1.0);
        let rep = equivalence_check(
            PhaseState::new(0.3, 1.0),
            &params,
            (0.0, 100.0),
            &OdeOptions::default(),
        )
        .unwrap();
        assert!(!rep.partial);
        assert!(rep.max_deviation < 1e-7, "deviation {}", rep.max_deviation);

        // A shared fixed point stays put to integrator noise.
        let rep = equivalence_check(
            PhaseState::new(0.0, PI / 2.0),
            &ModelParams::zero_field(1.0, 0.4, 1.0),
            (0.0, 50.0),
            &OdeOptions::default(),
        )
        .unwrap();
        assert!(rep.max_deviation < 1e-9, "deviation {}", rep.max_deviation);
    }

    #[test]
    fn equivalence_improves_with_tolerance() {
        let params = ModelParams::new(0.0, 0.0, 1.0, 0.4, 1.0);
        let loose = equivalence_check(
            PhaseState::new(0.3, 1.0),
            &params,
            (0.0, 100.0),
            &OdeOptions::with_tols(1e-8, 1e-10),
        )
        .unwrap();
        let tight = equivalence_check(
            PhaseState::new(0.3, 1.0),
            &params,
            (0.0, 100.0),
            &OdeOptions::with_tols(1e-12, 1e-14),
        )
        .unwrap();
        assert!(
            tight.max_deviation * 10.0 <= loose.max_deviation,
            "loose {} tight {}",
            loose.max_deviation,
            tight.max_deviation
        );
    }
}
