//! The two-mode condensate model in canonical form.
//!
//! The state of the condensate pair is the canonical pair (p, theta):
//! population imbalance and relative phase. The Hamiltonian
//!
//! ```text
//! H = eps*p + gamma/2 p^2 + (Delta + beta*p) sqrt(1-p^2) cos(theta)
//!       + alpha/2 (1-p^2) cos^2(theta)
//! ```
//!
//! carries five parameters: the bare tunneling Delta, the single-mode
//! energy difference eps, and the interaction coefficients alpha, beta,
//! gamma built from two-mode overlap integrals. The same dynamics has a
//! classical-spin representation on the unit sphere, which is pole-safe
//! where the (p, theta) chart is singular.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The five parameters of the quartic two-mode Hamiltonian (hbar = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(delta: f64, epsilon: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { delta, epsilon, alpha, beta, gamma }
    }

    /// Zero field, interactions only.
    pub fn zero_field(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self::new(0.0, 0.0, alpha, beta, gamma)
    }
}

/// Canonical pair: population imbalance p in [-1, 1] and relative phase
/// theta. The phase is stored unwrapped so angle drifts stay measurable;
/// wrap only for display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub p: f64,
    pub theta: f64,
}

impl PhaseState {
    pub fn new(p: f64, theta: f64) -> Self {
        Self { p, theta }
    }
}

/// A point on the unit sphere, sx^2 + sy^2 + sz^2 = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl SpinState {
    /// Build a spin state, checking unit norm to 1e-12.
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let norm2 = sx * sx + sy * sy + sz * sz;
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "spin norm^2 = {norm2}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { sx, sy, sz })
    }

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }
}

/// Two-mode overlap integrals of the localized well modes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoModeOverlaps {
    /// Single-mode energies.
    pub eps1: f64,
    pub eps2: f64,
    /// Bare tunneling.
    pub k: f64,
    /// On-site interaction energies.
    pub u1: f64,
    pub u2: f64,
    /// Interaction-assisted tunneling.
    pub u12: f64,
    pub u21: f64,
    /// Inter-well interaction / pair tunneling.
    pub i_pair: f64,
}

/// Effective Josephson tunneling energy and energy difference at a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JosephsonFields {
    pub e_j: f64,
    pub e_c: f64,
}

fn check_p_closed(p: f64) -> Result<()> {
    if !(p.abs() <= 1.0) {
        return Err(Error::Domain(format!("|p| = {} > 1", p.abs())));
    }
    Ok(())
}

fn check_p_open(p: f64) -> Result<()> {
    if !(p.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "|p| = {} >= 1: coordinate singularity at the poles",
            p.abs()
        )));
    }
    Ok(())
}

/// Energy of the full nonlinear Hamiltonian at a state.
pub fn hamiltonian_full(state: PhaseState, params: &ModelParams) -> Result<f64> {
    check_p_closed(state.p)?;
    let PhaseState { p, theta } = state;
    let s = (1.0 - p * p).sqrt();
    let c = theta.cos();
    Ok(params.epsilon * p
        + 0.5 * params.gamma * p * p
        + (params.delta + params.beta * p) * s * c
        + 0.5 * params.alpha * (1.0 - p * p) * c * c)
}

/// Right-hand sides (p_dot, theta_dot) of the coupled-mode equations,
/// with the pair-tunneling coefficient entering as alpha/2.
///
/// Equals (-dH/dtheta, +dH/dp) of [`hamiltonian_full`], and the Josephson
/// form p_dot = E_J sqrt(1-p^2) sin(theta),
/// theta_dot = E_C - E_J p cos(theta)/sqrt(1-p^2).
pub fn eom_full(state: PhaseState, params: &ModelParams) -> Result<(f64, f64)> {
    check_p_open(state.p)?;
    let PhaseState { p, theta } = state;
    let s = (1.0 - p * p).sqrt();
    let (sin_t, cos_t) = theta.sin_cos();
    let sin_2t = 2.0 * sin_t * cos_t;
    let i_pair = 0.5 * params.alpha;
    let p_dot = (params.delta + params.beta * p) * s * sin_t + i_pair * (1.0 - p * p) * sin_2t;
    let theta_dot = params.epsilon
        + params.gamma * p
        + (params.beta * (1.0 - 2.0 * p * p) - params.delta * p) / s * cos_t
        - params.alpha * p * cos_t * cos_t;
    Ok((p_dot, theta_dot))
}

/// Analytic Hessian of [`hamiltonian_full`] in (theta, p) order:
/// [[H_tt, H_tp], [H_tp, H_pp]].
pub fn hamiltonian_hessian(state: PhaseState, params: &ModelParams) -> Result<[[f64; 2]; 2]> {
    check_p_open(state.p)?;
    let PhaseState { p, theta } = state;
    let s = (1.0 - p * p).sqrt();
    let (sin_t, cos_t) = theta.sin_cos();
    let cos_2t = cos_t * cos_t - sin_t * sin_t;
    let sin_2t = 2.0 * sin_t * cos_t;
    let tun = params.delta + params.beta * p;

    let h_tt = -tun * s * cos_t - params.alpha * (1.0 - p * p) * cos_2t;
    let h_tp = -(params.beta * s - tun * p / s) * sin_t + params.alpha * p * sin_2t;
    let num = params.beta * (1.0 - 2.0 * p * p) - params.delta * p;
    let dnum = -4.0 * params.beta * p - params.delta;
    let h_pp = params.gamma + (dnum / s + p * num / (s * s * s)) * cos_t
        - params.alpha * cos_t * cos_t;
    Ok([[h_tt, h_tp], [h_tp, h_pp]])
}

/// Map the overlap integrals onto the five model parameters.
pub fn params_from_overlaps(o: &TwoModeOverlaps) -> ModelParams {
    ModelParams {
        delta: 2.0 * o.k + o.u12 + o.u21,
        epsilon: o.eps1 - o.eps2 + 0.5 * (o.u1 - o.u2),
        alpha: 2.0 * o.i_pair,
        beta: o.u12 - o.u21,
        gamma: 0.5 * (o.u1 + o.u2) - o.i_pair,
    }
}

/// Map (p, theta) to the unit sphere:
/// (sqrt(1-p^2) cos(theta), sqrt(1-p^2) sin(theta), p).
pub fn phase_to_spin(state: PhaseState) -> Result<SpinState> {
    check_p_closed(state.p)?;
    let s = (1.0 - state.p * state.p).sqrt();
    let (sin_t, cos_t) = state.theta.sin_cos();
    Ok(SpinState {
        sx: s * cos_t,
        sy: s * sin_t,
        sz: state.p,
    })
}

/// Anisotropic single-spin Hamiltonian
/// H = Delta Sx + eps Sz + alpha/2 Sx^2 + beta Sx Sz + gamma/2 Sz^2.
pub fn spin_hamiltonian(s: &SpinState, params: &ModelParams) -> f64 {
    params.delta * s.sx
        + params.epsilon * s.sz
        + 0.5 * params.alpha * s.sx * s.sx
        + params.beta * s.sx * s.sz
        + 0.5 * params.gamma * s.sz * s.sz
}

/// Classical spin equations of motion. The effective fields are
/// Delta' = Delta + alpha Sx + beta Sz along x and
/// eps' = eps + beta Sx + gamma Sz along z; the flow is norm-preserving
/// (output orthogonal to the input spin).
pub fn spin_eom(s: &SpinState, params: &ModelParams) -> [f64; 3] {
    let delta_eff = params.delta + params.alpha * s.sx + params.beta * s.sz;
    let eps_eff = params.epsilon + params.beta * s.sx + params.gamma * s.sz;
    [
        -eps_eff * s.sy,
        eps_eff * s.sx - delta_eff * s.sz,
        delta_eff * s.sy,
    ]
}

/// Effective Josephson fields at a state.
pub fn josephson_fields(state: PhaseState, params: &ModelParams) -> Result<JosephsonFields> {
    check_p_closed(state.p)?;
    let s = (1.0 - state.p * state.p).sqrt();
    let c = state.theta.cos();
    Ok(JosephsonFields {
        e_j: params.delta + params.beta * state.p + params.alpha * s * c,
        e_c: params.epsilon + params.gamma * state.p + params.beta * s * c,
    })
}

/// Atomic current across the barrier for near-equal populations:
/// J = N (K' sin(theta) + I/2 sin(2 theta)).
pub fn atomic_current(theta: f64, kprime: f64, i_pair: f64, n_atoms: f64) -> Result<f64> {
    if !(n_atoms >= 0.0) {
        return Err(Error::InvalidInput(format!("n_atoms = {n_atoms} < 0")));
    }
    Ok(n_atoms * (kprime * theta.sin() + 0.5 * i_pair * (2.0 * theta).sin()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_params(rng: &mut impl Rng) -> ModelParams {
        ModelParams::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    }

    #[test]
    fn hamiltonian_trivial_points() {
        let p = ModelParams::new(0.0, 0.0, 0.7, -0.4, 1.3);
        let h = hamiltonian_full(PhaseState::new(0.0, FRAC_PI_2), &p).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-15);

        let p = ModelParams::new(1.0, 0.0, 0.0, 0.0, 0.0);
        let h = hamiltonian_full(PhaseState::new(0.0, 0.0), &p).unwrap();
        assert_abs_diff_eq!(h, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hamiltonian_term_by_term_oracle() {
        // Independent term-by-term arithmetic at (p, theta) = (0.5, 0).
        let params = ModelParams::new(0.1, 0.2, 0.4, 0.3, 1.0);
        let state = PhaseState::new(0.5, 0.0);
        let oracle = {
            let t1 = 0.2 * 0.5;
            let t2 = 1.0 / 2.0 * 0.25;
            let t3 = (0.1 + 0.3 * 0.5) * (1.0f64 - 0.25).sqrt() * 1.0;
            let t4 = 0.4 / 2.0 * 0.75 * 1.0;
            t1 + t2 + t3 + t4
        };
        assert_abs_diff_eq!(oracle, 0.5915063509461096, epsilon = 1e-15);
        assert_abs_diff_eq!(
            hamiltonian_full(state, &params).unwrap(),
            oracle,
            epsilon = 1e-15
        );
    }

    #[test]
    fn hamiltonian_rejects_out_of_range_p() {
        let p = ModelParams::zero_field(1.0, 0.0, 1.0);
        assert!(hamiltonian_full(PhaseState::new(1.0001, 0.0), &p).is_err());
        assert!(eom_full(PhaseState::new(1.0, 0.0), &p).is_err());
    }

    #[test]
    fn eom_vanishes_at_symmetric_fixed_point() {
        let p = ModelParams::zero_field(0.9, 0.2, 1.4);
        let (pd, td) = eom_full(PhaseState::new(0.0, FRAC_PI_2), &p).unwrap();
        assert_abs_diff_eq!(pd, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(td, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eom_matches_central_difference_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..200 {
            let params = random_params(&mut rng);
            let state = PhaseState::new(rng.gen_range(-0.9..0.9), rng.gen_range(-PI..PI));
            let (pd, td) = eom_full(state, &params).unwrap();
            let dh_dtheta = (hamiltonian_full(PhaseState::new(state.p, state.theta + h), &params)
                .unwrap()
                - hamiltonian_full(PhaseState::new(state.p, state.theta - h), &params).unwrap())
                / (2.0 * h);
            let dh_dp = (hamiltonian_full(PhaseState::new(state.p + h, state.theta), &params)
                .unwrap()
                - hamiltonian_full(PhaseState::new(state.p - h, state.theta), &params).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(pd, -dh_dtheta, epsilon = 1e-8);
            assert_abs_diff_eq!(td, dh_dp, epsilon = 1e-8);
        }
    }

    #[test]
    fn eom_agrees_with_josephson_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let params = random_params(&mut rng);
            let state = PhaseState::new(rng.gen_range(-0.95..0.95), rng.gen_range(-PI..PI));
            let (pd, td) = eom_full(state, &params).unwrap();
            let JosephsonFields { e_j, e_c } = josephson_fields(state, &params).unwrap();
            let s = (1.0 - state.p * state.p).sqrt();
            let pd_j = e_j * s * state.theta.sin();
            let td_j = e_c - e_j * state.p * state.theta.cos() / s;
            assert_abs_diff_eq!(pd, pd_j, epsilon = 1e-14);
            assert_abs_diff_eq!(td, td_j, epsilon = 1e-14);
        }
    }

    #[test]
    fn eom_linearization_near_symmetric_origin() {
        // Small-p expansion at theta = 0 for a symmetric well:
        // theta_dot = -(Delta + alpha - gamma) p + O(p^3).
        let params = ModelParams::new(0.2, 0.0, 0.1, 0.0, 0.5);
        let p = 0.01;
        let (_, td) = eom_full(PhaseState::new(p, 0.0), &params).unwrap();
        let exact = 0.5 * p - 0.2 * p / (1.0 - p * p).sqrt() - 0.1 * p;
        assert_abs_diff_eq!(td, exact, epsilon = 1e-15);
        let linear = -(0.2 + 0.1 - 0.5) * p;
        assert_abs_diff_eq!(td, linear, epsilon = p.powi(3));
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-3;
        for _ in 0..100 {
            let params = random_params(&mut rng);
            let st = PhaseState::new(rng.gen_range(-0.8..0.8), rng.gen_range(-PI..PI));
            let hess = hamiltonian_hessian(st, &params).unwrap();
            let f = |p: f64, t: f64| hamiltonian_full(PhaseState::new(p, t), &params).unwrap();
            let h_tt = crate::numerics::deriv2(|t| f(st.p, t), st.theta, h);
            let h_pp = crate::numerics::deriv2(|p| f(p, st.theta), st.p, h);
            let h_tp = crate::numerics::deriv2_mixed(|t, p| f(p, t), st.theta, st.p, h);
            assert_abs_diff_eq!(hess[0][0], h_tt, epsilon = 1e-7);
            assert_abs_diff_eq!(hess[1][1], h_pp, epsilon = 1e-7);
            assert_abs_diff_eq!(hess[0][1], h_tp, epsilon = 1e-7);
        }
    }

    #[test]
    fn overlap_parameter_map() {
        let o = TwoModeOverlaps { k: 1.0, ..Default::default() };
        let p = params_from_overlaps(&o);
        assert_eq!(p.delta, 2.0);
        assert_eq!((p.epsilon, p.alpha, p.beta, p.gamma), (0.0, 0.0, 0.0, 0.0));

        let o = TwoModeOverlaps { u1: 0.7, u2: 0.7, ..Default::default() };
        let p = params_from_overlaps(&o);
        assert_eq!(p.gamma, 0.7);
        assert_eq!((p.delta, p.epsilon, p.alpha, p.beta), (0.0, 0.0, 0.0, 0.0));

        let o = TwoModeOverlaps {
            eps1: 1.0,
            eps2: 0.5,
            k: 0.2,
            u1: 0.3,
            u2: 0.1,
            u12: 0.05,
            u21: 0.02,
            i_pair: 0.04,
        };
        let p = params_from_overlaps(&o);
        assert_abs_diff_eq!(p.delta, 0.47, epsilon = 1e-15);
        assert_abs_diff_eq!(p.epsilon, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p.alpha, 0.08, epsilon = 1e-15);
        assert_abs_diff_eq!(p.beta, 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(p.gamma, 0.16, epsilon = 1e-15);
    }

    #[test]
    fn phase_to_spin_examples() {
        let s = phase_to_spin(PhaseState::new(0.0, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(s.sx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sy, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sz, 0.0, epsilon = 1e-15);

        let s = phase_to_spin(PhaseState::new(1.0, 2.3)).unwrap();
        assert_eq!((s.sx, s.sy, s.sz), (0.0, 0.0, 1.0));

        let s = phase_to_spin(PhaseState::new(0.6, 0.0)).unwrap();
        assert_abs_diff_eq!(s.sx, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sy, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sz, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn phase_to_spin_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let st = PhaseState::new(rng.gen_range(-1.0..1.0), rng.gen_range(-10.0..10.0));
            let s = phase_to_spin(st).unwrap();
            assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn spin_hamiltonian_examples_and_oracle() {
        let p = ModelParams::new(0.0, 0.0, 0.3, 0.8, 0.9);
        let s = SpinState::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(spin_hamiltonian(&s, &p), 0.0, epsilon = 1e-15);

        let p = ModelParams::new(0.0, 0.0, 2.0, 0.0, 0.0);
        let s = SpinState::new(1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(spin_hamiltonian(&s, &p), 1.0, epsilon = 1e-15);

        let p = ModelParams::new(1.0, 0.2, 0.5, 0.3, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n < 1e-3 {
                continue;
            }
            let s = SpinState::new(v[0] / n, v[1] / n, v[2] / n).unwrap();
            let oracle = 1.0 * s.sx + 0.2 * s.sz + 0.5 / 2.0 * s.sx * s.sx
                + 0.3 * s.sx * s.sz + 0.7 / 2.0 * s.sz * s.sz;
            assert_abs_diff_eq!(spin_hamiltonian(&s, &p), oracle, epsilon = 1e-14);
        }
    }

    #[test]
    fn spin_hamiltonian_consistent_with_phase_hamiltonian() {
        // The difference must be a state-independent constant; for this
        // parametrization it is identically zero.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let params = random_params(&mut rng);
            let st = PhaseState::new(rng.gen_range(-0.999..0.999), rng.gen_range(-PI..PI));
            let h1 = hamiltonian_full(st, &params).unwrap();
            let h2 = spin_hamiltonian(&phase_to_spin(st).unwrap(), &params);
            assert_abs_diff_eq!(h1 - h2, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spin_eom_fixed_points_and_orthogonality() {
        let zero_field = ModelParams::zero_field(0.9, 0.4, 1.1);
        for sy in [1.0, -1.0] {
            let s = SpinState::new(0.0, sy, 0.0).unwrap();
            let ds = spin_eom(&s, &zero_field);
            assert_eq!(ds, [0.0, 0.0, 0.0]);
        }

        let p = ModelParams::new(1.0, 0.0, 0.0, 0.0, 0.0);
        let s = SpinState::new(0.0, 0.0, 1.0).unwrap();
        let ds = spin_eom(&s, &p);
        assert_abs_diff_eq!(ds[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ds[1], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ds[2], 0.0, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..500 {
            let params = random_params(&mut rng);
            let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n < 1e-3 {
                continue;
            }
            let s = SpinState::new(v[0] / n, v[1] / n, v[2] / n).unwrap();
            let ds = spin_eom(&s, &params);
            let dot = s.sx * ds[0] + s.sy * ds[1] + s.sz * ds[2];
            assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn spin_eom_mirrors_phase_eom_in_sz() {
        // d(Sz)/dt must equal p_dot because Sz = p.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let params = random_params(&mut rng);
            let st = PhaseState::new(rng.gen_range(-0.95..0.95), rng.gen_range(-PI..PI));
            let (pd, _) = eom_full(st, &params).unwrap();
            let ds = spin_eom(&phase_to_spin(st).unwrap(), &params);
            assert_abs_diff_eq!(ds[2], pd, epsilon = 1e-14);
        }
    }

    #[test]
    fn josephson_fields_examples() {
        let p = ModelParams::zero_field(0.4, 0.9, 1.2);
        let f = josephson_fields(PhaseState::new(0.0, FRAC_PI_2), &p).unwrap();
        assert_abs_diff_eq!(f.e_j, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.e_c, 0.0, epsilon = 1e-15);

        let p = ModelParams::new(1.0, 0.0, 0.0, 0.0, 0.0);
        let f = josephson_fields(PhaseState::new(0.37, 2.2), &p).unwrap();
        assert_eq!((f.e_j, f.e_c), (1.0, 0.0));

        let p = ModelParams::new(0.1, 0.2, 0.4, 0.3, 1.0);
        let st = PhaseState::new(0.3, 1.0);
        let f = josephson_fields(st, &p).unwrap();
        let s = (1.0f64 - 0.09).sqrt();
        assert_abs_diff_eq!(f.e_j, 0.1 + 0.3 * 0.3 + 0.4 * s * 1.0f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.e_c, 0.2 + 1.0 * 0.3 + 0.3 * s * 1.0f64.cos(), epsilon = 1e-15);
    }

    #[test]
    fn atomic_current_examples() {
        assert_eq!(atomic_current(0.0, 0.3, 0.2, 500.0).unwrap(), 0.0);
        // Pure Josephson limit: I = 0 gives J = N K' sin(theta).
        for theta in [0.3, 1.1, 2.9] {
            let j = atomic_current(theta, 0.25, 0.0, 800.0).unwrap();
            assert_abs_diff_eq!(j, 800.0 * 0.25 * theta.sin(), epsilon = 1e-12);
        }
        let j = atomic_current(PI / 4.0, 0.2, 0.1, 1000.0).unwrap();
        let oracle = 1000.0 * (0.2 * 2.0f64.sqrt() / 2.0 + 0.05 * 1.0);
        assert_abs_diff_eq!(j, oracle, epsilon = 1e-12);
        assert!(atomic_current(0.1, 0.2, 0.1, -1.0).is_err());
    }
}
