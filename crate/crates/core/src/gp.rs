//! Two-mode parameters from a one-dimensional double-well potential.
//!
//! A localized Gaussian ansatz stands in for the well modes: two
//! normalized Gaussians, symmetrically orthogonalized so the two-mode
//! overlap conditions hold on the grid, then fed through the overlap
//! integrals (kinetic term by 3-point central differences, everything
//! else by composite-Simpson quadrature). The output feeds
//! [`crate::model::params_from_overlaps`].

use crate::error::{Error, Result};
use crate::model::{params_from_overlaps, ModelParams, TwoModeOverlaps};
use crate::numerics::simpson_weights;
use serde::{Deserialize, Serialize};

/// One-dimensional double well: harmonic confinement of frequency
/// omega_x shifted by dx_offset, plus a periodic barrier of depth v0 and
/// period d. hbar = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell1D {
    pub mass: f64,
    pub omega_x: f64,
    pub dx_offset: f64,
    pub v0: f64,
    pub d: f64,
}

impl DoubleWell1D {
    fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !(self.v0 >= 0.0) || !(self.mass > 0.0) {
            return Err(Error::InvalidInput(
                "double well needs d > 0, v0 >= 0, mass > 0".into(),
            ));
        }
        Ok(())
    }
}

/// V(x) = m/2 omega_x^2 (x - dx)^2 + V0 cos^2(pi x / d).
pub fn potential_eval(x: f64, w: &DoubleWell1D) -> f64 {
    let harmonic = 0.5 * w.mass * w.omega_x * w.omega_x * (x - w.dx_offset).powi(2);
    let barrier = w.v0 * (std::f64::consts::PI * x / w.d).cos().powi(2);
    harmonic + barrier
}

/// Uniform spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.n - 1)
    }
}

/// Two real sampled mode functions, orthonormal under composite-Simpson
/// quadrature on their grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModePair {
    pub grid: Grid1D,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl ModePair {
    /// Overlap matrix under the grid quadrature.
    pub fn overlap_matrix(&self) -> [[f64; 2]; 2] {
        let w = simpson_weights(self.grid.n, self.grid.dx);
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(&w).map(|((x, y), wk)| x * y * wk).sum()
        };
        let s11 = dot(&self.phi1, &self.phi1);
        let s12 = dot(&self.phi1, &self.phi2);
        let s22 = dot(&self.phi2, &self.phi2);
        [[s11, s12], [s12, s22]]
    }

    fn orthonormality_residual(&self) -> f64 {
        let s = self.overlap_matrix();
        (s[0][0] - 1.0).abs().max((s[1][1] - 1.0).abs()).max(s[0][1].abs())
    }

    /// Fraction of each mode's probability mass on its own side of the
    /// midpoint between the two centers.
    pub fn side_mass(&self, centers: (f64, f64)) -> (f64, f64) {
        let mid = 0.5 * (centers.0 + centers.1);
        let w = simpson_weights(self.grid.n, self.grid.dx);
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for k in 0..self.grid.n {
            let x = self.grid.x(k);
            let on_first_side = (x - mid) * (centers.0 - mid) > 0.0;
            if on_first_side {
                m1 += self.phi1[k] * self.phi1[k] * w[k];
            } else {
                m2 += self.phi2[k] * self.phi2[k] * w[k];
            }
        }
        (m1, m2)
    }
}

/// Normalized Gaussians of width sigma at the two centers, Loewdin
/// orthogonalized so the overlap matrix is the identity on the grid.
///
/// Requires the grid to extend at least 6 sigma beyond both centers and
/// to resolve sigma with dx <= sigma/8.
pub fn gaussian_modes(centers: (f64, f64), sigma: f64, grid: &Grid1D) -> Result<ModePair> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput("sigma must be positive".into()));
    }
    if grid.n < 8 || !(grid.dx > 0.0) {
        return Err(Error::Discretization("grid needs n >= 8 and dx > 0".into()));
    }
    if grid.dx > sigma / 8.0 {
        return Err(Error::Discretization(format!(
            "dx = {} too coarse for sigma = {sigma} (need dx <= sigma/8)",
            grid.dx
        )));
    }
    let lo = centers.0.min(centers.1);
    let hi = centers.0.max(centers.1);
    if grid.x0 > lo - 6.0 * sigma || grid.x_end() < hi + 6.0 * sigma {
        return Err(Error::Discretization(
            "grid must span at least 6 sigma beyond both centers".into(),
        ));
    }

    let gauss = |c: f64| -> Vec<f64> {
        let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).powf(0.25);
        (0..grid.n)
            .map(|k| {
                let x = grid.x(k);
                norm * (-(x - c) * (x - c) / (4.0 * sigma * sigma)).exp()
            })
            .collect()
    };
    let mut pair = ModePair { grid: *grid, phi1: gauss(centers.0), phi2: gauss(centers.1) };

    // Normalize each mode under the grid quadrature, then apply the
    // symmetric orthogonalization S^(-1/2) in closed form.
    let s = pair.overlap_matrix();
    let n1 = s[0][0].sqrt();
    let n2 = s[1][1].sqrt();
    for v in pair.phi1.iter_mut() {
        *v /= n1;
    }
    for v in pair.phi2.iter_mut() {
        *v /= n2;
    }
    let s12 = pair.overlap_matrix()[0][1];
    if s12.abs() >= 1.0 {
        return Err(Error::Discretization(format!(
            "modes are numerically linearly dependent (overlap {s12})"
        )));
    }
    let u = 1.0 / (1.0 + s12).sqrt();
    let v = 1.0 / (1.0 - s12).sqrt();
    let diag = 0.5 * (u + v);
    let off = 0.5 * (u - v);
    let phi1: Vec<f64> = pair
        .phi1
        .iter()
        .zip(&pair.phi2)
        .map(|(a, b)| diag * a + off * b)
        .collect();
    let phi2: Vec<f64> = pair
        .phi1
        .iter()
        .zip(&pair.phi2)
        .map(|(a, b)| off * a + diag * b)
        .collect();
    pair.phi1 = phi1;
    pair.phi2 = phi2;

    let residual = pair.orthonormality_residual();
    if residual > 1e-10 {
        return Err(Error::Discretization(format!(
            "orthonormality residual {residual:.3e} after orthogonalization"
        )));
    }
    Ok(pair)
}

/// Second derivative on the grid by the 3-point stencil, zero outside.
fn second_derivative(phi: &[f64], dx: f64) -> Vec<f64> {
    let n = phi.len();
    let mut out = vec![0.0; n];
    for k in 0..n {
        let left = if k > 0 { phi[k - 1] } else { 0.0 };
        let right = if k + 1 < n { phi[k + 1] } else { 0.0 };
        out[k] = (right - 2.0 * phi[k] + left) / (dx * dx);
    }
    out
}

/// Overlap integrals of the mode pair in the well: single-mode energies
/// and tunneling from the kinetic-plus-potential operator, interaction
/// integrals scaled by g * n_atoms.
pub fn overlap_integrals(
    modes: &ModePair,
    well: &DoubleWell1D,
    g: f64,
    n_atoms: f64,
) -> Result<TwoModeOverlaps> {
    well.validate()?;
    if !(n_atoms >= 0.0) {
        return Err(Error::InvalidInput("n_atoms must be >= 0".into()));
    }
    let residual = modes.orthonormality_residual();
    if residual > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "mode pair is not orthonormal (residual {residual:.3e})"
        )));
    }
    let grid = &modes.grid;
    let w = simpson_weights(grid.n, grid.dx);
    let vpot: Vec<f64> = (0..grid.n).map(|k| potential_eval(grid.x(k), well)).collect();
    let d2_1 = second_derivative(&modes.phi1, grid.dx);
    let d2_2 = second_derivative(&modes.phi2, grid.dx);
    let kin = -0.5 / well.mass;

    let mut eps1 = 0.0;
    let mut eps2 = 0.0;
    let mut k_tun = 0.0;
    let mut u1 = 0.0;
    let mut u2 = 0.0;
    let mut u12 = 0.0;
    let mut u21 = 0.0;
    let mut i_pair = 0.0;
    for k in 0..grid.n {
        let (p1, p2) = (modes.phi1[k], modes.phi2[k]);
        let h1 = kin * d2_1[k] + vpot[k] * p1;
        let h2 = kin * d2_2[k] + vpot[k] * p2;
        eps1 += w[k] * p1 * h1;
        eps2 += w[k] * p2 * h2;
        k_tun += w[k] * p1 * h2;
        u1 += w[k] * p1 * p1 * p1 * p1;
        u2 += w[k] * p2 * p2 * p2 * p2;
        u12 += w[k] * p1 * p1 * p1 * p2;
        u21 += w[k] * p2 * p2 * p2 * p1;
        i_pair += w[k] * p1 * p1 * p2 * p2;
    }
    let gn = g * n_atoms;
    Ok(TwoModeOverlaps {
        eps1,
        eps2,
        k: k_tun,
        u1: gn * u1,
        u2: gn * u2,
        u12: gn * u12,
        u21: gn * u21,
        i_pair: gn * i_pair,
    })
}

/// Map overlaps to model parameters (delegates to the model layer).
pub fn build_model(overlaps: &TwoModeOverlaps) -> ModelParams {
    params_from_overlaps(overlaps)
}

/// Full well geometry as read from the command-line JSON input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WellSpec {
    pub m: f64,
    pub omega_x: f64,
    pub dx_offset: f64,
    pub v0: f64,
    pub d: f64,
    pub sigma: f64,
    pub centers: (f64, f64),
    pub grid: Grid1D,
    pub g: f64,
    pub n_atoms: f64,
}

/// Provenance attached to a derived model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpMeta {
    pub well: DoubleWell1D,
    pub sigma: f64,
    pub centers: (f64, f64),
    pub grid: Grid1D,
    pub g: f64,
    pub n_atoms: f64,
    pub mode_ansatz: String,
    pub orthonormality_residual: f64,
}

/// Model parameters with the geometry they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpModel {
    pub params: ModelParams,
    pub overlaps: TwoModeOverlaps,
    pub meta: GpMeta,
}

/// Run the whole pipeline: modes, overlaps, parameters.
pub fn gp_pipeline(spec: &WellSpec) -> Result<GpModel> {
    let well = DoubleWell1D {
        mass: spec.m,
        omega_x: spec.omega_x,
        dx_offset: spec.dx_offset,
        v0: spec.v0,
        d: spec.d,
    };
    let modes = gaussian_modes(spec.centers, spec.sigma, &spec.grid)?;
    let overlaps = overlap_integrals(&modes, &well, spec.g, spec.n_atoms)?;
    let params = build_model(&overlaps);
    Ok(GpModel {
        params,
        overlaps,
        meta: GpMeta {
            well,
            sigma: spec.sigma,
            centers: spec.centers,
            grid: spec.grid,
            g: spec.g,
            n_atoms: spec.n_atoms,
            mode_ansatz: "gaussian-loewdin".into(),
            orthonormality_residual: modes.orthonormality_residual(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym_spec() -> WellSpec {
        WellSpec {
            m: 1.0,
            omega_x: 0.8,
            dx_offset: 0.0,
            v0: 2.0,
            d: 3.0,
            sigma: 0.25,
            centers: (-1.5, 1.5),
            grid: Grid1D { x0: -6.0, dx: 0.025, n: 481 },
            g: 0.1,
            n_atoms: 1000.0,
        }
    }

    #[test]
    fn potential_values() {
        let w = DoubleWell1D { mass: 1.0, omega_x: 1.0, dx_offset: 0.0, v0: 2.5, d: 2.0 };
        assert_abs_diff_eq!(potential_eval(0.0, &w), 2.5, epsilon = 1e-15);
        // cos^2(pi/2) = 0 at half period; only the harmonic term is left.
        assert_abs_diff_eq!(
            potential_eval(1.0, &w),
            0.5 * 1.0 * 1.0 * 1.0,
            epsilon = 1e-14
        );

        let w = DoubleWell1D { mass: 1.0, omega_x: 1.0, dx_offset: 0.2, v0: 2.0, d: 2.0 };
        let x = 0.5;
        let oracle = 0.5 * (x - 0.2_f64).powi(2)
            + 2.0 * (std::f64::consts::PI * x / 2.0).cos().powi(2);
        assert_abs_diff_eq!(potential_eval(x, &w), oracle, epsilon = 1e-14);
    }

    #[test]
    fn modes_are_orthonormal_and_symmetric() {
        let spec = sym_spec();
        let modes = gaussian_modes(spec.centers, spec.sigma, &spec.grid).unwrap();
        let s = modes.overlap_matrix();
        assert_abs_diff_eq!(s[0][0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s[1][1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s[0][1], 0.0, epsilon = 1e-10);
        // Mirror symmetry: phi2(x) = phi1(-x). The grid is symmetric
        // about zero, so reversal maps grid points to grid points.
        for k in 0..spec.grid.n {
            let mirror = spec.grid.n - 1 - k;
            assert_abs_diff_eq!(modes.phi2[k], modes.phi1[mirror], epsilon = 1e-12);
        }
        // Localization: nearly all mass on the home side at 12 sigma.
        let (m1, m2) = modes.side_mass(spec.centers);
        assert!(m1 > 0.95 && m2 > 0.95, "side masses {m1} {m2}");
    }

    #[test]
    fn far_separated_modes_need_no_orthogonalization() {
        let sigma = 0.2;
        let grid = Grid1D { x0: -4.0, dx: 0.02, n: 401 };
        let centers = (-1.0, 1.0); // 10 sigma apart
        let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).powf(0.25);
        let raw1: Vec<f64> = (0..grid.n)
            .map(|k| norm * (-(grid.x(k) + 1.0).powi(2) / (4.0 * sigma * sigma)).exp())
            .collect();
        let modes = gaussian_modes(centers, sigma, &grid).unwrap();
        // Raw overlap is negligible, so orthogonalization is a no-op.
        let max_change = modes
            .phi1
            .iter()
            .zip(&raw1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_change < 1e-9, "orthogonalization changed modes by {max_change}");
    }

    #[test]
    fn quartic_integral_matches_gaussian_closed_form() {
        // For a lone normalized Gaussian of width sigma the quartic
        // integral is 1/(2 sigma sqrt(pi)).
        let sigma = 0.2;
        let grid = Grid1D { x0: -4.0, dx: 0.02, n: 401 };
        let modes = gaussian_modes((-1.0, 1.0), sigma, &grid).unwrap();
        let well = DoubleWell1D { mass: 1.0, omega_x: 0.0, dx_offset: 0.0, v0: 0.0, d: 1.0 };
        let o = overlap_integrals(&modes, &well, 1.0, 1.0).unwrap();
        let expected = 1.0 / (2.0 * sigma * std::f64::consts::PI.sqrt());
        assert_abs_diff_eq!(o.u1, expected, epsilon = 1e-8);
        assert_abs_diff_eq!(o.u2, expected, epsilon = 1e-8);
        // All cross-mode integrals vanish at 10 sigma separation.
        let scale = o.u1;
        assert!(o.k.abs() < 1e-8 * scale);
        assert!(o.u12.abs() < 1e-8 * scale);
        assert!(o.u21.abs() < 1e-8 * scale);
        assert!(o.i_pair.abs() < 1e-8 * scale);
    }

    #[test]
    fn symmetric_well_cancels_eps_and_beta() {
        let model = gp_pipeline(&sym_spec()).unwrap();
        assert_abs_diff_eq!(model.overlaps.eps1, model.overlaps.eps2, epsilon = 1e-12);
        assert_abs_diff_eq!(model.overlaps.u12, model.overlaps.u21, epsilon = 1e-12);
        assert_abs_diff_eq!(model.params.epsilon, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(model.params.beta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_coupling_keeps_only_tunneling() {
        let spec = WellSpec { g: 0.0, ..sym_spec() };
        let model = gp_pipeline(&spec).unwrap();
        assert_eq!(model.params.alpha, 0.0);
        assert_eq!(model.params.beta, 0.0);
        assert_eq!(model.params.gamma, 0.0);
        assert_abs_diff_eq!(model.params.delta, 2.0 * model.overlaps.k, epsilon = 1e-15);
    }

    #[test]
    fn grid_doubling_converged() {
        let spec = sym_spec();
        let fine = WellSpec {
            grid: Grid1D { x0: spec.grid.x0, dx: spec.grid.dx / 2.0, n: spec.grid.n * 2 - 1 },
            ..spec.clone()
        };
        let a = gp_pipeline(&spec).unwrap().overlaps;
        let b = gp_pipeline(&fine).unwrap().overlaps;
        for (x, y) in [
            (a.eps1, b.eps1),
            (a.eps2, b.eps2),
            (a.k, b.k),
            (a.u1, b.u1),
            (a.u2, b.u2),
            (a.u12, b.u12),
            (a.u21, b.u21),
            (a.i_pair, b.i_pair),
        ] {
            assert!((x - y).abs() < 1e-8, "overlap moved {x} -> {y}");
        }
    }

    #[test]
    fn pipeline_is_bit_deterministic() {
        let a = gp_pipeline(&sym_spec()).unwrap();
        let b = gp_pipeline(&sym_spec()).unwrap();
        assert_eq!(a.params.delta.to_bits(), b.params.delta.to_bits());
        assert_eq!(a.params.epsilon.to_bits(), b.params.epsilon.to_bits());
        assert_eq!(a.params.alpha.to_bits(), b.params.alpha.to_bits());
        assert_eq!(a.params.beta.to_bits(), b.params.beta.to_bits());
        assert_eq!(a.params.gamma.to_bits(), b.params.gamma.to_bits());
    }

    #[test]
    fn coarse_or_short_grids_are_rejected() {
        let spec = sym_spec();
        let coarse = Grid1D { x0: -6.0, dx: 0.2, n: 61 };
        assert!(matches!(
            gaussian_modes(spec.centers, spec.sigma, &coarse),
            Err(Error::Discretization(_))
        ));
        let short = Grid1D { x0: -2.0, dx: 0.025, n: 161 };
        assert!(matches!(
            gaussian_modes(spec.centers, spec.sigma, &short),
            Err(Error::Discretization(_))
        ));
        // Non-orthonormal input to the overlap integrals.
        let modes = gaussian_modes(spec.centers, spec.sigma, &spec.grid).unwrap();
        let mut broken = modes.clone();
        for v in broken.phi1.iter_mut() {
            *v *= 1.1;
        }
        let well = DoubleWell1D { mass: 1.0, omega_x: 1.0, dx_offset: 0.0, v0: 1.0, d: 3.0 };
        assert!(matches!(
            overlap_integrals(&broken, &well, 0.1, 100.0),
            Err(Error::InvalidInput(_))
        ));
    }
}
