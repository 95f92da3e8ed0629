//! Two-mode condensate dynamics and the geometry of its adiabatic angle.
//!
//! This crate simulates a nonlinear two-mode model (a Bose-Josephson
//! junction) in canonical (p, theta) form, finds and classifies its fixed
//! points, integrates its flows with an adaptive embedded Runge-Kutta
//! method, and computes the Hannay angle of the linearized oscillator
//! along closed parameter loops by three independent routes:
//!
//! 1. direct adiabatic evolution of the angle variable,
//! 2. surface quadrature of the angle two-form, and
//! 3. holonomy / area on the unit hyperboloid,
//!
//! where route 3 rests on the identity between the angle two-form and
//! half the curvature two-form of a 2+1-dimensional de Sitter universe,
//! verified numerically by the [`desitter`] module.

pub mod desitter;
pub mod dynamics;
pub mod error;
pub mod fixed_points;
pub mod gp;
pub mod hannay;
pub mod model;
pub mod numerics;
pub mod ode;

pub use error::{Error, Result};
pub use model::{
    JosephsonFields, ModelParams, PhaseState, SpinState, TwoModeOverlaps,
};
