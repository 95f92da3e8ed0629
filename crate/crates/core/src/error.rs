//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model evaluation, geometry, and integration.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state lies outside the domain of an operation (e.g. |p| > 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// alpha*gamma = beta^2 makes a fixed-point denominator vanish.
    #[error("singular denominator: {0}")]
    SingularDenominator(String),

    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Action-angle variables require omega^2 > 0 and c > 0.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// The angle variable is undefined at the phase-space origin.
    #[error("undefined angle at the origin of the oscillator phase plane")]
    UndefinedAngle,

    /// A point or loop touches the cone omega^2 = 0 where the angle
    /// two-form diverges.
    #[error("cone singularity: {0}")]
    ConeSingularity(String),

    /// No spanning surface could be built inside the validity region.
    #[error("surface construction failed: {0}")]
    SurfaceConstruction(String),

    /// The azimuth is undefined for a loop passing through the pole psi = 0.
    #[error("phi undefined: loop passes through the hyperboloid pole")]
    UndefinedPhi,

    /// A chart is degenerate at the requested point.
    #[error("chart degeneracy: {0}")]
    ChartDegeneracy(String),

    /// A point lies outside a chart's domain.
    #[error("chart domain: {0}")]
    ChartDomain(String),

    /// A grid is too coarse or too short for the requested accuracy.
    #[error("discretization error: {0}")]
    Discretization(String),

    /// Step size underflow or step-count exhaustion; carries the last
    /// valid state so callers can inspect partial progress.
    #[error("integration failure at t = {t}: {reason}")]
    IntegrationFailure {
        reason: String,
        t: f64,
        state: Vec<f64>,
    },

    /// The trajectory reached the coordinate singularity |p| = 1.
    #[error("pole reached at t = {t}: |p| -> 1")]
    PoleExit { t: f64, state: Vec<f64> },

    /// Quadrature failed to converge to the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

impl Error {
    /// True for errors that signal bad inputs rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::SingularDenominator(_)
                | Error::InvalidInput(_)
                | Error::UnsupportedRegime(_)
                | Error::UndefinedAngle
                | Error::ConeSingularity(_)
                | Error::UndefinedPhi
                | Error::ChartDegeneracy(_)
                | Error::ChartDomain(_)
                | Error::Discretization(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
