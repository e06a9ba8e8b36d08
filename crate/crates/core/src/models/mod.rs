//! Builders for damped wave, Schrödinger, heat–wave and boundary-forced models.

mod damping;
mod heat_wave;
mod sphere;
mod wave;

use thiserror::Error;

use crate::operator::OperatorError;

pub use damping::DampingProfile;
pub use heat_wave::build_heat_wave_1d;
pub use sphere::{associated_legendre_normalized, build_sphere_schrodinger, equatorial_harmonic, SphereBlockModel};
pub use wave::{build_boundary_forced_wave, build_damped_wave_circle, build_damped_wave_interval, dirichlet_laplacian};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("damping integrates to zero")]
    ZeroDamping,
    #[error("damping profile is not a function of x3 alone")]
    NonAxisymmetricDamping,
    #[error("multiplication matrix changed by {change:e} under node refinement")]
    QuadratureUnderResolved { change: f64 },
    #[error("invalid damping profile: {0}")]
    InvalidDamping(String),
    #[error("damping {min} falls below the required level {eta} on the control region")]
    WeakDamping { min: f64, eta: f64 },
    #[error("block order {m} does not match degree {j}")]
    DegreeMismatch { m: usize, j: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl ModelError {
    pub fn name(&self) -> String {
        let local = match self {
            Self::InvalidGrid(_) => "InvalidGrid",
            Self::ZeroDamping => "ZeroDamping",
            Self::NonAxisymmetricDamping => "NonAxisymmetricDamping",
            Self::QuadratureUnderResolved { .. } => "QuadratureUnderResolved",
            Self::InvalidDamping(_) => "InvalidDamping",
            Self::WeakDamping { .. } => "WeakDamping",
            Self::DegreeMismatch { .. } => "DegreeMismatch",
            Self::Operator(e) => return format!("operator_core::{}", e.name()),
        };
        format!("models::{local}")
    }
}
