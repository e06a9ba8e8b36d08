//! Time-periodic solutions of periodically forced damped evolution equations
//! on finite-dimensional models.

pub mod forcing;
pub mod io;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod periodic;
pub mod resonance;
pub mod stability;

pub use linalg::{C64, CMat, CVec};
pub use operator::{make_state_space, FieldTag, Layout, Model, ModelParts, OperatorError, SpectrumReport, StateSpace};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Forcing(#[from] forcing::ForcingError),
    #[error(transparent)]
    Solver(#[from] periodic::SolverError),
    #[error(transparent)]
    Stability(#[from] stability::StabilityError),
    #[error(transparent)]
    Resonance(#[from] resonance::ResonanceError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

impl Error {
    /// Module-qualified variant name, e.g. `periodic_solver::KernelObstruction`.
    pub fn name(&self) -> String {
        match self {
            Self::Operator(e) => format!("operator_core::{}", e.name()),
            Self::Model(e) => e.name(),
            Self::Forcing(e) => e.name(),
            Self::Solver(e) => e.name(),
            Self::Stability(e) => e.name(),
            Self::Resonance(e) => e.name(),
            Self::Io(e) => e.name(),
        }
    }

    /// Input that failed validation, as opposed to a numerical failure.
    pub fn is_validation(&self) -> bool {
        use forcing::ForcingError as F;
        use models::ModelError as M;
        use periodic::SolverError as S;
        match self {
            Self::Operator(e) => is_operator_validation(e),
            Self::Model(e) => match e {
                M::InvalidGrid(_) | M::ZeroDamping | M::NonAxisymmetricDamping | M::InvalidDamping(_) | M::DegreeMismatch { .. } => true,
                M::Operator(o) => is_operator_validation(o),
                _ => false,
            },
            Self::Forcing(e) => matches!(e, F::DimensionMismatch { .. } | F::Invalid(_) | F::DerivativesUnavailable { .. }),
            Self::Solver(e) => matches!(e, S::NotFourier | S::MissingControl | S::InvalidNonlinearity(_) | S::KernelModelUnsupported),
            Self::Stability(e) => matches!(e, stability::StabilityError::InvalidGrid(_)),
            Self::Resonance(e) => matches!(e, resonance::ResonanceError::InvalidInput(_)),
            Self::Io(_) => false,
        }
    }
}

fn is_operator_validation(e: &OperatorError) -> bool {
    matches!(
        e,
        OperatorError::DimensionMismatch { .. } | OperatorError::NonHermitian { .. } | OperatorError::NotPositiveDefinite { .. } | OperatorError::NonFiniteInput | OperatorError::InvalidExponent { .. } | OperatorError::InvalidProjector(_)
    )
}
