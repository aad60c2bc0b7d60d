use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Variants are grouped by [`ErrorClass`] so that drivers can map them onto
/// exit codes without matching every variant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("requested depth {requested} exceeds the {available} stored partial quotients")]
    OutOfDepth { requested: usize, available: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "cannot certify ||k omega|| at depth {depth}: convergent denominators need about {required_bits} bits"
    )]
    Precision { depth: usize, required_bits: u64 },

    #[error("big-integer budget of {budget_bits} bits exceeded; achieved depth {achieved_depth}")]
    Budget {
        achieved_depth: usize,
        budget_bits: u64,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("SL(2,R) integrity error: {0}")]
    Integrity(String),

    #[error("determinant drift {drift:.3e} exceeds tolerance {tolerance:.1e}; use a smaller step than h = {step}")]
    StepSize {
        drift: f64,
        tolerance: f64,
        step: f64,
    },

    #[error("scale error: {0}")]
    Scale(String),

    #[error("two-step bound violated: max(|B^2 phi|, |B phi|, |B^-1 phi|) = {max_norm:.6e} < 1/4")]
    BoundViolation { max_norm: f64 },

    #[error(
        "three-block claim violated at q = {q}: min over phi of the block maximum is {min_max:.6e} although D1 = {d1:.3e}, D2 = {d2:.3e}"
    )]
    TheoryViolation { q: u64, min_max: f64, d1: f64, d2: f64 },
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input or configuration.
    Config,
    /// A mathematical bound or internal invariant failed: indicates a numerics bug.
    Violation,
    /// The request exceeds what finite precision can represent.
    ScaleBudget,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::OutOfDepth { .. } | Error::Precondition(_) | Error::Config(_) => {
                ErrorClass::Config
            }
            Error::InvariantViolation(_)
            | Error::Integrity(_)
            | Error::StepSize { .. }
            | Error::BoundViolation { .. }
            | Error::TheoryViolation { .. } => ErrorClass::Violation,
            Error::Precision { .. } | Error::Budget { .. } | Error::Scale(_) => {
                ErrorClass::ScaleBudget
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
