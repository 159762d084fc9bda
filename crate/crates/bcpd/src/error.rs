//! Error type shared by all analysis modules.

use std::fmt;

/// Errors reported by the analysis routines.
///
/// Variants carry just enough context to diagnose the failure; callers that
/// need to branch on the failure mode can match on the variant directly.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A linear solve or inversion hit a pivot below the singularity threshold.
    SingularMatrix,
    /// An iteration (eigenvalue QR, fixed-point solve, paced simulation)
    /// exhausted its budget without meeting its tolerance.
    NoConvergence(String),
    /// Operands have incompatible shapes.
    DimensionMismatch(String),
    /// A structural condition required by the requested operation does not
    /// hold for this map (wrong fixed-point side, wrong spectrum, ...).
    ConditionViolated(String),
    /// A pacing amplitude of zero was supplied where the operation divides by it.
    DegenerateDelta,
    /// Parameter combination at which the requested quantity diverges.
    DegenerateInput,
    /// The border gradient vanishes at the candidate bifurcation point.
    DegenerateBorder,
    /// The requested closed form is not valid for these parameter values.
    OutOfRegime(String),
    /// A sign-change bracket could not be established.
    NoBracket(String),
    /// A user-supplied map returned non-finite values.
    EvaluationFailure(String),
    /// The two expressions for the parameter-coupling vector disagree beyond
    /// tolerance; the supplied pieces are not continuous across the border.
    ContinuityViolation(f64),
    /// Component index outside the map dimension.
    IndexOutOfRange { index: usize, dim: usize },
    /// Too few samples for the requested fit.
    InsufficientData { needed: usize, got: usize },
    /// An argument violates a documented precondition.
    InvalidParameter(String),
    /// A map specification file failed to parse or validate.
    InvalidMapFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SingularMatrix => write!(f, "matrix is singular to working precision"),
            Error::NoConvergence(what) => write!(f, "iteration did not converge: {what}"),
            Error::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            Error::ConditionViolated(what) => write!(f, "structural condition violated: {what}"),
            Error::DegenerateDelta => write!(f, "pacing amplitude delta must be nonzero"),
            Error::DegenerateInput => write!(f, "gain diverges at mu = delta = 0"),
            Error::DegenerateBorder => {
                write!(f, "border gradient vanishes at the bifurcation point")
            }
            Error::OutOfRegime(what) => write!(f, "outside the validity region: {what}"),
            Error::NoBracket(what) => write!(f, "no sign-change bracket: {what}"),
            Error::EvaluationFailure(what) => write!(f, "map evaluation failed: {what}"),
            Error::ContinuityViolation(residual) => write!(
                f,
                "pieces disagree across the border (residual {residual:.3e} exceeds tolerance)"
            ),
            Error::IndexOutOfRange { index, dim } => {
                write!(
                    f,
                    "component index {index} out of range for dimension {dim}"
                )
            }
            Error::InsufficientData { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::InvalidMapFile(what) => write!(f, "invalid map file: {what}"),
        }
    }
}

impl std::error::Error for Error {}
