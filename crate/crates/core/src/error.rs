use num_rational::BigRational;
use thiserror::Error;

/// Errors shared across the whole crate.
///
/// Every failure is a definite, reproducible condition; nothing here wraps
/// floating point or timing effects. `PrecisionLoss` is the only error that
/// can be retried meaningfully (with a larger working precision).
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A quantity could not be decided at the working precision.
    #[error("precision loss: {0}")]
    PrecisionLoss(String),

    /// Inversion of the zero element.
    #[error("division by zero")]
    DivisionByZero,

    /// `residue` applied to an element of nonzero valuation.
    #[error("not a unit: valuation {0} != 0")]
    NotAUnit(BigRational),

    /// The requested radius exponent is not in (1/e)Z for the context's e.
    #[error("radius exponent {0} not representable with ramification index {1}")]
    RadiusNotRepresentable(BigRational, u64),

    /// |f(z0)| >= |f'(z0)|^2, so the Newton iteration is not certified.
    #[error("Hensel precondition failed: v(f(z0)) = {fz0}, 2 v(f'(z0)) = {dfz0_twice}")]
    HenselPreconditionFailed {
        fz0: String,
        dfz0_twice: String,
    },

    /// No root with the requested valuation exists (or is representable).
    #[error("no root at radius exponent {0}")]
    NoRootAtRadius(BigRational),

    /// A graded digit equation has no solution in the residue field.
    #[error("residue digit equation unsolvable in F_{{p^{f}}}; raising f may help")]
    ResidueFieldTooSmall { f: u64 },

    /// An exact precondition inequality of the parameter-extension step failed.
    #[error("condition violated: {0}")]
    ConditionViolated(String),

    /// Mixed-context arithmetic is not supported.
    #[error("elements belong to different contexts")]
    ContextMismatch,

    /// A series fails the admission test for the family (or its domain).
    #[error("admission failed: {0}")]
    AdmissionFailed(String),

    /// Context parameters are invalid (p not prime, caps exceeded, ...).
    #[error("invalid context: {0}")]
    InvalidContext(String),

    /// A certified tail bound dominates a computation that needs finitely
    /// many extremal coefficients.
    #[error("tail bound dominates: {0}")]
    TailDominates(String),

    /// Input document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
