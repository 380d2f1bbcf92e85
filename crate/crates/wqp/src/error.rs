//! Error type shared by every numerical routine in the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Errors surfaced by series evaluation, matrix construction and mode
/// expansion.  Every fallible routine in the crate returns this type so
/// callers can distinguish a genuinely singular input from a budget or
/// domain problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WqpError {
    /// `q` is zero or too close to a point where balanced `q`-numbers
    /// degenerate (`q = ±1`).
    #[error("deformation parameter q = {q} is degenerate")]
    DegenerateQ { q: Complex64 },

    /// An infinite sum or product needed more terms than the policy allows.
    #[error("series truncation budget exhausted after {terms} terms (limit {max_terms})")]
    TruncationBudgetExceeded { terms: usize, max_terms: usize },

    /// The modular parameter must lie in the upper half-plane.
    #[error("period parameter tau = {tau} lies outside the upper half-plane")]
    NonconvergentTau { tau: Complex64 },

    /// A theta function in a denominator evaluated to (numerically) zero.
    #[error("theta denominator modulus {modulus:.3e} is below the degeneracy floor")]
    ThetaZeroDenominator { modulus: f64 },

    /// The evaluation point coincides with a pole of the target function.
    #[error("evaluation point sits on a pole: {context}")]
    PoleHit { context: String },

    /// The shifted nome `p* = p q^{-2c}` left the punctured unit disc.
    #[error("shifted nome has modulus {modulus:.6e}, outside the punctured open unit disc")]
    StarNomeOutOfDomain { modulus: f64 },

    /// A randomly drawn sample point was rejected as numerically degenerate.
    #[error("sample point rejected as degenerate: {context}")]
    SamplePointDegenerate { context: String },

    /// A series expansion was requested in a region where it does not converge.
    #[error("series does not converge in the requested region: {context}")]
    NonconvergentSeries { context: String },

    /// Parameters passed to a surface-constrained routine do not satisfy
    /// the defining constraint within tolerance.
    #[error("surface constraint violated with residual {residual:.3e}")]
    SurfaceViolated { residual: f64 },

    /// The analyticity hypothesis behind a factorized expansion fails;
    /// `lhs` must strictly exceed `rhs`.
    #[error("factorization hypothesis violated: {lhs:.6e} must exceed {rhs:.6e}")]
    HypothesisViolated { lhs: f64, rhs: f64 },

    /// A pole was assigned an order inconsistent with the factor values
    /// found at its position.
    #[error("pole at {position} classified with order {order}, but a residual factor has modulus {value:.3e}")]
    PoleOrderMisclassified {
        position: Complex64,
        value: f64,
        order: usize,
    },

    /// A sector index beyond the resolvable pole ladder was requested.
    #[error("sector index {k} exceeds the resolvable range (max {max})")]
    SectorOutOfRange { k: usize, max: usize },

    /// A generator index pair lies outside the valid range.
    #[error("field index pair ({i}, {j}) outside the valid range 1..={max}")]
    IndexOutOfRange { i: usize, j: usize, max: usize },

    /// Catch-all for malformed inputs.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, WqpError>;
