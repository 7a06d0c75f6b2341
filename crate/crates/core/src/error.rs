use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("undefined roots: polynomial is identically zero")]
    ZeroPolynomial,

    #[error("transfer function denominator is identically zero")]
    ZeroDenominator,

    #[error("SISO required, got {inputs} input(s) and {outputs} output(s)")]
    NotSiso { inputs: usize, outputs: usize },

    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    Improper { num: usize, den: usize },

    #[error("compensator inverse improper")]
    CompensatorInverseImproper,

    #[error("closed-loop gain not configured")]
    ClosedLoopGainMissing,

    #[error("reference model matrix Am is not Hurwitz (max real part {max_real:.6e})")]
    NotHurwitz { max_real: f64 },

    #[error("CGT solution does not exist (condition number {condition:.3e})")]
    CgtSingular { condition: f64 },

    #[error("CGT iteration did not converge after {iterations} iterations (best residual {residual:.3e})")]
    CgtNoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("numerical divergence at t = {t:.6}")]
    Divergence { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty trace")]
    EmptyTrace,
}
