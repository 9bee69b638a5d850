//! Error types, one enum per subsystem.

use num_complex::Complex64;
use thiserror::Error;

/// Errors from the expression parser.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    /// Lexical or grammatical error with byte position and expectation.
    #[error("syntax error at byte {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    /// Expression is well formed but reduces to none of the supported kinds.
    #[error("expression is not reducible to a supported field: {0}")]
    NotRecognizedForm(String),
    /// Zero polynomial, singular Moebius map, or similar degeneracy.
    #[error("degenerate field: {0}")]
    DegenerateField(String),
}

/// Errors from field evaluation and expansion.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FieldError {
    #[error("evaluation at {z} is within the pole guard of pole {pole}")]
    PoleEvaluation { z: Complex64, pole: Complex64 },
    #[error("operation does not support this field kind: {0}")]
    UnsupportedKind(&'static str),
    #[error("degenerate field: {0}")]
    DegenerateField(String),
}

/// Errors from polynomial root finding and residue computation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PolyError {
    #[error("root iteration did not converge (best residual {residual:.3e})")]
    NonConvergence {
        best: Vec<Complex64>,
        residual: f64,
    },
    #[error("supplied order {supplied} is inconsistent with derivatives at {z0} (detected {detected})")]
    OrderMismatch {
        z0: Complex64,
        supplied: usize,
        detected: usize,
    },
    #[error("roots too close to separate near {0}")]
    IllConditioned(Complex64),
    #[error("degree must be at least 1")]
    ConstantPolynomial,
}

/// Errors from local equilibrium analysis.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LocalError {
    #[error("degenerate field: {0}")]
    DegenerateField(String),
    #[error("{0} is not a simple equilibrium")]
    NotSimple(Complex64),
    #[error("essential fields have no supported normal form")]
    EssentialNotSupported,
    #[error("no rotation at {z0}: |Im f'| = {im_part:.3e}")]
    NoRotation { z0: Complex64, im_part: f64 },
    #[error("return-map trajectory left the analysis disk at rho = {rho}")]
    GridEscape { rho: f64 },
    #[error("operation requires degree {expected}, field has degree {got}")]
    WrongDegree { expected: usize, got: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Errors from the compactification machinery.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum InfinityError {
    #[error("operation does not support this field kind: {0}")]
    UnsupportedKind(&'static str),
    #[error("equator dynamics vanish identically")]
    DegenerateEquator,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Errors from first-integral construction and evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum IntegralError {
    #[error("operation does not support this field kind: {0}")]
    UnsupportedKind(&'static str),
    #[error("path passes within the pole guard of {0}")]
    SingularPath(Complex64),
    #[error("path spacing too coarse for branch unwrapping near point {index}")]
    BranchJump { index: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Errors from trajectory integration and curve tracing.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlowError {
    #[error("start point {0} is at a singularity")]
    BadStart(Complex64),
    #[error("time cap hit before the limit set could be classified")]
    InconclusiveLimit,
    #[error("limit set undetermined")]
    Undetermined,
    #[error("level-curve gradient vanished at {0}")]
    CriticalPointHit(Complex64),
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Errors from signature construction and catalog matching.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PortraitError {
    #[error("no catalog entry matches the signature (nearest: {nearest}); this indicates a numeric failure")]
    NoMatch { nearest: String, diff: String },
    #[error("field of degree {0} is outside the cataloged families")]
    UnsupportedDegree(usize),
    #[error("operation does not support this field kind: {0}")]
    UnsupportedKind(&'static str),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Infinity(#[from] InfinityError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Integral(#[from] IntegralError),
}
