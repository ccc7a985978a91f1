//! Crate-wide error type.
//!
//! Every failure mode is a typed variant so callers (and the CLI exit-code
//! mapping) can distinguish degenerate input from numerical breakdown.

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Jet division where the denominator value is below the hard floor.
    #[error("jet division by zero: |denominator| = {mag:e} is below the floor")]
    DivisionByZeroJet { mag: f64 },
    /// Mismatched vector or matrix dimensions.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Requested jet order beyond the supported maximum.
    #[error("jet order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },
    /// Parameter outside the curve domain.
    #[error("parameter {p} outside domain [{lo}, {hi}]")]
    OutOfDomain { p: f64, lo: f64, hi: f64 },
    /// Affine map with |det| below the invertibility floor.
    #[error("affine map is singular: |det| = {det:e}")]
    SingularMap { det: f64 },
    /// Reparametrization whose derivative is not strictly positive.
    #[error("reparametrization is not strictly increasing at p = {p}")]
    NonMonotoneMap { p: f64 },
    /// Operation requiring a closed curve got an open one.
    #[error("operation requires a closed curve")]
    NotClosed,
    /// Sampled curve with too few nodes.
    #[error("sampled curve needs at least {min} even-count samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    /// Group-specific nondegeneracy assumption violated.
    #[error("degenerate curve data at p = {p}: {what}")]
    Degenerate { p: f64, what: &'static str },
    /// Fully affine metric quantity F vanishes (inflection point).
    #[error("inflection point at p = {p}: the fully affine metric vanishes")]
    InflectionPoint { p: f64 },
    /// Euclidean curvature vanishes where the conversion chain needs it.
    #[error("flat point at p = {p}: Euclidean curvature vanishes")]
    FlatPoint { p: f64 },
    /// Equi-affine curvature vanishes where the conversion chain needs it.
    #[error("sextactic point at p = {p}: equi-affine curvature vanishes")]
    SextacticPoint { p: f64 },
    /// Frame vectors became linearly dependent.
    #[error("degenerate frame at p = {p}")]
    DegenerateFrame { p: f64 },
    /// Adaptive stepper drove dt below the underflow floor.
    #[error("time step underflow: dt = {dt:e}")]
    StepUnderflow { dt: f64 },
    /// NaN or infinity appeared in an evolved field.
    #[error("non-finite field value during flow at t = {t}")]
    NonFiniteField { t: f64 },
    /// Normal-speed denominator of the curve-state flow vanished.
    #[error("normal-speed denominator vanishes at node {node}")]
    DenominatorVanishes { node: usize },
    /// Euclidean curvature lost positivity during a convex-regime flow.
    #[error("curve lost convexity at node {node}")]
    LostConvexity { node: usize },
    /// Equi-affine curvature lost positivity during a flow.
    #[error("equi-affine curvature vanished at node {node}")]
    MuVanishes { node: usize },
    /// Monitored quantity exceeded its blow-up guard.
    #[error("blow-up guard: {what} = {value:e} exceeds its bound")]
    BlowUp { what: &'static str, value: f64 },
    /// Open-interval variational data without the required endpoint decay.
    #[error("boundary violation: {what}")]
    BoundaryViolation { what: &'static str },
    /// Closed convex regime required but curvature changes sign.
    #[error("curve is not convex: Euclidean curvature not positive at node {node}")]
    NotConvex { node: usize },
    /// Parameters outside a constructor's admissible range.
    #[error("invalid parameters: {what}")]
    InvalidParams { what: String },
    /// Malformed run configuration.
    #[error("invalid configuration: {what}")]
    InvalidConfig { what: String },
    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
