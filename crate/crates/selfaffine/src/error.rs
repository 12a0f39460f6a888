//! Crate-wide error type. Variants mirror the failure modes of the public
//! operations; message payloads carry the offending quantities so callers can
//! report without re-deriving them.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix has an eigenvalue of modulus ≤ 1, so it does not expand.
    #[error("matrix is not expanding: eigenvalue modulus {modulus} ≤ 1")]
    NotExpanding { modulus: f64 },

    /// Matrix is singular (or numerically so).
    #[error("matrix is singular (|det| = {det})")]
    Singular { det: f64 },

    /// No renorming horizon m ≤ 64 satisfies σ_min(A^m) ≥ θ^m.
    #[error("renorming horizon exceeded: no m ≤ {cap} with σ_min(A^m) ≥ θ^m for θ = {theta}")]
    HorizonExceeded { theta: f64, cap: usize },

    /// Exact-similarity norm requested but AᵀA ≠ q^{2/n}·I within tolerance.
    #[error("matrix is not a similarity: max |AᵀA - q^(2/n)·I| = {deviation}")]
    NotSimilarity { deviation: f64 },

    /// Mollified-kernel grid interpolation error bound exceeds the cap.
    #[error("norm grid too coarse: interpolation error bound {bound} > cap {cap}")]
    GridTooCoarse { bound: f64, cap: f64 },

    /// Operation on an empty point set.
    #[error("empty point set: {context}")]
    EmptySet { context: String },

    /// Enumeration or sampling budget exceeded.
    #[error("budget exceeded: {need} needed > {budget} allowed ({context})")]
    BudgetExceeded { need: f64, budget: f64, context: String },

    /// Difference-automaton state budget exceeded.
    #[error("automaton state budget exceeded: {explored} states explored > {budget}")]
    StateBudgetExceeded { explored: usize, budget: usize },

    /// Claimed collision witness does not check out under exact arithmetic.
    #[error("invalid collision witness: {reason}")]
    InvalidWitness { reason: String },

    /// Comparability fit constant exceeds the configured cap.
    #[error("comparability fit violation: C = {c_est} > cap {cap}")]
    FitViolation { c_est: f64, cap: f64 },

    /// Density trace requested at a point not on the attractor.
    #[error("point not on attractor: distance {distance} > allowance {allowance}")]
    PointNotOnAttractor { distance: f64, allowance: f64 },

    /// Operation not available in this ambient dimension.
    #[error("unsupported dimension {n}: {context}")]
    UnsupportedDimension { n: usize, context: String },

    /// Parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Exact integer arithmetic overflowed the working width.
    #[error("integer overflow in exact arithmetic: {context}")]
    NumericOverflow { context: String },

    /// Malformed or mismatched cache file.
    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
