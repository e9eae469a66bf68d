//! Crate-wide error type.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("step size underflow at z = {z} (required step {required:.3e} < min_step {min_step:.3e})")]
    StepUnderflow {
        z: Complex64,
        required: f64,
        min_step: f64,
    },

    #[error("step budget exhausted after {0} steps")]
    MaxStepsExceeded(usize),

    #[error("pole fit did not converge: {0}")]
    FitDiverged(String),

    #[error("series evaluation unreliable at distance {distance:.3e} (tail estimate {tail:.3e})")]
    SeriesUnreliable { distance: f64, tail: f64 },

    #[error("degenerate parameter: 2α + 1 = 0 (α = {0})")]
    DegenerateAlpha(Complex64),

    #[error("V = w' + w² + z/2 vanishes at z = {0}; transform has a pole here")]
    VZero(Complex64),

    #[error("seed point z = {0} is a zero of y; choose another base point")]
    SeedAtZeroOfY(Complex64),

    #[error("w' - z/2 - w² vanishes identically (Riccati solution); inverse transform is trivial")]
    IdenticallyZero,

    #[error("no admissible sample points (all within {0} scaled units of a pole)")]
    NoAdmissiblePoints(f64),

    #[error("evaluation point z = {0} coincides with a pole")]
    EvalAtPole(Complex64),

    #[error("sample configuration is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("classification inconclusive: {0}")]
    Inconclusive(String),

    #[error("ambiguous string link at p = {p}: candidates {a} and {b} both within tolerance")]
    AmbiguousLink {
        p: Complex64,
        a: Complex64,
        b: Complex64,
    },

    #[error("no zero of w found between poles {0} and {1}")]
    ZeroNotFound(Complex64, Complex64),

    #[error("no admissible detour around pole p = {0} on the contour")]
    PoleOnContour(Complex64),

    #[error("too few samples: {got} (need {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
