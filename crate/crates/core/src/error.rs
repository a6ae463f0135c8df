use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("two of the interpolation abscissae coincide")]
    CollinearAbscissae,
    #[error("curve opens downward (p = {0}); the point lies above the chord")]
    NotHanging(f64),
    #[error("linear system is singular: span {0} m is too small")]
    SingularSystem(f64),
    #[error("tether length {length} m does not exceed the chord {chord} m")]
    TautTether { length: f64, chord: f64 },
    #[error("suspension points are vertically aligned")]
    VerticalSpan,
    #[error("root finder did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid bisection bracket: upper length {upper} m <= chord {chord} m")]
    InvalidBracket { upper: f64, chord: f64 },
    #[error("polygon is not convex")]
    NonConvexInput,
    #[error("grid has no cells")]
    EmptyGrid,
    #[error("point ({0}, {1}, {2}) lies outside the grid")]
    OutOfBounds(f64, f64, f64),
    #[error("horizontal span {0} m is below the grid resolution")]
    DegenerateSpan(f64),
    #[error("no valid sample found after {0} attempts")]
    SamplingExhausted(usize),
    #[error("solver diverged: {0}")]
    SolverDiverged(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
