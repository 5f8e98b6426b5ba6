use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value {0} where a finite real was required")]
    NonFinite(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point} lies on the branch boundary of the inverse branches")]
    BranchBoundary { point: f64 },

    #[error("point {point} lies on the exceptional set")]
    OnExceptionalSet { point: f64 },

    /// The orbit came within the guard distance of the exceptional set.
    /// `step` is the index j of the offending point x_j and `completed` the
    /// number of (a_j, r_j) pairs that were computed before it.
    #[error("orbit hit the exceptional set at step {step} (x = {point}); {completed} steps completed")]
    OrbitHitExceptionalSet {
        step: usize,
        point: f64,
        completed: usize,
    },

    #[error("the map {0} has an empty exceptional set")]
    EmptyExceptionalSet(&'static str),

    #[error("no usable grid points for the non-degeneracy probe")]
    EmptyGrid,

    #[error("trace was generated with delta = {trace} but parameters use delta = {params}")]
    DeltaMismatch { trace: f64, params: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last L1 change {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("quadrature did not converge: last two refinements {previous} and {last}")]
    QuadratureDiverged { previous: f64, last: f64 },

    #[error("operation not supported by map {map}: {what}")]
    Unsupported { map: &'static str, what: &'static str },
}
