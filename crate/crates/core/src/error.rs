use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("gradient is not invertible for a disutility with a flat region")]
    NotInvertible,

    #[error("expected {expected} neighbor gradients, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("plant is not asymptotically stable (spectral radius {spectral_radius})")]
    UnstablePlant { spectral_radius: f64 },

    #[error("input path is degenerate: C*B = 0")]
    DegenerateInputPath,

    #[error("simulation diverged at tick {tick}")]
    SimulationDiverged { tick: u64 },

    #[error("estimator diverged at tick {tick}")]
    EstimatorDiverged { tick: u64 },

    #[error("infeasible: target {target} outside [{lo}, {hi}]")]
    Infeasible { target: f64, lo: f64, hi: f64 },

    #[error("brute force supports at most 4 loads, got {n}")]
    TooLarge { n: usize },

    #[error("coordinate {index} = {value} lies outside its box")]
    DomainViolation { index: usize, value: f64 },

    #[error("critical gradient sets are not available; solve the oracle first")]
    OracleRequired,

    #[error("dual algorithm requires strictly convex (quadratic) disutilities")]
    DualNeedsStrictConvexity,

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
