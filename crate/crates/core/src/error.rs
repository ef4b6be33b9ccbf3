use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid correlation profile: {0}")]
    InvalidProfile(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("snr must be positive, got {0}")]
    NonPositiveSnr(f64),

    #[error("{what} is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficient { what: &'static str, ratio: f64 },

    #[error("leading pivot block is singular (condition number {condition:.3e})")]
    SingularPivotBlock { condition: f64 },

    #[error("{what} is singular (condition number {condition:.3e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("guard tripped: |{what}| = {magnitude:.3e} is below {threshold:.3e}")]
    GuardTrip {
        what: String,
        magnitude: f64,
        threshold: f64,
    },

    #[error("underdetermined system: {equations} equations for {unknowns} unknowns")]
    Underdetermined { equations: usize, unknowns: usize },

    #[error("inconsistent system: relative residual {residual:.3e} exceeds {tolerance:.3e}")]
    Inconsistent { residual: f64, tolerance: f64 },

    #[error("codebook is empty for d_min = {d_min}")]
    EmptyCodebook { d_min: f64 },

    #[error("only {found} sweep points qualify, need at least {needed}")]
    TooFewPoints { found: usize, needed: usize },

    #[error("rank-deficient Jacobian at {rate:.4} of probes, more than epsilon = {epsilon}")]
    PremiseViolated { rate: f64, epsilon: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures raised by a numerical threshold (conditioning,
    /// near-zero divisors, residual checks) rather than by bad input.
    pub fn is_guard_trip(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::SingularPivotBlock { .. }
                | Error::Singular { .. }
                | Error::GuardTrip { .. }
                | Error::Inconsistent { .. }
        )
    }
}
