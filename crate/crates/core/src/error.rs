use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by a zero divisor (an idempotent component vanishes)")]
    DivisionByZeroDivisor,

    #[error("idempotent component lies on the principal branch cut")]
    BranchCutViolation,

    #[error("Gaussian integral diverges: Re(a) = {re_a} <= 0")]
    NonNormalizable { re_a: f64 },

    #[error("effective-potential projection is singular (condition {condition:.3e})")]
    SingularProjection { condition: f64 },

    #[error("integrator step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("bicomplex norm is degenerate (|<psi-|psi+>| = {norm:.3e})")]
    DegenerateNorm { norm: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton Jacobian is singular (condition {condition:.3e})")]
    SingularJacobian { condition: f64 },

    #[error("continuation start point is not a solution (residual {residual:.3e})")]
    InitialPointInvalid { residual: f64 },

    #[error("continuation step underflow at na = {na} after {points} points")]
    StepUnderflow { na: f64, points: usize },

    #[error("fold could not be re-detected at gamma = {gamma}")]
    SeedLost { gamma: f64 },

    #[error("fold curves share only {shared} gamma values (need at least 4)")]
    InsufficientOverlap { shared: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
