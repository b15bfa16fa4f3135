use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dense eigensolver did not converge at xi = {xi:?}")]
    EigenNonConvergence { xi: Vec<f64> },

    #[error("semigroup envelope {k_est:.3e} exceeds cap {cap:.3e}; nu is outside the valid band")]
    EnvelopeExceeded { k_est: f64, cap: f64 },

    #[error("step size underflow at z = {z}")]
    StepUnderflow { z: f64 },

    #[error("shooting bracket [{lo}, {hi}] has no sign change (F(lo) = {f_lo:.6e}, F(hi) = {f_hi:.6e})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("orbit escaped to phi1 < 0 at z = {z} (reaction switched off)")]
    PrematureQuench { z: f64 },

    #[error("shooting did not reach the burned state: |phi1 - 1/kappa| = {miss:.3e} > tol = {tol:.3e}")]
    ShootingMiss { miss: f64, tol: f64 },

    #[error("time step {dt} exceeds the explicit nonlinearity bound {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("non-finite value in the field at t = {t}")]
    NonFinite { t: f64 },

    #[error("perturbation support exceeds the grid along axis {axis}")]
    SupportExceedsGrid { axis: usize },

    #[error("weighted norm rejected: alpha*z reaches {max_exponent:.1} (boundary contaminated)")]
    WeightOverflow { max_exponent: f64 },

    #[error("decay fit needs at least {needed} samples in the window, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
