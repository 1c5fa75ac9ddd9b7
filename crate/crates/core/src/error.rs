use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("step size underflow at z = {z} (h = {h:e}); last state {state:?}")]
    StepUnderflow { z: f64, h: f64, state: Vec<f64> },

    #[error("step budget of {max_steps} exhausted at z = {z}")]
    TooManySteps { max_steps: usize, z: f64 },

    #[error("Newton iteration failed to converge at t = {t} after step-size reduction")]
    NewtonFailure { t: f64 },

    #[error("design matrix is rank deficient in column {column}")]
    RankDeficient { column: usize },

    #[error("least squares needs at least as many rows ({rows}) as columns ({cols})")]
    Underdetermined { rows: usize, cols: usize },

    #[error("no sign change on bracket: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("no level crossing found: {0}")]
    NoCrossing(String),

    #[error("front reached x_f = {x_f} > 0.9 L at t = {t}")]
    FrontEscaped { t: f64, x_f: f64 },

    #[error("PDE integration failed at t = {t}: {source}")]
    PdeFailure {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("root not bracketed: {0}")]
    NotBracketed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
