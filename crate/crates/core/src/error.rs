use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("unsupported spatial dimension {0} (must be 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("singular direction: spatial point at the origin")]
    SingularDirection,

    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("non-finite field values detected: {0}")]
    NonFinite(String),

    #[error("instability at t = {t}: sup|psi| = {sup_psi:.3e}, sup|v| = {sup_v:.3e}")]
    Instability { t: f64, sup_psi: f64, sup_v: f64 },

    #[error("history does not cover t in [{needed_lo}, {needed_hi}] (stored [{have_lo}, {have_hi}])")]
    Coverage {
        needed_lo: f64,
        needed_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
