use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or physically invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical procedure failed to reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The secular function was evaluated exactly at one of its poles.
    #[error("secular function evaluated at pole omega[{index}] = {omega}")]
    Pole { index: usize, omega: f64 },

    /// Two inputs that must differ coincide.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_time(name: &str, t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("{name} must be a finite nonnegative time, got {t}")));
    }
    Ok(())
}
