use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric input lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value (grid size, step count, caps) is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("joint action space of {cells} cells exceeds cap {cap}")]
    CapExceeded { cells: usize, cap: usize },

    #[error("unknown player {0}")]
    UnknownPlayer(usize),
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {x}")))
    }
}

pub(crate) fn ensure_nonneg(name: &str, x: f64) -> Result<()> {
    ensure_finite(name, x)?;
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be >= 0, got {x}")))
    }
}

pub(crate) fn ensure_in(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    ensure_finite(name, x)?;
    if (lo..=hi).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [{lo}, {hi}], got {x}")))
    }
}
