use thiserror::Error;

/// Errors raised by state construction, gate application and measurement.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad caller-supplied data (non-normalized amplitudes, non-unitary
    /// matrices, out-of-range parameters, repeated qubit indices, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// An operation was called on a state that does not satisfy its
    /// precondition (e.g. an inactive probe, or unmeasured probes where a pure
    /// polarization state is required).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The Fock truncation cannot represent a coherent label to the required
    /// accuracy.
    #[error("truncation N = {n_trunc} too small for |beta| = {magnitude}: need N >= {required}")]
    Truncation {
        n_trunc: usize,
        magnitude: f64,
        required: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
