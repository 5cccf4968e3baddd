use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received parameters outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A bit string failed domain validation (too long, bad length field, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two words of different lengths were compared.
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    /// An exhaustive verification was asked to examine more pairs than allowed.
    #[error("verification would examine {pairs} pairs, above the cap of {cap}")]
    VerificationTooLarge { pairs: u64, cap: u64 },

    /// Adversary or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A party observed something the protocol proves impossible under the
    /// permitted corruption; indicates a harness or implementation bug.
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
}
