use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid component array: {0}")]
    InvalidArray(String),

    #[error("enumeration guard: {n} components exceeds the limit of {limit}")]
    TooManyComponents { n: usize, limit: usize },

    #[error("negative actual weight {value} at component {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("mask {mask:#x} out of range for {n} components")]
    MaskOutOfRange { mask: u64, n: usize },

    #[error("input {0} outside the conversion range [0, 1)")]
    InputOutOfRange(f64),

    #[error("boundaries are not monotone at index {0}")]
    NonMonotone(usize),

    #[error("quantizer and component array are inconsistent: {0}")]
    Inconsistent(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported LUT version {0}")]
    Version(u16),

    #[error("truncated LUT: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
