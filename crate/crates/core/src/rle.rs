//! Run-length codec for binary masks.
//!
//! Masks are flattened row-major and encoded as alternating run lengths,
//! background first. The first run may be zero when the mask starts with a
//! foreground pixel. The runs always sum to `width * height`.
//!
//! This is the wire format shared by the propagation protocol and the
//! session service, so it must stay bit-exact.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RleError {
    #[error("run lengths sum to {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("zero-length run at position {0} (only the first run may be empty)")]
    EmptyRun(usize),
}

/// Encodes a row-major binary mask.
pub fn encode(bits: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &b in bits {
        if b != current {
            runs.push(count);
            current = b;
            count = 0;
        }
        count += 1;
    }
    runs.push(count);
    runs
}

/// Decodes runs into a mask of exactly `len` pixels.
///
/// Zero-length runs after the first are rejected so that every mask has a
/// single canonical encoding.
pub fn decode(runs: &[u32], len: usize) -> Result<Vec<bool>, RleError> {
    let total: usize = runs.iter().map(|&r| r as usize).sum();
    if total != len {
        return Err(RleError::LengthMismatch {
            expected: len,
            actual: total,
        });
    }
    let mut out = Vec::with_capacity(len);
    for (i, &run) in runs.iter().enumerate() {
        if run == 0 && i > 0 {
            return Err(RleError::EmptyRun(i));
        }
        let value = i % 2 == 1;
        out.extend(std::iter::repeat_n(value, run as usize));
    }
    Ok(out)
}
