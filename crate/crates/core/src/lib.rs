//! Matrix-product-state simulation of random quantum circuits with per-gate
//! truncation fidelity tracking.
//!
//! Conventions used throughout:
//!
//! * Tensors are dense and row-major over their declared index order.
//! * Qubit 0 is the most significant bit of a basis-state index, so the
//!   bitstring `"b0 b1 ... b(N-1)"` maps to index `sum b_k 2^(N-1-k)`.
//! * MPS site tensors have shape `(left bond, physical, right bond)`.

pub mod circuit;
mod chain;
mod checkpoint;
pub mod error;
pub mod grouped;
pub mod gte;
pub mod harness;
mod linalg;
pub mod metrics;
pub mod mps;
pub mod statevector;
pub mod tensor;

pub use circuit::{Circuit, Gate, Grid};
pub use error::{Error, Result};
pub use grouped::{GroupedMpsState, Grouping};
pub use mps::{FidelityEntry, FidelityLog, MpsState};
pub use statevector::StateVector;
pub use tensor::Tensor;

pub type C64 = num_complex::Complex64;

/// Parses a bitstring of `'0'`/`'1'` characters.
pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Invalid(format!("bad bit {other:?} in {s:?}"))),
        })
        .collect()
}

/// Formats bits as a `'0'`/`'1'` string.
pub fn format_bits(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// Basis index of a bitstring, qubit 0 most significant.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|k| ((index >> (n - 1 - k)) & 1) as u8).collect()
}
