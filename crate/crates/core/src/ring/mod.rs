//! Arithmetic in R_q = Z_q[X]/(X^n + 1) with q = 3^k.

pub mod codec;
mod int;
mod modulus;
pub mod ntt;
mod poly;

pub use codec::Codec;
pub use int::{IntMatrix, IntVector, PreparedIntMatrix, PreparedMatrix};
pub use modulus::{Modulus, MAX_K};
pub use poly::{RingElem, RingMatrix, RingVector};

/// Direct O(n^2) negacyclic product, exposed for cross-checking.
pub fn schoolbook_product(a: &[i64], b: &[i64]) -> Vec<i128> {
    poly::negacyclic_schoolbook(a, b)
}
