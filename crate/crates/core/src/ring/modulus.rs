use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported exponent: 3^39 < 2^62, which keeps every canonical
/// coefficient below the NTT primes.
pub const MAX_K: u32 = 39;

/// The modulus q = 3^k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Modulus {
    k: u32,
    q: u64,
}

impl Modulus {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidParams(format!(
                "modulus exponent k must lie in 1..={MAX_K}, got {k}"
            )));
        }
        Ok(Self { k, q: 3u64.pow(k) })
    }

    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    /// Number of bits of q, i.e. ceil(log2 q) for q not a power of two.
    pub fn bits(&self) -> u32 {
        64 - self.q.leading_zeros()
    }

    /// 3^j mod q. Zero for j >= k.
    pub fn pow3(&self, j: usize) -> u64 {
        if j >= self.k as usize {
            0
        } else {
            3u64.pow(j as u32)
        }
    }

    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.q as i64) as u64
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.q as i128) as u64
    }

    /// Centered representative in (-q/2, q/2].
    #[inline]
    pub fn center(&self, x: u64) -> i64 {
        debug_assert!(x < self.q);
        if x > self.q / 2 {
            x as i64 - self.q as i64
        } else {
            x as i64
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }
}
