//! Negacyclic NTT over a small residue number system.
//!
//! Products in Z[X]/(X^n+1) are computed modulo up to three word-size primes
//! p = c * 2^17 + 1 < 2^62 and reconstructed exactly with Garner's algorithm.
//! Callers pass a magnitude bound for the exact integer result; the number of
//! primes is chosen so that their product exceeds twice that bound.
//!
//! Pointwise products use Montgomery reduction, which leaves a factor R^-1 in
//! every accumulated product. The inverse transform multiplies by R * n^-1,
//! so only values produced by [`NttPlan::mac`] may be inverted.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

const TWO_ADICITY: u32 = 17;
pub const MAX_LOG_N: u32 = TWO_ADICITY - 1;
pub const MAX_PRIMES: usize = 3;

fn mulmod_slow(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod_slow(r, a, p);
        }
        a = mulmod_slow(a, a, p);
        e >>= 1;
    }
    r
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &BASES {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod_slow(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// The first `MAX_PRIMES` primes of the form c * 2^17 + 1 below 2^62,
/// together with an element of multiplicative order exactly 2^17.
fn prime_basis() -> &'static [(u64, u64)] {
    static PRIMES: OnceLock<Vec<(u64, u64)>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut out = Vec::with_capacity(MAX_PRIMES);
        let mut c = ((1u64 << 62) - 1) >> TWO_ADICITY;
        while out.len() < MAX_PRIMES {
            let p = (c << TWO_ADICITY) + 1;
            if is_prime(p) {
                let order = 1u64 << TWO_ADICITY;
                let root = (2u64..)
                    .map(|x| powmod(x, (p - 1) / order, p))
                    .find(|&y| powmod(y, order / 2, p) == p - 1)
                    .expect("a non-residue exists");
                out.push((p, root));
            }
            c -= 1;
        }
        out
    })
}

/// Bits of the product of the first `np` primes, rounded down.
pub(crate) fn capacity_bits(np: usize) -> f64 {
    prime_basis()[..np]
        .iter()
        .map(|&(p, _)| (p as f64).log2())
        .sum()
}

/// Smallest number of primes whose product exceeds 2 * 2^bound_bits.
pub(crate) fn primes_for(bound_bits: f64) -> Result<usize> {
    // Results are reconstructed as i128.
    if bound_bits > 125.0 {
        return Err(Error::Overflow(format!(
            "product bound of 2^{bound_bits:.1} exceeds the exact reconstruction range"
        )));
    }
    (1..=MAX_PRIMES)
        .find(|&np| capacity_bits(np) > bound_bits + 1.5)
        .ok_or_else(|| Error::Overflow(format!("bound 2^{bound_bits:.1}")))
}

/// Bits needed to represent `x` (at least 1).
pub(crate) fn bits_of(x: u128) -> f64 {
    ((x.max(1)) as f64).log2().ceil().max(1.0)
}

#[derive(Debug)]
struct PrimeTable {
    p: u64,
    /// -p^{-1} mod 2^64
    p_neg_inv: u64,
    zetas: Vec<u64>,
    zetas_shoup: Vec<u64>,
    inv_zetas: Vec<u64>,
    inv_zetas_shoup: Vec<u64>,
    /// 2^64 mod p
    r_mod_p: u64,
    /// R * n^{-1} mod p, with R = 2^64
    final_scale: u64,
    final_scale_shoup: u64,
}

#[inline(always)]
fn shoup(w: u64, p: u64) -> u64 {
    (((w as u128) << 64) / p as u128) as u64
}

#[inline(always)]
fn mul_shoup(a: u64, w: u64, w_shoup: u64, p: u64) -> u64 {
    let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(p));
    fold(r.wrapping_sub(p), p)
}

/// Adds p back when x went negative as an i64. Written with a sign shift
/// rather than a comparison so that it compiles without branches, which
/// matters a great deal on random data.
#[inline(always)]
fn fold(x: u64, p: u64) -> u64 {
    x.wrapping_add(p & ((x as i64 >> 63) as u64))
}

#[inline(always)]
fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    fold((a + b).wrapping_sub(p), p)
}

#[inline(always)]
fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    fold(a.wrapping_sub(b), p)
}

impl PrimeTable {
    fn new(p: u64, root2_17: u64, log_n: u32) -> Self {
        let n = 1usize << log_n;
        // psi has order 2n.
        let psi = powmod(root2_17, 1u64 << (TWO_ADICITY - log_n - 1), p);
        let psi_inv = powmod(psi, p - 2, p);
        let brv = |i: usize| -> usize {
            if log_n == 0 {
                0
            } else {
                i.reverse_bits() >> (usize::BITS - log_n)
            }
        };
        let zetas: Vec<u64> = (0..n).map(|i| powmod(psi, brv(i) as u64, p)).collect();
        let inv_zetas: Vec<u64> = (0..n).map(|i| powmod(psi_inv, brv(i) as u64, p)).collect();
        let zetas_shoup = zetas.iter().map(|&z| shoup(z, p)).collect();
        let inv_zetas_shoup = inv_zetas.iter().map(|&z| shoup(z, p)).collect();

        let mut inv = 1u64;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        debug_assert_eq!(p.wrapping_mul(inv), 1);
        let r_mod_p = ((1u128 << 64) % p as u128) as u64;
        let n_inv = powmod(n as u64, p - 2, p);
        let final_scale = mulmod_slow(r_mod_p, n_inv, p);
        Self {
            p,
            p_neg_inv: inv.wrapping_neg(),
            r_mod_p,
            zetas,
            zetas_shoup,
            inv_zetas,
            inv_zetas_shoup,
            final_scale,
            final_scale_shoup: shoup(final_scale, p),
        }
    }

    fn forward(&self, a: &mut [u64]) {
        let n = a.len();
        let p = self.p;
        let mut k = 0;
        let mut len = n / 2;
        while len >= 1 {
            let mut start = 0;
            while start < n {
                k += 1;
                let (z, zs) = (self.zetas[k], self.zetas_shoup[k]);
                for j in start..start + len {
                    let t = mul_shoup(a[j + len], z, zs, p);
                    a[j + len] = sub_mod(a[j], t, p);
                    a[j] = add_mod(a[j], t, p);
                }
                start += 2 * len;
            }
            len >>= 1;
        }
    }

    fn inverse(&self, a: &mut [u64]) {
        let n = a.len();
        let p = self.p;
        let mut len = 1;
        while len < n {
            let mut start = 0;
            // Gentleman-Sande mirror of the forward loop.
            let groups = n / (2 * len);
            let mut k = groups;
            while start < n {
                let (z, zs) = (self.inv_zetas[k], self.inv_zetas_shoup[k]);
                for j in start..start + len {
                    let t = a[j];
                    a[j] = add_mod(t, a[j + len], p);
                    a[j + len] = mul_shoup(sub_mod(t, a[j + len], p), z, zs, p);
                }
                start += 2 * len;
                k += 1;
            }
            len <<= 1;
        }
        for x in a.iter_mut() {
            *x = mul_shoup(*x, self.final_scale, self.final_scale_shoup, p);
        }
    }

    /// Montgomery reduction of any t < 2^128.
    #[inline(always)]
    fn redc_wide(&self, t: u128) -> u64 {
        let folded = (t as u64) as u128 + (t >> 64) * self.r_mod_p as u128;
        let m = (folded as u64).wrapping_mul(self.p_neg_inv);
        let u = ((folded + m as u128 * self.p as u128) >> 64) as u64;
        let u = fold(u.wrapping_sub(self.p), self.p);
        fold(u.wrapping_sub(self.p), self.p)
    }

    #[inline(always)]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.p_neg_inv);
        let u = ((t + m as u128 * self.p as u128) >> 64) as u64;
        fold(u.wrapping_sub(self.p), self.p)
    }
}

/// Transform tables for one ring dimension.
#[derive(Debug)]
pub struct NttPlan {
    n: usize,
    tables: Vec<PrimeTable>,
    /// Garner constants: p0^{-1} mod p1, (p0 p1)^{-1} mod p2.
    inv_p0_mod_p1: u64,
    inv_p0p1_mod_p2: u64,
}

/// A polynomial in evaluation form modulo the first `np` primes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Residues {
    np: usize,
    data: Vec<u64>,
}

impl Residues {
    pub fn primes(&self) -> usize {
        self.np
    }
}

impl NttPlan {
    /// Shared plan for dimension `n` (a power of two).
    pub fn get(n: usize) -> Arc<NttPlan> {
        static CACHE: OnceLock<RwLock<HashMap<usize, Arc<NttPlan>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(plan) = cache.read().expect("plan cache").get(&n) {
            return plan.clone();
        }
        let plan = Arc::new(NttPlan::new(n));
        cache
            .write()
            .expect("plan cache")
            .entry(n)
            .or_insert(plan)
            .clone()
    }

    fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "ring dimension must be a power of two");
        let log_n = n.trailing_zeros();
        assert!(log_n <= MAX_LOG_N, "ring dimension too large for the NTT primes");
        let basis = prime_basis();
        let tables: Vec<PrimeTable> = basis
            .iter()
            .map(|&(p, r)| PrimeTable::new(p, r, log_n))
            .collect();
        let (p0, p1, p2) = (basis[0].0, basis[1].0, basis[2].0);
        let inv_p0_mod_p1 = powmod(p0 % p1, p1 - 2, p1);
        let p0p1_mod_p2 = mulmod_slow(p0 % p2, p1 % p2, p2);
        let inv_p0p1_mod_p2 = powmod(p0p1_mod_p2, p2 - 2, p2);
        Self {
            n,
            tables,
            inv_p0_mod_p1,
            inv_p0p1_mod_p2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn zero(&self, np: usize) -> Residues {
        Residues {
            np,
            data: vec![0; np * self.n],
        }
    }

    /// Forward transform of non-negative coefficients (each below 2^62).
    pub fn forward_u64(&self, coeffs: &[u64], np: usize) -> Residues {
        debug_assert_eq!(coeffs.len(), self.n);
        let mut data = Vec::with_capacity(np * self.n);
        for t in &self.tables[..np] {
            let start = data.len();
            data.extend(coeffs.iter().map(|&c| if c >= t.p { c % t.p } else { c }));
            t.forward(&mut data[start..]);
        }
        Residues { np, data }
    }

    /// Forward transform of signed coefficients.
    pub fn forward_i64(&self, coeffs: &[i64], np: usize) -> Residues {
        debug_assert_eq!(coeffs.len(), self.n);
        let mut data = Vec::with_capacity(np * self.n);
        for t in &self.tables[..np] {
            let start = data.len();
            let p = t.p;
            data.extend(coeffs.iter().map(|&c| {
                if c.unsigned_abs() < p {
                    fold(c as u64, p)
                } else {
                    c.rem_euclid(p as i64) as u64
                }
            }));
            t.forward(&mut data[start..]);
        }
        Residues { np, data }
    }

    /// acc += a * b (pointwise, Montgomery-scaled).
    pub fn mac(&self, acc: &mut Residues, a: &Residues, b: &Residues) {
        let np = acc.np;
        debug_assert!(a.np >= np && b.np >= np);
        let n = self.n;
        for (i, t) in self.tables[..np].iter().enumerate() {
            let range = i * n..(i + 1) * n;
            let acc_s = &mut acc.data[range.clone()];
            let a_s = &a.data[range.clone()];
            let b_s = &b.data[range];
            for ((x, &y), &z) in acc_s.iter_mut().zip(a_s).zip(b_s) {
                let prod = t.redc(y as u128 * z as u128);
                *x = add_mod(*x, prod, t.p);
            }
        }
    }

    /// Sum of pointwise products, scaled as by [`NttPlan::mac`].
    ///
    /// Products are accumulated unreduced in 128 bits; each residue is below
    /// 2^62, so fifteen of them always fit.
    pub fn dot<'a, I>(&self, np: usize, pairs: I) -> Residues
    where
        I: IntoIterator<Item = (&'a Residues, &'a Residues)>,
    {
        const LAZY: usize = 15;
        let n = self.n;
        let mut out = self.zero(np);
        let mut wide = vec![0u128; np * n];
        let mut pending = 0;
        let flush = |out: &mut Residues, wide: &mut [u128]| {
            for (i, t) in self.tables[..np].iter().enumerate() {
                let range = i * n..(i + 1) * n;
                for (x, w) in out.data[range.clone()].iter_mut().zip(&mut wide[range]) {
                    *x = add_mod(*x, t.redc_wide(*w), t.p);
                    *w = 0;
                }
            }
        };
        for (a, b) in pairs {
            debug_assert!(a.np >= np && b.np >= np);
            let len = np * n;
            for ((w, &x), &y) in wide.iter_mut().zip(&a.data[..len]).zip(&b.data[..len]) {
                *w += x as u128 * y as u128;
            }
            pending += 1;
            if pending == LAZY {
                flush(&mut out, &mut wide);
                pending = 0;
            }
        }
        if pending > 0 {
            flush(&mut out, &mut wide);
        }
        out
    }

    fn inverse_in_place(&self, acc: &mut Residues) {
        let n = self.n;
        for (i, t) in self.tables[..acc.np].iter().enumerate() {
            t.inverse(&mut acc.data[i * n..(i + 1) * n]);
        }
    }

    /// Inverse transform and exact signed reconstruction.
    pub fn inverse_i128(&self, mut acc: Residues) -> Vec<i128> {
        self.inverse_in_place(&mut acc);
        let n = self.n;
        let np = acc.np;
        let mut p = [0u64; MAX_PRIMES];
        for (slot, t) in p.iter_mut().zip(&self.tables) {
            *slot = t.p;
        }
        (0..n)
            .map(|j| {
                let mut r = [0u64; MAX_PRIMES];
                for (i, slot) in r.iter_mut().enumerate().take(np) {
                    *slot = acc.data[i * n + j];
                }
                self.garner(&r[..np], &p)
            })
            .collect()
    }

    /// Inverse transform, reconstruct and reduce modulo q.
    pub fn inverse_mod(&self, acc: Residues, q: u64) -> Vec<u64> {
        self.inverse_i128(acc)
            .into_iter()
            .map(|v| match i64::try_from(v) {
                Ok(v) => v.rem_euclid(q as i64) as u64,
                Err(_) => v.rem_euclid(q as i128) as u64,
            })
            .collect()
    }

    /// Inverse transform into i64, failing if a coefficient does not fit.
    pub fn inverse_i64(&self, acc: Residues) -> Result<Vec<i64>> {
        self.inverse_i128(acc)
            .into_iter()
            .map(|v| {
                i64::try_from(v)
                    .map_err(|_| Error::Overflow("integer coefficient exceeds i64".into()))
            })
            .collect()
    }

    fn garner(&self, r: &[u64], p: &[u64]) -> i128 {
        match r.len() {
            1 => {
                // x - p when x > p/2, branch-free.
                let x = r[0] as i64;
                let half = (p[0] / 2) as i64;
                (x - (p[0] as i64 & ((half - x) >> 63))) as i128
            }
            2 => {
                let (p0, p1) = (p[0], p[1]);
                let c1 = mulmod_slow(sub_mod(r[1], r[0] % p1, p1), self.inv_p0_mod_p1, p1);
                let x = r[0] as u128 + c1 as u128 * p0 as u128;
                let big = p0 as u128 * p1 as u128;
                if x > big / 2 {
                    x as i128 - big as i128
                } else {
                    x as i128
                }
            }
            3 => {
                let (p0, p1, p2) = (p[0], p[1], p[2]);
                let c1 = mulmod_slow(sub_mod(r[1], r[0] % p1, p1), self.inv_p0_mod_p1, p1);
                // x01 = r0 + c1 p0 (mod p2)
                let x01_mod_p2 = add_mod(r[0] % p2, mulmod_slow(c1, p0 % p2, p2), p2);
                let c2 = mulmod_slow(sub_mod(r[2], x01_mod_p2, p2), self.inv_p0p1_mod_p2, p2);
                let p0p1 = p0 as u128 * p1 as u128;
                let low = r[0] as u128 + c1 as u128 * p0 as u128;
                if c2 > p2 / 2 {
                    // Negative result: x - P = low + (c2 - p2) p0 p1.
                    let neg = (p2 - c2) as u128;
                    low as i128 - (neg * p0p1) as i128
                } else {
                    (low + c2 as u128 * p0p1) as i128
                }
            }
            _ => unreachable!("at most three primes"),
        }
    }
}
