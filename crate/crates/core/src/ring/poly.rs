use serde::{Deserialize, Serialize};

use super::modulus::Modulus;
use super::ntt::{bits_of, primes_for, NttPlan, Residues};
use crate::error::{Error, Result};

/// Below this dimension products are computed directly.
pub(crate) const SCHOOLBOOK_MAX_N: usize = 16;

/// Negacyclic product over the integers, O(n^2).
pub(crate) fn negacyclic_schoolbook(a: &[i64], b: &[i64]) -> Vec<i128> {
    let n = a.len();
    let mut out = vec![0i128; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let p = x as i128 * y as i128;
            if i + j < n {
                out[i + j] += p;
            } else {
                out[i + j - n] -= p;
            }
        }
    }
    out
}

pub(crate) fn check_dimension(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() || n > (1 << super::ntt::MAX_LOG_N) {
        return Err(Error::InvalidParams(format!(
            "ring dimension must be a power of two up to 2^{}, got {n}",
            super::ntt::MAX_LOG_N
        )));
    }
    Ok(())
}

/// Number of RNS primes for a sum of `terms` products with factors bounded
/// by 2^a_bits and 2^b_bits in dimension n.
pub(crate) fn primes_for_product(n: usize, terms: usize, a_bits: f64, b_bits: f64) -> Result<usize> {
    let bound = (n as f64).log2() + (terms.max(1) as f64).log2() + a_bits + b_bits;
    primes_for(bound)
}

/// An element of Z_q[X]/(X^n + 1) with canonical coefficients in [0, q).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingElem {
    coeffs: Vec<u64>,
    modulus: Modulus,
}

impl RingElem {
    pub fn zero(n: usize, modulus: Modulus) -> Self {
        Self {
            coeffs: vec![0; n],
            modulus,
        }
    }

    pub fn constant(n: usize, modulus: Modulus, c: u64) -> Self {
        let mut e = Self::zero(n, modulus);
        e.coeffs[0] = c % modulus.q();
        e
    }

    pub fn one(n: usize, modulus: Modulus) -> Self {
        Self::constant(n, modulus, 1)
    }

    /// Monomial X^i (with X^n = -1).
    pub fn monomial(n: usize, modulus: Modulus, i: usize) -> Self {
        let mut e = Self::zero(n, modulus);
        let (wraps, pos) = (i / n, i % n);
        e.coeffs[pos] = if wraps % 2 == 0 { 1 } else { modulus.q() - 1 };
        e
    }

    /// Validates dimension and canonical range.
    pub fn from_coeffs(coeffs: Vec<u64>, modulus: Modulus) -> Result<Self> {
        check_dimension(coeffs.len())?;
        if let Some(c) = coeffs.iter().find(|&&c| c >= modulus.q()) {
            return Err(Error::Decode(format!(
                "coefficient {c} outside [0, {})",
                modulus.q()
            )));
        }
        Ok(Self { coeffs, modulus })
    }

    pub(crate) fn from_coeffs_unchecked(coeffs: Vec<u64>, modulus: Modulus) -> Self {
        debug_assert!(coeffs.iter().all(|&c| c < modulus.q()));
        Self { coeffs, modulus }
    }

    /// Reduces arbitrary integers into the ring.
    pub fn from_i64(values: &[i64], modulus: Modulus) -> Result<Self> {
        check_dimension(values.len())?;
        Ok(Self {
            coeffs: values.iter().map(|&v| modulus.reduce_i64(v)).collect(),
            modulus,
        })
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Coefficients lifted to (-q/2, q/2].
    pub fn centered(&self) -> Vec<i64> {
        self.coeffs.iter().map(|&c| self.modulus.center(c)).collect()
    }

    pub fn norm_sq(&self) -> u128 {
        self.centered()
            .iter()
            .map(|&c| (c as i128 * c as i128) as u128)
            .sum()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() || self.modulus != other.modulus {
            return Err(Error::Mismatch(format!(
                "(n={}, q={}) vs (n={}, q={})",
                self.n(),
                self.modulus.q(),
                other.n(),
                other.modulus.q()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let m = self.modulus;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| m.add(a, b))
                .collect(),
            modulus: m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let m = self.modulus;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| m.sub(a, b))
                .collect(),
            modulus: m,
        })
    }

    pub fn neg(&self) -> Self {
        let m = self.modulus;
        Self {
            coeffs: self.coeffs.iter().map(|&a| m.neg(a)).collect(),
            modulus: m,
        }
    }

    pub fn scale(&self, c: u64) -> Self {
        let m = self.modulus;
        let c = c % m.q();
        Self {
            coeffs: self.coeffs.iter().map(|&a| m.mul(a, c)).collect(),
            modulus: m,
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        let m = self.modulus;
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = m.add(*a, b);
        }
    }

    pub(crate) fn sub_assign(&mut self, other: &Self) {
        let m = self.modulus;
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = m.sub(*a, b);
        }
    }

    /// Product in R_q.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let m = self.modulus;
        let a = self.centered();
        let b = other.centered();
        let n = self.n();
        let raw = if n <= SCHOOLBOOK_MAX_N {
            negacyclic_schoolbook(&a, &b)
        } else {
            let half_q = bits_of((m.q() / 2) as u128);
            let np = primes_for_product(n, 1, half_q, half_q)?;
            let plan = NttPlan::get(n);
            let mut acc = plan.zero(np);
            plan.mac(&mut acc, &plan.forward_i64(&a, np), &plan.forward_i64(&b, np));
            plan.inverse_i128(acc)
        };
        Ok(Self {
            coeffs: raw.into_iter().map(|v| m.reduce_i128(v)).collect(),
            modulus: m,
        })
    }

    pub(crate) fn forward(&self, plan: &NttPlan, np: usize) -> Residues {
        plan.forward_i64(&self.centered(), np)
    }
}

/// An ordered list of ring elements sharing (n, q).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingVector {
    n: usize,
    modulus: Modulus,
    elems: Vec<RingElem>,
}

impl RingVector {
    pub fn zero(width: usize, n: usize, modulus: Modulus) -> Self {
        Self {
            n,
            modulus,
            elems: vec![RingElem::zero(n, modulus); width],
        }
    }

    pub fn new(elems: Vec<RingElem>, n: usize, modulus: Modulus) -> Result<Self> {
        check_dimension(n)?;
        for e in &elems {
            if e.n() != n || e.modulus() != modulus {
                return Err(Error::Mismatch("vector entries disagree on (n, q)".into()));
            }
        }
        Ok(Self { n, modulus, elems })
    }

    /// Builds from a nonempty list, taking (n, q) from its first entry.
    pub fn from_elems(elems: Vec<RingElem>) -> Result<Self> {
        let first = elems
            .first()
            .ok_or_else(|| Error::Shape("empty vector needs explicit (n, q)".into()))?;
        let (n, m) = (first.n(), first.modulus());
        Self::new(elems, n, m)
    }

    pub fn width(&self) -> usize {
        self.elems.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn elems(&self) -> &[RingElem] {
        &self.elems
    }

    pub fn get(&self, i: usize) -> &RingElem {
        &self.elems[i]
    }

    pub fn into_elems(self) -> Vec<RingElem> {
        self.elems
    }

    pub fn norm_sq(&self) -> u128 {
        self.elems.iter().map(RingElem::norm_sq).sum()
    }

    /// Euclidean norm of the centered coefficient vector.
    pub fn norm_l2(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.modulus != other.modulus {
            return Err(Error::Mismatch("vectors disagree on (n, q)".into()));
        }
        if self.width() != other.width() {
            return Err(Error::Shape(format!(
                "vector widths {} and {}",
                self.width(),
                other.width()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let elems = self
            .elems
            .iter()
            .zip(&other.elems)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self { elems, ..*self })
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.modulus != other.modulus {
            return Err(Error::Mismatch("vectors disagree on (n, q)".into()));
        }
        let mut elems = self.elems.clone();
        elems.extend(other.elems.iter().cloned());
        Ok(Self { elems, ..*self })
    }
}

/// A row-major matrix over R_q.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingMatrix {
    rows: usize,
    cols: usize,
    n: usize,
    modulus: Modulus,
    data: Vec<RingElem>,
}

impl RingMatrix {
    pub fn zero(rows: usize, cols: usize, n: usize, modulus: Modulus) -> Self {
        Self {
            rows,
            cols,
            n,
            modulus,
            data: vec![RingElem::zero(n, modulus); rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, data: Vec<RingElem>, n: usize, modulus: Modulus) -> Result<Self> {
        check_dimension(n)?;
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|e| e.n() != n || e.modulus() != modulus) {
            return Err(Error::Mismatch("matrix entries disagree on (n, q)".into()));
        }
        Ok(Self {
            rows,
            cols,
            n,
            modulus,
            data,
        })
    }

    /// A single row.
    pub fn row(v: RingVector) -> Self {
        Self {
            rows: 1,
            cols: v.width(),
            n: v.n(),
            modulus: v.modulus(),
            data: v.into_elems(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn get(&self, r: usize, c: usize) -> &RingElem {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, e: RingElem) {
        debug_assert!(e.n() == self.n && e.modulus() == self.modulus);
        self.data[r * self.cols + c] = e;
    }

    pub fn entries(&self) -> &[RingElem] {
        &self.data
    }

    pub fn row_vector(&self, r: usize) -> RingVector {
        RingVector {
            n: self.n,
            modulus: self.modulus,
            elems: self.data[r * self.cols..(r + 1) * self.cols].to_vec(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.modulus != other.modulus {
            return Err(Error::Mismatch("matrices disagree on (n, q)".into()));
        }
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            a.add_assign(b);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            a.sub_assign(b);
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for a in &mut out.data {
            *a = a.neg();
        }
        out
    }

    /// Horizontal concatenation [self | other].
    pub fn hconcat(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.modulus != other.modulus {
            return Err(Error::Mismatch("matrices disagree on (n, q)".into()));
        }
        if self.rows != other.rows {
            return Err(Error::Shape("row counts differ".into()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
            data.extend_from_slice(&other.data[r * other.cols..(r + 1) * other.cols]);
        }
        Ok(Self {
            rows: self.rows,
            cols,
            n: self.n,
            modulus: self.modulus,
            data,
        })
    }

    /// Columns [start, end).
    pub fn columns(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.cols {
            return Err(Error::Shape(format!("column range {start}..{end} of {}", self.cols)));
        }
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.data[r * self.cols + start..r * self.cols + end]);
        }
        Ok(Self {
            rows: self.rows,
            cols,
            n: self.n,
            modulus: self.modulus,
            data,
        })
    }

    /// Ring-linear combination M·v.
    pub fn matvec(&self, v: &RingVector) -> Result<RingVector> {
        if self.n != v.n() || self.modulus != v.modulus() {
            return Err(Error::Mismatch("matrix and vector disagree on (n, q)".into()));
        }
        if self.cols != v.width() {
            return Err(Error::Shape(format!(
                "{} columns against a vector of width {}",
                self.cols,
                v.width()
            )));
        }
        let m = self.modulus;
        let n = self.n;
        if n <= SCHOOLBOOK_MAX_N {
            let elems = (0..self.rows)
                .map(|r| {
                    let mut acc = RingElem::zero(n, m);
                    for c in 0..self.cols {
                        acc.add_assign(&self.get(r, c).mul(v.get(c))?);
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            return RingVector::new(elems, n, m);
        }
        let half_q = bits_of((m.q() / 2) as u128);
        let np = primes_for_product(n, self.cols, half_q, half_q)?;
        let plan = NttPlan::get(n);
        let vf: Vec<Residues> = v.elems().iter().map(|e| e.forward(&plan, np)).collect();
        let elems = (0..self.rows)
            .map(|r| {
                let mut acc = plan.zero(np);
                for (c, x) in vf.iter().enumerate() {
                    let entry = self.get(r, c);
                    if !entry.is_zero() {
                        plan.mac(&mut acc, &entry.forward(&plan, np), x);
                    }
                }
                RingElem::from_coeffs_unchecked(plan.inverse_mod(acc, m.q()), m)
            })
            .collect();
        RingVector::new(elems, n, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m10() -> Modulus {
        Modulus::new(10).unwrap()
    }

    #[test]
    fn monomial_wraparound() {
        let m = m10();
        let x = RingElem::monomial(8, m, 1);
        let x7 = RingElem::monomial(8, m, 7);
        assert_eq!(x.mul(&x7).unwrap(), RingElem::constant(8, m, m.q() - 1));
        assert_eq!(RingElem::monomial(8, m, 8), RingElem::constant(8, m, m.q() - 1));
    }

    #[test]
    fn mismatched_moduli_rejected() {
        let a = RingElem::zero(8, m10());
        let b = RingElem::zero(8, Modulus::new(11).unwrap());
        assert!(matches!(a.add(&b), Err(Error::Mismatch(_))));
        assert!(matches!(a.mul(&RingElem::zero(16, m10())), Err(Error::Mismatch(_))));
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(RingElem::from_coeffs(vec![0; 12], m10()).is_err());
    }

    #[test]
    fn pythagorean_norm() {
        let m = m10();
        let e = RingElem::from_i64(&[3, -4, 0, 0], m).unwrap();
        assert_eq!(RingVector::from_elems(vec![e]).unwrap().norm_l2(), 5.0);
    }

    #[test]
    fn column_slicing_and_concat() {
        let m = m10();
        let row: Vec<RingElem> = (0..5).map(|i| RingElem::constant(4, m, i)).collect();
        let a = RingMatrix::row(RingVector::from_elems(row).unwrap());
        let left = a.columns(0, 2).unwrap();
        let right = a.columns(2, 5).unwrap();
        assert_eq!(left.hconcat(&right).unwrap(), a);
        assert!(a.columns(3, 6).is_err());
    }
}
