//! Ring elements with plain integer coefficients.
//!
//! Short vectors (trapdoors, preimages, signatures, R matrices) live in
//! R = Z[X]/(X^n+1) rather than R_q; their norms are taken over the integers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::modulus::Modulus;
use super::ntt::{bits_of, NttPlan, Residues};
use super::poly::{check_dimension, negacyclic_schoolbook, primes_for_product, RingElem, RingMatrix, RingVector, SCHOOLBOOK_MAX_N};
use crate::error::{Error, Result};

/// A vector over R with i64 coefficients, stored flat (width * n).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntVector {
    n: usize,
    data: Vec<i64>,
}

impl IntVector {
    pub fn zero(width: usize, n: usize) -> Self {
        Self {
            n,
            data: vec![0; width * n],
        }
    }

    pub fn from_data(n: usize, data: Vec<i64>) -> Result<Self> {
        check_dimension(n)?;
        if !data.len().is_multiple_of(n) {
            return Err(Error::Shape(format!(
                "{} coefficients is not a multiple of n = {n}",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i64] {
        &mut self.data
    }

    pub fn entry(&self, i: usize) -> &[i64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn entry_mut(&mut self, i: usize) -> &mut [i64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Entries [start, end) as a new vector.
    pub fn slice(&self, start: usize, end: usize) -> IntVector {
        IntVector {
            n: self.n,
            data: self.data[start * self.n..end * self.n].to_vec(),
        }
    }

    pub fn concat(&self, other: &IntVector) -> Result<IntVector> {
        if self.n != other.n {
            return Err(Error::Mismatch("vectors disagree on n".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(IntVector { n: self.n, data })
    }

    pub fn norm_sq(&self) -> u128 {
        self.data.iter().map(|&c| (c as i128 * c as i128) as u128).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Euclidean norm of entries [start, end).
    pub fn range_norm(&self, start: usize, end: usize) -> f64 {
        (self.data[start * self.n..end * self.n]
            .iter()
            .map(|&c| (c as i128 * c as i128) as u128)
            .sum::<u128>() as f64)
            .sqrt()
    }

    pub fn max_abs(&self) -> u64 {
        self.data.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &IntVector) -> Result<IntVector> {
        if self.n != other.n || self.data.len() != other.data.len() {
            return Err(Error::Shape("vector shapes differ".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.checked_add(b).ok_or_else(|| Error::Overflow("vector sum".into())))
            .collect::<Result<_>>()?;
        Ok(IntVector { n: self.n, data })
    }

    pub fn to_ring(&self, modulus: Modulus) -> RingVector {
        let elems = (0..self.width())
            .map(|i| {
                RingElem::from_coeffs_unchecked(
                    self.entry(i).iter().map(|&c| modulus.reduce_i64(c)).collect(),
                    modulus,
                )
            })
            .collect();
        RingVector::new(elems, self.n, modulus).expect("dimension already validated")
    }

    pub fn from_ring(v: &RingVector) -> IntVector {
        let mut data = Vec::with_capacity(v.width() * v.n());
        for e in v.elems() {
            data.extend(e.centered());
        }
        IntVector { n: v.n(), data }
    }
}

/// A row-major matrix over R with i64 coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    n: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize, n: usize) -> Self {
        Self {
            rows,
            cols,
            n,
            data: vec![0; rows * cols * n],
        }
    }

    pub fn identity(dim: usize, n: usize) -> Self {
        let mut m = Self::zero(dim, dim, n);
        for i in 0..dim {
            m.entry_mut(i, i)[0] = 1;
        }
        m
    }

    pub fn from_data(rows: usize, cols: usize, n: usize, data: Vec<i64>) -> Result<Self> {
        check_dimension(n)?;
        if data.len() != rows * cols * n {
            return Err(Error::Shape(format!(
                "{} coefficients for a {rows}x{cols} matrix at n = {n}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, n, data })
    }

    /// Matrix whose column j is `cols[j]`.
    pub fn from_columns(columns: &[IntVector]) -> Result<Self> {
        let first = columns
            .first()
            .ok_or_else(|| Error::Shape("no columns".into()))?;
        let (rows, n) = (first.width(), first.n());
        let mut m = Self::zero(rows, columns.len(), n);
        for (j, col) in columns.iter().enumerate() {
            if col.width() != rows || col.n() != n {
                return Err(Error::Shape("columns differ in shape".into()));
            }
            for i in 0..rows {
                m.entry_mut(i, j).copy_from_slice(col.entry(i));
            }
        }
        Ok(m)
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

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn entry(&self, r: usize, c: usize) -> &[i64] {
        let off = (r * self.cols + c) * self.n;
        &self.data[off..off + self.n]
    }

    pub fn entry_mut(&mut self, r: usize, c: usize) -> &mut [i64] {
        let off = (r * self.cols + c) * self.n;
        &mut self.data[off..off + self.n]
    }

    pub fn column(&self, c: usize) -> IntVector {
        let mut data = Vec::with_capacity(self.rows * self.n);
        for r in 0..self.rows {
            data.extend_from_slice(self.entry(r, c));
        }
        IntVector { n: self.n, data }
    }

    pub fn max_abs(&self) -> u64 {
        self.data.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// Squared norm of each row's coefficient vector.
    pub fn row_norms_sq(&self) -> Vec<u128> {
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols * self.n..(r + 1) * self.cols * self.n]
                    .iter()
                    .map(|&c| (c as i128 * c as i128) as u128)
                    .sum()
            })
            .collect()
    }

    pub fn frobenius_sq(&self) -> u128 {
        self.data.iter().map(|&c| (c as i128 * c as i128) as u128).sum()
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|c| *c = -*c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols, self.n) != (other.rows, other.cols, other.n) {
            return Err(Error::Shape("matrix shapes differ".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.checked_add(b).ok_or_else(|| Error::Overflow("matrix sum".into())))
            .collect::<Result<_>>()?;
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, s: i64) -> Result<Self> {
        let data = self
            .data
            .iter()
            .map(|&a| a.checked_mul(s).ok_or_else(|| Error::Overflow("matrix scale".into())))
            .collect::<Result<_>>()?;
        Ok(Self { data, ..*self })
    }

    /// Exact product over R.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.cols != other.rows {
            return Err(Error::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = self.n;
        let bits_a = bits_of(self.max_abs() as u128);
        let bits_b = bits_of(other.max_abs() as u128);
        let mut out = Self::zero(self.rows, other.cols, n);
        if n <= SCHOOLBOOK_MAX_N {
            for r in 0..self.rows {
                for c in 0..other.cols {
                    let mut acc = vec![0i128; n];
                    for j in 0..self.cols {
                        for (a, p) in acc.iter_mut().zip(negacyclic_schoolbook(self.entry(r, j), other.entry(j, c))) {
                            *a += p;
                        }
                    }
                    for (dst, v) in out.entry_mut(r, c).iter_mut().zip(acc) {
                        *dst = i64::try_from(v).map_err(|_| Error::Overflow("matrix product".into()))?;
                    }
                }
            }
            return Ok(out);
        }
        let np = primes_for_product(n, self.cols, bits_a, bits_b)?;
        let plan = NttPlan::get(n);
        let fa: Vec<Residues> = (0..self.rows * self.cols)
            .map(|i| plan.forward_i64(&self.data[i * n..(i + 1) * n], np))
            .collect();
        let fb: Vec<Residues> = (0..other.rows * other.cols)
            .map(|i| plan.forward_i64(&other.data[i * n..(i + 1) * n], np))
            .collect();
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = plan.zero(np);
                for j in 0..self.cols {
                    plan.mac(&mut acc, &fa[r * self.cols + j], &fb[j * other.cols + c]);
                }
                out.entry_mut(r, c).copy_from_slice(&plan.inverse_i64(acc)?);
            }
        }
        Ok(out)
    }

    /// Exact matrix-vector product over R.
    pub fn mul_vector(&self, v: &IntVector) -> Result<IntVector> {
        let m = Self::from_columns(std::slice::from_ref(v))?;
        Ok(self.mul(&m)?.column(0))
    }

    pub fn to_ring(&self, modulus: Modulus) -> RingMatrix {
        let data = self
            .data
            .chunks(self.n)
            .map(|c| RingElem::from_coeffs_unchecked(c.iter().map(|&x| modulus.reduce_i64(x)).collect(), modulus))
            .collect();
        RingMatrix::new(self.rows, self.cols, data, self.n, modulus).expect("shape already validated")
    }
}

impl RingMatrix {
    /// M·e over R_q for an integer vector e (entries reduced mod q first).
    pub fn mul_int_vector(&self, e: &IntVector) -> Result<RingVector> {
        PreparedMatrix::new(self)?.mul_int_vector(e)
    }

    /// M·T over R_q for an integer matrix T.
    pub fn mul_int_matrix(&self, t: &IntMatrix) -> Result<RingMatrix> {
        if self.n() != t.n() || self.cols() != t.rows() {
            return Err(Error::Shape(format!(
                "{}x{} times {}x{}",
                self.rows(),
                self.cols(),
                t.rows(),
                t.cols()
            )));
        }
        let m = self.modulus();
        let n = self.n();
        let hq = bits_of((m.q() / 2) as u128);
        let tb = bits_of(t.max_abs() as u128).min(hq);
        let np = primes_for_product(n, self.cols(), hq, tb)?;
        let plan = NttPlan::get(n);
        let reduce_t = t.max_abs() > m.q() / 2;
        let ft: Vec<Option<Residues>> = t
            .data
            .chunks(n)
            .map(|c| {
                if c.iter().all(|&x| x == 0) {
                    None
                } else if reduce_t {
                    let red: Vec<i64> = c.iter().map(|&x| m.center(m.reduce_i64(x))).collect();
                    Some(plan.forward_i64(&red, np))
                } else {
                    Some(plan.forward_i64(c, np))
                }
            })
            .collect();
        let fa: Vec<Residues> = self.entries().iter().map(|e| e.forward(&plan, np)).collect();
        let mut data = Vec::with_capacity(self.rows() * t.cols());
        for r in 0..self.rows() {
            for c in 0..t.cols() {
                let mut acc = plan.zero(np);
                for j in 0..self.cols() {
                    if let Some(b) = &ft[j * t.cols() + c] {
                        plan.mac(&mut acc, &fa[r * self.cols() + j], b);
                    }
                }
                data.push(RingElem::from_coeffs_unchecked(plan.inverse_mod(acc, m.q()), m));
            }
        }
        RingMatrix::new(self.rows(), t.cols(), data, n, m)
    }
}

/// A ring matrix with its entries kept in evaluation form, for repeated
/// products against short vectors.
#[derive(Clone, Debug)]
pub struct PreparedMatrix {
    plan: Arc<NttPlan>,
    np: usize,
    rows: usize,
    cols: usize,
    modulus: Modulus,
    entries: Vec<Residues>,
}

impl PreparedMatrix {
    pub fn new(m: &RingMatrix) -> Result<Self> {
        let modulus = m.modulus();
        let hq = bits_of((modulus.q() / 2) as u128);
        let np = primes_for_product(m.n(), m.cols(), hq, hq)?;
        let plan = NttPlan::get(m.n());
        let entries = m.entries().iter().map(|e| e.forward(&plan, np)).collect();
        Ok(Self {
            plan,
            np,
            rows: m.rows(),
            cols: m.cols(),
            modulus,
            entries,
        })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mul_int_vector(&self, e: &IntVector) -> Result<RingVector> {
        let n = self.plan.n();
        if e.n() != n || e.width() != self.cols {
            return Err(Error::Shape(format!(
                "{} columns against a vector of width {}",
                self.cols,
                e.width()
            )));
        }
        let m = self.modulus;
        let hq = bits_of((m.q() / 2) as u128);
        // Reduce only when the raw product would need more primes.
        let raw_np = primes_for_product(n, self.cols, hq, bits_of(e.max_abs() as u128)).ok();
        let reduce = !matches!(raw_np, Some(np) if np <= self.np);
        let np = self.np;
        let fe: Vec<Option<Residues>> = (0..self.cols)
            .map(|i| {
                let c = e.entry(i);
                if c.iter().all(|&x| x == 0) {
                    None
                } else if !reduce {
                    Some(self.plan.forward_i64(c, np))
                } else {
                    let red: Vec<i64> = c.iter().map(|&x| m.center(m.reduce_i64(x))).collect();
                    Some(self.plan.forward_i64(&red, np))
                }
            })
            .collect();
        let elems = (0..self.rows)
            .map(|r| {
                let pairs = fe
                    .iter()
                    .enumerate()
                    .filter_map(|(c, x)| x.as_ref().map(|x| (&self.entries[r * self.cols + c], x)));
                let acc = self.plan.dot(np, pairs);
                RingElem::from_coeffs_unchecked(self.plan.inverse_mod(acc, m.q()), m)
            })
            .collect();
        RingVector::new(elems, n, m)
    }
}

/// An integer matrix in evaluation form, for repeated exact products.
#[derive(Clone, Debug)]
pub struct PreparedIntMatrix {
    plan: Arc<NttPlan>,
    np: usize,
    rhs_bits: f64,
    matrix: IntMatrix,
    entries: Vec<Residues>,
}

impl PreparedIntMatrix {
    /// Prepares for right-hand sides with coefficients below 2^rhs_bits.
    pub fn new(t: &IntMatrix, rhs_bits: f64) -> Result<Self> {
        let np = primes_for_product(t.n(), t.cols(), bits_of(t.max_abs() as u128), rhs_bits)?;
        let plan = NttPlan::get(t.n());
        let entries = t.data.chunks(t.n()).map(|c| plan.forward_i64(c, np)).collect();
        Ok(Self {
            plan,
            np,
            rhs_bits,
            matrix: t.clone(),
            entries,
        })
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn mul_vector(&self, v: &IntVector) -> Result<IntVector> {
        if bits_of(v.max_abs() as u128) > self.rhs_bits || self.plan.n() <= SCHOOLBOOK_MAX_N {
            return self.matrix.mul_vector(v);
        }
        let (rows, cols, n) = (self.matrix.rows(), self.matrix.cols(), self.plan.n());
        if v.n() != n || v.width() != cols {
            return Err(Error::Shape("matrix and vector shapes differ".into()));
        }
        let fv: Vec<Residues> = (0..cols).map(|i| self.plan.forward_i64(v.entry(i), self.np)).collect();
        let mut out = IntVector::zero(rows, n);
        for r in 0..rows {
            let acc = self.plan.dot(self.np, fv.iter().enumerate().map(|(c, x)| (&self.entries[r * cols + c], x)));
            out.entry_mut(r).copy_from_slice(&self.plan.inverse_i64(acc)?);
        }
        Ok(out)
    }
}
