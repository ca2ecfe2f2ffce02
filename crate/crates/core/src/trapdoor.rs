//! Base-3 gadget machinery and G-trapdoors.
//!
//! A trapdoor for a row F of width W is an integer matrix P (W x k) with
//! F·P = g_k = [1, 3, ..., 3^{k-1}] over R_q. P is stored compactly: k of
//! its rows form ±I (the identity block, at `identity_start`), the remaining
//! W - k rows are the matrix T.
//!
//! Preimages are sampled perturbation-first: p has covariance
//! sigma^2 I - SIGMA_G^2 P P^T, the syndrome u - F·p is resolved with the
//! base-3 gadget sampler, and e = p + P·z. The covariance of e is then
//! sigma^2 I whatever P is.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::codec::{Reader, Tag, Writer};
use crate::ring::{Codec, IntMatrix, IntVector, Modulus, PreparedIntMatrix, PreparedMatrix, RingElem, RingMatrix};
use crate::perturb::Perturbation;
use crate::sampling::{uniform_ring_vector, CdtTable, GaussianParam, RandomStream, ZSampler};

/// Width of the gadget sampler's output distribution.
pub const SIGMA_G: f64 = 4.5;

/// Largest singular value bound for the gadget's own trapdoor (b + 1).
pub const S1_GADGET: f64 = 4.0;

/// The gadget row [3^0, ..., 3^{m-1}] mod q; entries past k - 1 are zero.
pub fn gadget(m: usize, n: usize, modulus: Modulus) -> RingMatrix {
    let data = (0..m).map(|j| RingElem::constant(n, modulus, modulus.pow3(j))).collect();
    RingMatrix::new(1, m, data, n, modulus).expect("valid gadget shape")
}

/// Balanced-ternary digits of one coefficient, least significant first.
fn ternary_digits(mut c: u64, k: usize, out: &mut [i64]) {
    for d in out.iter_mut().take(k) {
        match c % 3 {
            0 => *d = 0,
            1 => {
                *d = 1;
                c -= 1;
            }
            _ => {
                *d = -1;
                c += 1;
            }
        }
        c /= 3;
    }
}

/// Digits d (width m) with coefficients in {-1, 0, 1} and <g, d> = u.
pub fn gadget_decompose(u: &RingElem, m: usize) -> IntVector {
    let n = u.n();
    let k = u.modulus().k() as usize;
    let mut out = IntVector::zero(m, n);
    let mut digits = vec![0i64; k];
    for (i, &c) in u.coeffs().iter().enumerate() {
        ternary_digits(c, k, &mut digits);
        for (j, &d) in digits.iter().enumerate().take(m) {
            out.entry_mut(j)[i] = d;
        }
    }
    out
}

/// D (m x m, ternary) with g·D = a for a 1 x m row a.
pub fn gadget_decompose_matrix(a: &RingMatrix) -> Result<IntMatrix> {
    if a.rows() != 1 {
        return Err(Error::Shape("gadget decomposition expects a single row".into()));
    }
    let m = a.cols();
    let cols: Vec<IntVector> = a.entries().iter().map(|e| gadget_decompose(e, m)).collect();
    IntMatrix::from_columns(&cols)
}

/// Exact sampler over cosets of the gadget lattice {x : <g_k, x> = v mod q}.
#[derive(Clone, Debug)]
pub struct GadgetSampler {
    k: usize,
    /// Tables at centers 0, -1/3, -2/3 with width SIGMA_G / 3.
    tables: [Arc<CdtTable>; 3],
}

impl GadgetSampler {
    pub fn new(k: usize) -> Self {
        let s = SIGMA_G / 3.0;
        let t = |c: f64| Arc::new(CdtTable::new(&GaussianParam { sigma: s, center: c }));
        Self {
            k,
            tables: [t(0.0), t(-1.0 / 3.0), t(-2.0 / 3.0)],
        }
    }

    /// Fills `out` (length k) with x such that sum x_j 3^j = v mod 3^k.
    #[inline]
    pub fn sample_coeff(&self, stream: &mut RandomStream, v: u64, out: &mut [i64]) {
        let mut u = v as i64;
        for x in out.iter_mut().take(self.k) {
            let r = u.rem_euclid(3);
            let y = self.tables[r as usize].sample(stream);
            *x = r + 3 * y;
            u = (u - *x) / 3;
        }
    }

    /// z (k ring entries) with g_k·z = v in R_q.
    pub fn sample(&self, stream: &mut RandomStream, v: &RingElem) -> IntVector {
        let n = v.n();
        let mut z = IntVector::zero(self.k, n);
        let mut digits = vec![0i64; self.k];
        for (i, &c) in v.coeffs().iter().enumerate() {
            self.sample_coeff(stream, c, &mut digits);
            for (j, &d) in digits.iter().enumerate() {
                z.entry_mut(j)[i] = d;
            }
        }
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum TrapdoorKind {
    Generated = 1,
    Delegated = 2,
    Extended = 3,
}

/// Short matrix P with F·P = g_k for one public row F.
#[derive(Clone, Debug, PartialEq)]
pub struct Trapdoor {
    kind: TrapdoorKind,
    t: IntMatrix,
    identity_start: usize,
    sign: i64,
    width: usize,
    modulus: Modulus,
    quality: f64,
    binding: [u8; 32],
}

/// Output of [`trap_gen`].
pub type GTrapdoor = Trapdoor;
/// Output of [`trap_del`].
pub type DelegatedTrapdoor = Trapdoor;

/// SHA-256 of the canonical encoding of a public row.
pub fn binding_of(f: &RingMatrix) -> [u8; 32] {
    Sha256::digest(f.to_bytes()).into()
}

impl Trapdoor {
    pub fn kind(&self) -> TrapdoorKind {
        self.kind
    }

    /// The non-identity rows of P.
    pub fn t(&self) -> &IntMatrix {
        &self.t
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn k(&self) -> usize {
        self.modulus.k() as usize
    }

    pub fn n(&self) -> usize {
        self.t.n()
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn identity_start(&self) -> usize {
        self.identity_start
    }

    pub fn sign(&self) -> i64 {
        self.sign
    }

    /// Nominal bound on s1(P), used for the sampler floor.
    pub fn quality(&self) -> f64 {
        self.quality
    }

    pub fn binding(&self) -> [u8; 32] {
        self.binding
    }

    pub fn matches(&self, f: &RingMatrix) -> bool {
        f.rows() == 1 && f.cols() == self.width && binding_of(f) == self.binding
    }

    /// Nominal floor checked by [`gau_sample`]. The perturbation step also
    /// rejects widths below SIGMA_G s1(P), measured on the actual P.
    pub fn sigma_floor(&self) -> f64 {
        self.quality * (self.n() as f64).log2().sqrt()
    }

    fn is_identity_row(&self, r: usize) -> bool {
        r >= self.identity_start && r < self.identity_start + self.k()
    }

    /// Squared norm of every row of P, in column order of F.
    pub fn p_row_norms_sq(&self) -> Vec<u128> {
        let t_norms = self.t.row_norms_sq();
        let mut it = t_norms.into_iter();
        (0..self.width)
            .map(|r| if self.is_identity_row(r) { 1 } else { it.next().unwrap() })
            .collect()
    }

    /// The full W x k matrix P.
    pub fn p_matrix(&self) -> IntMatrix {
        let (k, n) = (self.k(), self.n());
        let mut p = IntMatrix::zero(self.width, k, n);
        let mut t_row = 0;
        for r in 0..self.width {
            if self.is_identity_row(r) {
                let j = r - self.identity_start;
                p.entry_mut(r, j)[0] = self.sign;
            } else {
                for c in 0..k {
                    p.entry_mut(r, c).copy_from_slice(self.t.entry(t_row, c));
                }
                t_row += 1;
            }
        }
        p
    }

    /// Checks F·P = g_k exactly.
    pub fn relation_holds(&self, f: &RingMatrix) -> Result<bool> {
        let lhs = f.mul_int_matrix(&self.p_matrix())?;
        let g = gadget(self.k(), self.n(), self.modulus);
        Ok(lhs == g)
    }
}

impl Codec for Trapdoor {
    fn write(&self, w: &mut Writer) {
        self.t.write_tagged(w, Tag::Trapdoor, self.modulus.k());
        w.u32(self.width as u32);
        w.u32(self.identity_start as u32);
        w.u8(if self.sign > 0 { 1 } else { 0xff });
        w.u8(self.kind as u8);
        w.f64(self.quality);
        w.bytes(&self.binding);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let (t, h) = IntMatrix::read_tagged(r, Tag::Trapdoor)?;
        let modulus = Modulus::new(h.k).map_err(|e| Error::Decode(e.to_string()))?;
        let width = r.u32()? as usize;
        let identity_start = r.u32()? as usize;
        let sign = match r.u8()? {
            1 => 1,
            0xff => -1,
            s => return Err(Error::Decode(format!("bad trapdoor sign byte {s}"))),
        };
        let kind = match r.u8()? {
            1 => TrapdoorKind::Generated,
            2 => TrapdoorKind::Delegated,
            3 => TrapdoorKind::Extended,
            other => return Err(Error::Decode(format!("bad trapdoor kind {other}"))),
        };
        let quality = r.f64()?;
        let binding: [u8; 32] = r.bytes(32)?.try_into().unwrap();
        let k = modulus.k() as usize;
        if t.cols() != k || t.rows() + k != width || identity_start + k > width {
            return Err(Error::Decode("trapdoor dimensions are inconsistent".into()));
        }
        Ok(Self {
            kind,
            t,
            identity_start,
            sign,
            width,
            modulus,
            quality,
            binding,
        })
    }
}

/// Generates A = [Ā | g_k - Ā·T] (width w + k) with T Gaussian of width
/// sigma_tg, so that A·[T; I] = g_k.
pub fn trap_gen(
    stream: &mut RandomStream,
    n: usize,
    modulus: Modulus,
    w: usize,
    sigma_tg: f64,
) -> Result<(RingMatrix, GTrapdoor)> {
    let k = modulus.k() as usize;
    let min_w = 2 * (modulus.bits() as usize + 1);
    if w < min_w {
        return Err(Error::InvalidParams(format!(
            "trapdoor width w = {w} is below 2(ceil(log2 q) + 1) = {min_w}"
        )));
    }
    let param = GaussianParam::centered(sigma_tg)?;
    let sampler = ZSampler::new(&param);
    let a_bar = RingMatrix::row(uniform_ring_vector(stream, modulus, n, w));
    let row_cap = 1.1 * sigma_tg * ((k * n) as f64).sqrt();
    let t = loop {
        let data = (0..w * k * n).map(|_| sampler.sample(stream)).collect();
        let t = IntMatrix::from_data(w, k, n, data)?;
        if t.row_norms_sq().iter().all(|&r| (r as f64).sqrt() <= row_cap) {
            break t;
        }
    };
    let at = a_bar.mul_int_matrix(&t)?;
    let right = gadget(k, n, modulus).sub(&at)?;
    let a = a_bar.hconcat(&right)?;
    let quality = sigma_tg * (((w * n) as f64).sqrt() + ((k * n) as f64).sqrt());
    let binding = binding_of(&a);
    Ok((
        a,
        Trapdoor {
            kind: TrapdoorKind::Generated,
            t,
            identity_start: w,
            sign: 1,
            width: w + k,
            modulus,
            quality,
            binding,
        },
    ))
}

fn check_floor(trapdoor: &Trapdoor, sigma: f64) -> Result<()> {
    let floor = trapdoor.sigma_floor();
    if sigma.is_nan() || sigma < floor * (1.0 - 1e-12) {
        return Err(Error::SigmaBelowFloor { sigma, floor });
    }
    Ok(())
}

/// Precomputed state for repeated preimage sampling on one (F, P, sigma).
#[derive(Clone, Debug)]
pub struct PreparedSampler {
    f: PreparedMatrix,
    t: PreparedIntMatrix,
    identity_start: usize,
    sign: i64,
    k: usize,
    n: usize,
    modulus: Modulus,
    perturbation: Perturbation,
    gadget: GadgetSampler,
    sigma: f64,
}

impl PreparedSampler {
    pub fn new(f: &RingMatrix, trapdoor: &Trapdoor, sigma: f64) -> Result<Self> {
        if !trapdoor.matches(f) {
            return Err(Error::TrapdoorMismatch);
        }
        Self::new_unchecked(f, trapdoor, sigma)
    }

    fn new_unchecked(f: &RingMatrix, trapdoor: &Trapdoor, sigma: f64) -> Result<Self> {
        check_floor(trapdoor, sigma)?;
        let perturbation = Perturbation::new(&trapdoor.p_matrix(), SIGMA_G, sigma)?;
        // z has coefficients below 13 * SIGMA_G + 2.
        let rhs_bits = 7.0;
        Ok(Self {
            f: PreparedMatrix::new(f)?,
            t: PreparedIntMatrix::new(trapdoor.t(), rhs_bits)?,
            identity_start: trapdoor.identity_start,
            sign: trapdoor.sign,
            k: trapdoor.k(),
            n: trapdoor.n(),
            modulus: trapdoor.modulus,
            perturbation,
            gadget: GadgetSampler::new(trapdoor.k()),
            sigma,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn width(&self) -> usize {
        self.perturbation.width()
    }

    /// e with F·e = u.
    pub fn sample(&self, stream: &mut RandomStream, u: &RingElem) -> Result<IntVector> {
        if u.n() != self.n || u.modulus() != self.modulus {
            return Err(Error::Mismatch("target does not live in the trapdoor's ring".into()));
        }
        let w = self.width();
        let p = self.perturbation.sample(stream);
        let fp = self.f.mul_int_vector(&p)?;
        let v = u.sub(fp.get(0))?;
        let z = self.gadget.sample(stream, &v);
        let tz = self.t.mul_vector(&z)?;
        let mut e = p;
        let mut t_row = 0;
        for r in 0..w {
            let add: &[i64] = if r >= self.identity_start && r < self.identity_start + self.k {
                z.entry(r - self.identity_start)
            } else {
                t_row += 1;
                tz.entry(t_row - 1)
            };
            let sign = if r >= self.identity_start && r < self.identity_start + self.k {
                self.sign
            } else {
                1
            };
            for (dst, &x) in e.entry_mut(r).iter_mut().zip(add) {
                *dst += sign * x;
            }
        }
        Ok(e)
    }
}

/// Samples e with F·e = u and every coordinate of width sigma.
pub fn gau_sample(
    stream: &mut RandomStream,
    f: &RingMatrix,
    trapdoor: &Trapdoor,
    u: &RingElem,
    sigma: f64,
) -> Result<IntVector> {
    PreparedSampler::new(f, trapdoor, sigma)?.sample(stream, u)
}

/// Finds the offset of the block of `f_prime` that `trapdoor` belongs to.
pub fn locate_block(trapdoor: &Trapdoor, f_prime: &RingMatrix) -> Option<usize> {
    if f_prime.rows() != 1 || f_prime.cols() < trapdoor.width {
        return None;
    }
    (0..=f_prime.cols() - trapdoor.width).find(|&o| {
        f_prime
            .columns(o, o + trapdoor.width)
            .map(|b| trapdoor.matches(&b))
            .unwrap_or(false)
    })
}

/// Delegates `parent` (owning the columns [offset, offset + W) of F')
/// to a trapdoor for all of F'.
pub fn trap_del(
    stream: &mut RandomStream,
    parent: &Trapdoor,
    f_prime: &RingMatrix,
    offset: usize,
    sigma_td: f64,
) -> Result<DelegatedTrapdoor> {
    let w_own = parent.width;
    if f_prime.rows() != 1 || offset + w_own > f_prime.cols() {
        return Err(Error::BlockAbsent);
    }
    let owned = f_prime.columns(offset, offset + w_own)?;
    if !parent.matches(&owned) {
        return Err(Error::BlockAbsent);
    }
    let sampler = PreparedSampler::new_unchecked(&owned, parent, sigma_td)?;
    delegate_with(stream, &sampler, f_prime, offset, w_own, sigma_td)
}

fn delegate_with(
    stream: &mut RandomStream,
    sampler: &PreparedSampler,
    f_prime: &RingMatrix,
    offset: usize,
    w_own: usize,
    sigma_td: f64,
) -> Result<DelegatedTrapdoor> {
    let modulus = f_prime.modulus();
    let n = f_prime.n();
    let k = modulus.k() as usize;
    let width = f_prime.cols();
    if width < w_own + k {
        return Err(Error::Shape("extended row is too narrow to delegate into".into()));
    }
    // Identity block: the last k columns, unless the owned block is there.
    let identity_start = if offset + w_own <= width - k {
        width - k
    } else {
        if offset < k {
            return Err(Error::Shape("no room for the identity block".into()));
        }
        offset - k
    };
    let free: Vec<usize> = (0..width)
        .filter(|&c| !(c >= offset && c < offset + w_own) && !(c >= identity_start && c < identity_start + k))
        .collect();
    let free_row = RingMatrix::new(
        1,
        free.len(),
        free.iter().map(|&c| f_prime.get(0, c).clone()).collect(),
        n,
        modulus,
    )?;
    let free_prepared = PreparedMatrix::new(&free_row)?;
    let x_sampler = ZSampler::new(&GaussianParam::centered(sigma_td)?);
    let g = gadget(k, n, modulus);

    let mut columns = Vec::with_capacity(k);
    for j in 0..k {
        let x_data = (0..free.len() * n).map(|_| x_sampler.sample(stream)).collect();
        let x = IntVector::from_data(n, x_data)?;
        let fx = free_prepared.mul_int_vector(&x)?;
        let target = g
            .get(0, j)
            .sub(f_prime.get(0, identity_start + j))?
            .sub(fx.get(0))?;
        let y = sampler.sample(stream, &target)?;
        // Assemble the non-identity rows in column order of F'.
        let mut col = IntVector::zero(width - k, n);
        let (mut xi, mut row) = (0, 0);
        for c in 0..width {
            if c >= identity_start && c < identity_start + k {
                continue;
            }
            let src = if c >= offset && c < offset + w_own {
                y.entry(c - offset)
            } else {
                xi += 1;
                x.entry(xi - 1)
            };
            col.entry_mut(row).copy_from_slice(src);
            row += 1;
        }
        columns.push(col);
    }
    let t = IntMatrix::from_columns(&columns)?;
    let quality = sigma_td * ((((width - k) * n) as f64).sqrt() + ((k * n) as f64).sqrt());
    Ok(Trapdoor {
        kind: TrapdoorKind::Delegated,
        t,
        identity_start,
        sign: 1,
        width,
        modulus,
        quality,
        binding: binding_of(f_prime),
    })
}

/// Delegation helper that keeps the parent's sampler across calls.
#[derive(Clone, Debug)]
pub struct Delegator {
    sampler: PreparedSampler,
    binding: [u8; 32],
    w_own: usize,
}

impl Delegator {
    pub fn new(owned: &RingMatrix, parent: &Trapdoor, sigma_td: f64) -> Result<Self> {
        Ok(Self {
            sampler: PreparedSampler::new(owned, parent, sigma_td)?,
            binding: parent.binding,
            w_own: parent.width,
        })
    }

    pub fn delegate(&self, stream: &mut RandomStream, f_prime: &RingMatrix, offset: usize) -> Result<DelegatedTrapdoor> {
        if f_prime.rows() != 1 || offset + self.w_own > f_prime.cols() {
            return Err(Error::BlockAbsent);
        }
        if binding_of(&f_prime.columns(offset, offset + self.w_own)?) != self.binding {
            return Err(Error::BlockAbsent);
        }
        let sigma = self.sampler.sigma();
        delegate_with(stream, &self.sampler, f_prime, offset, self.w_own, sigma)
    }
}

/// out += Rot(a)·x, or Rot(a)^T·x when `adjoint` is set.
fn negacyclic_f64(a: &[i64], x: &[f64], out: &mut [f64], adjoint: bool) {
    let n = a.len();
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let ai = ai as f64;
        for j in 0..n {
            let (idx, sgn) = if i + j < n { (i + j, ai) } else { (i + j - n, -ai) };
            if adjoint {
                out[j] += sgn * x[idx];
            } else {
                out[idx] += sgn * x[j];
            }
        }
    }
}

/// Largest singular value of the coefficient embedding of an integer ring
/// matrix, by power iteration on M^T M.
pub fn spectral_norm(m: &IntMatrix, steps: usize) -> f64 {
    let (rows, cols, n) = (m.rows(), m.cols(), m.n());
    if m.max_abs() == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..cols * n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut sigma = 0.0;
    for _ in 0..steps {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        let mut y = vec![0.0; rows * n];
        for r in 0..rows {
            for c in 0..cols {
                let (src, dst) = (&x[c * n..(c + 1) * n], &mut y[r * n..(r + 1) * n]);
                negacyclic_f64(m.entry(r, c), src, dst, false);
            }
        }
        sigma = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut z = vec![0.0; cols * n];
        for r in 0..rows {
            for c in 0..cols {
                let (src, dst) = (&y[r * n..(r + 1) * n], &mut z[c * n..(c + 1) * n]);
                negacyclic_f64(m.entry(r, c), src, dst, true);
            }
        }
        x = z;
    }
    sigma
}

/// Trapdoor for F = [A | A·R + sign·G] from the gadget's own trapdoor.
/// The caller asserts that F has this form.
pub fn trap_extend(a: &RingMatrix, r: &IntMatrix, sign: i64) -> Result<Trapdoor> {
    let m = a.cols();
    let (n, modulus) = (a.n(), a.modulus());
    let k = modulus.k() as usize;
    if a.rows() != 1 || r.rows() != m || r.cols() != m || r.n() != n {
        return Err(Error::Shape("trap_extend expects A (1 x m) and R (m x m)".into()));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidParams("sign must be +1 or -1".into()));
    }
    if k > m {
        return Err(Error::Shape("gadget is wider than A".into()));
    }
    // Top rows: -sign·R (first k columns); bottom rows past the identity: 0.
    let mut t = IntMatrix::zero(2 * m - k, k, n);
    for i in 0..m {
        for j in 0..k {
            for (dst, &x) in t.entry_mut(i, j).iter_mut().zip(r.entry(i, j)) {
                *dst = -sign * x;
            }
        }
    }
    let ar = a.mul_int_matrix(r)?;
    let g = gadget(m, n, modulus);
    let right = if sign > 0 { ar.add(&g)? } else { ar.sub(&g)? };
    let f = a.hconcat(&right)?;
    let quality = (spectral_norm(r, 50) + 1.0) * S1_GADGET;
    Ok(Trapdoor {
        kind: TrapdoorKind::Extended,
        t,
        identity_start: m,
        sign,
        width: 2 * m,
        modulus,
        quality,
        binding: binding_of(&f),
    })
}

/// Column-wise preimages R with A_i·R = A_target.
pub fn sample_r(
    stream: &mut RandomStream,
    a_i: &RingMatrix,
    trapdoor: &Trapdoor,
    a_target: &RingMatrix,
    sigma: f64,
) -> Result<IntMatrix> {
    if a_target.rows() != 1 {
        return Err(Error::Shape("target must be a single row".into()));
    }
    let sampler = PreparedSampler::new(a_i, trapdoor, sigma)?;
    let cols = a_target
        .entries()
        .iter()
        .map(|u| sampler.sample(stream, u))
        .collect::<Result<Vec<_>>>()?;
    IntMatrix::from_columns(&cols)
}

/// F·e for a single row F.
pub fn apply(f: &RingMatrix, e: &IntVector) -> Result<RingElem> {
    Ok(f.mul_int_vector(e)?.get(0).clone())
}

/// Random target in R_q.
pub fn random_target(stream: &mut RandomStream, n: usize, modulus: Modulus) -> RingElem {
    crate::sampling::uniform_ring_elem(stream, modulus, n)
}
