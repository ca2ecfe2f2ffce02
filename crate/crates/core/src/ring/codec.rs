//! Versioned little-endian binary format.
//!
//! Every object starts with a 23-byte header:
//!
//! ```text
//! "BTRS" | version u16 | tag u8 | n u32 | k u32 | rows u32 | cols u32
//! ```
//!
//! followed by a u64 coefficient count and the coefficients (u64 canonical
//! for ring objects, i64 for integer objects). Container objects embed
//! complete child objects after their header. Tags with the high bit set
//! mark secret material.

use super::int::{IntMatrix, IntVector};
use super::modulus::Modulus;
use super::poly::{RingElem, RingMatrix, RingVector};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BTRS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 23;
pub const SECRET_FLAG: u8 = 0x80;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Tag {
    Elem = 0x01,
    Vector = 0x02,
    Matrix = 0x03,
    IntVector = 0x04,
    IntMatrix = 0x05,
    Signature = 0x06,
    VerificationKey = 0x07,
    Trapdoor = 0x08 | SECRET_FLAG,
    SigningKey = 0x09 | SECRET_FLAG,
}

impl Tag {
    pub fn from_byte(b: u8) -> Result<Tag> {
        Ok(match b {
            0x01 => Tag::Elem,
            0x02 => Tag::Vector,
            0x03 => Tag::Matrix,
            0x04 => Tag::IntVector,
            0x05 => Tag::IntMatrix,
            0x06 => Tag::Signature,
            0x07 => Tag::VerificationKey,
            0x88 => Tag::Trapdoor,
            0x89 => Tag::SigningKey,
            other => return Err(Error::Decode(format!("unknown object tag 0x{other:02x}"))),
        })
    }

    pub fn is_secret(self) -> bool {
        self as u8 & SECRET_FLAG != 0
    }
}

/// Decoded header fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub tag: Tag,
    pub n: u32,
    pub k: u32,
    pub rows: u32,
    pub cols: u32,
}

/// Reads only the header, e.g. to check the secret flag.
pub fn peek_header(bytes: &[u8]) -> Result<Header> {
    Reader::new(bytes).header()
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn header(&mut self, tag: Tag, n: usize, k: u32, rows: usize, cols: usize) {
        self.buf.extend_from_slice(MAGIC);
        self.buf.extend_from_slice(&VERSION.to_le_bytes());
        self.buf.push(tag as u8);
        for v in [n as u32, k, rows as u32, cols as u32] {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u64s<'a>(&mut self, vals: impl ExactSizeIterator<Item = &'a u64>) {
        self.u64(vals.len() as u64);
        for v in vals {
            self.u64(*v);
        }
    }

    pub fn i64s(&mut self, vals: &[i64]) {
        self.u64(vals.len() as u64);
        for v in vals {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < len {
            return Err(Error::Decode(format!(
                "truncated input: needed {len} bytes at offset {}",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn header(&mut self) -> Result<Header> {
        if self.take(4)? != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let version = u16::from_le_bytes(self.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported format version {version}")));
        }
        let tag = Tag::from_byte(self.u8()?)?;
        Ok(Header {
            tag,
            n: self.u32()?,
            k: self.u32()?,
            rows: self.u32()?,
            cols: self.u32()?,
        })
    }

    pub fn expect_header(&mut self, tag: Tag) -> Result<Header> {
        let h = self.header()?;
        if h.tag != tag {
            return Err(Error::Decode(format!("expected {tag:?}, found {:?}", h.tag)));
        }
        Ok(h)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        self.take(len)
    }

    fn count(&mut self, expected: usize) -> Result<()> {
        let c = self.u64()?;
        if c != expected as u64 {
            return Err(Error::Decode(format!(
                "coefficient count {c} does not match header ({expected})"
            )));
        }
        if ((self.buf.len() - self.pos) as u64) < c.saturating_mul(8) {
            return Err(Error::Decode("truncated coefficient data".into()));
        }
        Ok(())
    }

    pub fn u64s(&mut self, expected: usize, bound: u64) -> Result<Vec<u64>> {
        self.count(expected)?;
        (0..expected)
            .map(|_| {
                let v = self.u64()?;
                if v >= bound {
                    return Err(Error::Decode(format!("coefficient {v} not below {bound}")));
                }
                Ok(v)
            })
            .collect()
    }

    pub fn i64s(&mut self, expected: usize) -> Result<Vec<i64>> {
        self.count(expected)?;
        (0..expected)
            .map(|_| Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap())))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(self) -> Result<()> {
        if !self.is_empty() {
            return Err(Error::Decode(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn dims(h: &Header) -> Result<(usize, Modulus)> {
    let n = h.n as usize;
    super::poly::check_dimension(n).map_err(|e| Error::Decode(e.to_string()))?;
    let m = Modulus::new(h.k).map_err(|e| Error::Decode(e.to_string()))?;
    Ok((n, m))
}

/// Objects with a canonical binary encoding.
pub trait Codec: Sized {
    fn write(&self, w: &mut Writer);
    fn read(r: &mut Reader<'_>) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let v = Self::read(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

impl Codec for RingElem {
    fn write(&self, w: &mut Writer) {
        w.header(Tag::Elem, self.n(), self.modulus().k(), 1, 1);
        w.u64s(self.coeffs().iter());
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let h = r.expect_header(Tag::Elem)?;
        let (n, m) = dims(&h)?;
        if (h.rows, h.cols) != (1, 1) {
            return Err(Error::Decode("element header must be 1x1".into()));
        }
        RingElem::from_coeffs(r.u64s(n, m.q())?, m)
    }
}

fn read_elems(r: &mut Reader<'_>, count: usize, n: usize, m: Modulus) -> Result<Vec<RingElem>> {
    let flat = r.u64s(count * n, m.q())?;
    Ok(flat
        .chunks(n.max(1))
        .map(|c| RingElem::from_coeffs_unchecked(c.to_vec(), m))
        .collect())
}

impl Codec for RingVector {
    fn write(&self, w: &mut Writer) {
        w.header(Tag::Vector, self.n(), self.modulus().k(), 1, self.width());
        w.u64s(self.elems().iter().flat_map(|e| e.coeffs()).collect::<Vec<_>>().into_iter());
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let h = r.expect_header(Tag::Vector)?;
        let (n, m) = dims(&h)?;
        if h.rows != 1 {
            return Err(Error::Decode("vector header must have one row".into()));
        }
        let elems = read_elems(r, h.cols as usize, n, m)?;
        RingVector::new(elems, n, m)
    }
}

impl Codec for RingMatrix {
    fn write(&self, w: &mut Writer) {
        w.header(Tag::Matrix, self.n(), self.modulus().k(), self.rows(), self.cols());
        w.u64s(self.entries().iter().flat_map(|e| e.coeffs()).collect::<Vec<_>>().into_iter());
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let h = r.expect_header(Tag::Matrix)?;
        let (n, m) = dims(&h)?;
        let (rows, cols) = (h.rows as usize, h.cols as usize);
        let elems = read_elems(r, rows * cols, n, m)?;
        RingMatrix::new(rows, cols, elems, n, m)
    }
}

impl IntVector {
    /// Writes with the given tag; k is recorded for context only.
    pub fn write_tagged(&self, w: &mut Writer, tag: Tag, k: u32) {
        w.header(tag, self.n(), k, 1, self.width());
        w.i64s(self.data());
    }

    pub fn read_tagged(r: &mut Reader<'_>, tag: Tag) -> Result<(Self, Header)> {
        let h = r.expect_header(tag)?;
        let n = h.n as usize;
        super::poly::check_dimension(n).map_err(|e| Error::Decode(e.to_string()))?;
        if h.rows != 1 {
            return Err(Error::Decode("vector header must have one row".into()));
        }
        let data = r.i64s(h.cols as usize * n)?;
        Ok((IntVector::from_data(n, data)?, h))
    }
}

impl IntMatrix {
    pub fn write_tagged(&self, w: &mut Writer, tag: Tag, k: u32) {
        w.header(tag, self.n(), k, self.rows(), self.cols());
        w.i64s(self.data());
    }

    pub fn read_tagged(r: &mut Reader<'_>, tag: Tag) -> Result<(Self, Header)> {
        let h = r.expect_header(tag)?;
        let n = h.n as usize;
        super::poly::check_dimension(n).map_err(|e| Error::Decode(e.to_string()))?;
        let (rows, cols) = (h.rows as usize, h.cols as usize);
        let data = r.i64s(rows * cols * n)?;
        Ok((IntMatrix::from_data(rows, cols, n, data)?, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_vector_size() {
        let m = Modulus::new(10).unwrap();
        let v = RingVector::zero(1, 64, m);
        let bytes = v.to_bytes();
        assert_eq!(bytes.len() - HEADER_LEN, 8 + 64 * 8);
    }

    #[test]
    fn rejects_non_canonical_coefficient() {
        let m = Modulus::new(10).unwrap();
        let mut bytes = RingElem::zero(8, m).to_bytes();
        let off = HEADER_LEN + 8;
        bytes[off..off + 8].copy_from_slice(&m.q().to_le_bytes());
        assert!(matches!(RingElem::from_bytes(&bytes), Err(Error::Decode(_))));
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let m = Modulus::new(10).unwrap();
        let good = RingElem::one(8, m).to_bytes();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(RingElem::from_bytes(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(RingElem::from_bytes(&bad).is_err());
        assert!(RingElem::from_bytes(&good[..good.len() - 1]).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(RingElem::from_bytes(&long).is_err());
        assert_eq!(RingElem::from_bytes(&good).unwrap(), RingElem::one(8, m));
    }

    #[test]
    fn secret_flag() {
        assert!(Tag::Trapdoor.is_secret());
        assert!(Tag::SigningKey.is_secret());
        assert!(!Tag::Signature.is_secret());
    }
}
