//! Seeded randomness and discrete Gaussian sampling.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::{IntVector, Modulus, RingElem, RingVector};

/// Tail cut, in standard deviations.
pub const TAU: f64 = 13.0;

/// Widths above this use the rounded-normal sampler instead of a table.
pub const CDT_MAX_SIGMA: f64 = 64.0;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "BTRS_SEED";

/// Deterministic byte stream: ChaCha20 keyed by a 32-byte seed.
///
/// `fork` derives an independent stream from the seed and a label, so
/// substreams do not depend on how much of the parent has been consumed.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: [u8; 32],
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::from_seed(seed),
        }
    }

    /// Parses a 64-character hex seed.
    pub fn from_hex(hex_seed: &str) -> Result<Self> {
        let bytes = hex::decode(hex_seed.trim())
            .map_err(|e| Error::InvalidParams(format!("seed is not hex: {e}")))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::InvalidParams("seed must be 64 hex characters".into()))?;
        Ok(Self::from_seed(seed))
    }

    /// Seed from `BTRS_SEED`, if set.
    pub fn from_env() -> Option<Result<Self>> {
        std::env::var(SEED_ENV).ok().map(|s| Self::from_hex(&s))
    }

    /// Fresh stream seeded from the operating system.
    #[cfg(feature = "entropy")]
    pub fn from_entropy() -> Self {
        let mut seed = [0u8; 32];
        rand::TryRngCore::try_fill_bytes(&mut rand::rngs::OsRng, &mut seed)
            .expect("operating system randomness");
        Self::from_seed(seed)
    }

    pub fn seed(&self) -> [u8; 32] {
        self.seed
    }

    pub fn seed_hex(&self) -> String {
        hex::encode(self.seed)
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Substream keyed by SHA-256(seed || label).
    pub fn fork(&self, label: &str) -> RandomStream {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(label.as_bytes());
        Self::from_seed(h.finalize().into())
    }

    /// Substream keyed by the parent seed, a label and an index.
    pub fn fork_indexed(&self, label: &str, index: u64) -> RandomStream {
        self.fork(&format!("{label}/{index}"))
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn unit_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let mask = u64::MAX >> (bound - 1).leading_zeros().min(63);
        let mask = if bound == 1 { 0 } else { mask };
        loop {
            let v = self.rng.next_u64() & mask;
            if v < bound {
                return v;
            }
        }
    }

    pub fn bit(&mut self) -> bool {
        self.rng.next_u32() & 1 == 1
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Uniform element of R_q, coefficientwise by rejection.
pub fn uniform_ring_elem(stream: &mut RandomStream, modulus: Modulus, n: usize) -> RingElem {
    let coeffs = (0..n).map(|_| stream.below(modulus.q())).collect();
    RingElem::from_coeffs(coeffs, modulus).expect("dimension must be a power of two")
}

pub fn uniform_ring_vector(stream: &mut RandomStream, modulus: Modulus, n: usize, width: usize) -> RingVector {
    let elems = (0..width).map(|_| uniform_ring_elem(stream, modulus, n)).collect();
    RingVector::new(elems, n, modulus).expect("dimension must be a power of two")
}

/// Width (standard deviation) and center of a discrete Gaussian over Z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParam {
    pub sigma: f64,
    pub center: f64,
}

impl GaussianParam {
    pub fn new(sigma: f64, center: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && center.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "gaussian needs sigma > 0 and finite center, got sigma={sigma}, center={center}"
            )));
        }
        Ok(Self { sigma, center })
    }

    pub fn centered(sigma: f64) -> Result<Self> {
        Self::new(sigma, 0.0)
    }

    /// Integer support [lo, hi] after the tail cut.
    pub fn support(&self) -> (i64, i64) {
        let r = TAU * self.sigma;
        let lo = (self.center - r).ceil() as i64;
        let hi = (self.center + r).floor() as i64;
        if lo > hi {
            let c = self.center.round() as i64;
            (c, c)
        } else {
            (lo, hi)
        }
    }
}

/// Normalized probability mass of the truncated discrete Gaussian,
/// indexed from the lower end of [`GaussianParam::support`].
pub fn truncated_pmf(param: &GaussianParam) -> (i64, Vec<f64>) {
    let (lo, hi) = param.support();
    let two_s2 = 2.0 * param.sigma * param.sigma;
    let w: Vec<f64> = (lo..=hi)
        .map(|z| {
            let d = z as f64 - param.center;
            (-d * d / two_s2).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    (lo, w.into_iter().map(|x| x / total).collect())
}

/// Cumulative distribution table for one (sigma, center).
#[derive(Clone, Debug)]
pub struct CdtTable {
    lo: i64,
    cdf: Vec<f64>,
}

impl CdtTable {
    pub fn new(param: &GaussianParam) -> Self {
        let (lo, pmf) = truncated_pmf(param);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = f64::INFINITY;
        }
        Self { lo, cdf }
    }

    #[inline]
    pub fn sample(&self, stream: &mut RandomStream) -> i64 {
        let u = stream.unit_f64();
        self.lo + self.cdf.partition_point(|&c| c <= u) as i64
    }

    /// Shared table for a centered width, cached process-wide.
    pub fn cached(sigma: f64) -> Arc<CdtTable> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<CdtTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("cdt cache");
        guard
            .entry(sigma.to_bits())
            .or_insert_with(|| Arc::new(CdtTable::new(&GaussianParam { sigma, center: 0.0 })))
            .clone()
    }
}

/// Sampler for a fixed width: a table for narrow widths, a rounded normal
/// with tail rejection for wide ones.
#[derive(Clone, Debug)]
pub enum ZSampler {
    Table(Arc<CdtTable>, f64),
    Rounded { sigma: f64, center: f64 },
}

impl ZSampler {
    pub fn new(param: &GaussianParam) -> Self {
        if param.sigma <= CDT_MAX_SIGMA {
            if param.center == 0.0 {
                ZSampler::Table(CdtTable::cached(param.sigma), 0.0)
            } else {
                // Integer shifts reuse the table of the fractional part.
                let shift = param.center.floor();
                let frac = GaussianParam {
                    sigma: param.sigma,
                    center: param.center - shift,
                };
                ZSampler::Table(Arc::new(CdtTable::new(&frac)), shift)
            }
        } else {
            ZSampler::Rounded {
                sigma: param.sigma,
                center: param.center,
            }
        }
    }

    #[inline]
    pub fn sample(&self, stream: &mut RandomStream) -> i64 {
        match self {
            ZSampler::Table(t, shift) => t.sample(stream) + *shift as i64,
            ZSampler::Rounded { sigma, center } => loop {
                let x = center + sigma * stream.standard_normal();
                let z = x.round();
                if (z - center).abs() <= TAU * sigma {
                    return z as i64;
                }
            },
        }
    }
}

/// One draw from the truncated discrete Gaussian.
pub fn gauss_z(stream: &mut RandomStream, param: &GaussianParam) -> i64 {
    ZSampler::new(param).sample(stream)
}

/// width * n independent centered draws.
pub fn gauss_int_vector(stream: &mut RandomStream, param: &GaussianParam, width: usize, n: usize) -> IntVector {
    let s = ZSampler::new(param);
    let data = (0..width * n).map(|_| s.sample(stream)).collect();
    IntVector::from_data(n, data).expect("dimension must be a power of two")
}

/// As [`gauss_int_vector`], reduced into R_q.
pub fn gauss_ring_vector(
    stream: &mut RandomStream,
    param: &GaussianParam,
    width: usize,
    n: usize,
    modulus: Modulus,
) -> RingVector {
    gauss_int_vector(stream, param, width, n).to_ring(modulus)
}
