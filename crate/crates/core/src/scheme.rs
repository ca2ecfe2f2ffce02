//! Setup, KeyGen, Sign and Ver.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyhom::eval_public;
use crate::params::ParamSet;
use crate::ring::codec::{Reader, Tag, Writer};
use crate::ring::{Codec, IntVector, PreparedMatrix, RingElem, RingMatrix};
use crate::sampling::{uniform_ring_elem, uniform_ring_vector, RandomStream};
use crate::trapdoor::{binding_of, trap_del, trap_gen, DelegatedTrapdoor, GTrapdoor, PreparedSampler, Trapdoor};

/// Randomness record: the seed of the stream and how much of it was used.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub seed: String,
    pub words_used: u128,
}

impl Transcript {
    fn of(stream: &RandomStream) -> Self {
        Self {
            seed: stream.seed_hex(),
            words_used: stream.position(),
        }
    }
}

/// Public parameters with the setup transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicParams {
    pub params: ParamSet,
    pub transcript: Transcript,
}

/// Validates the named set. Setup draws no randomness of its own; the
/// transcript records the stream it was handed.
pub fn setup(name: &str, stream: &RandomStream) -> Result<PublicParams> {
    let params = ParamSet::by_name(name)?;
    params.validate()?;
    Ok(PublicParams {
        params,
        transcript: Transcript::of(stream),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationKey {
    pub a: RingMatrix,
    pub a0: RingMatrix,
    pub a1: RingMatrix,
    pub b: Vec<RingMatrix>,
    pub c0: RingMatrix,
    pub c1: RingMatrix,
    pub u: RingElem,
}

impl VerificationKey {
    /// Matrices and elements beyond A: A0, A1, B_1..B_kappa, C0, C1, u.
    pub fn component_count(&self) -> usize {
        2 + self.b.len() + 2 + 1
    }

    pub fn a_bytes(&self) -> Vec<u8> {
        self.a.to_bytes()
    }

    pub fn binding(&self) -> [u8; 32] {
        binding_of(&self.a)
    }

    fn check_shape(&self, pp: &ParamSet) -> Result<()> {
        let modulus = pp.modulus();
        let rows = [&self.a, &self.a0, &self.a1, &self.c0, &self.c1];
        let all = rows.into_iter().chain(self.b.iter());
        for mat in all {
            if mat.rows() != 1 || mat.cols() != pp.m || mat.n() != pp.n || mat.modulus() != modulus {
                return Err(Error::Shape("verification key matrix is not 1 x m over the ring".into()));
            }
        }
        if self.b.len() != pp.kappa {
            return Err(Error::Shape(format!("expected {} B matrices, found {}", pp.kappa, self.b.len())));
        }
        if self.u.n() != pp.n || self.u.modulus() != modulus {
            return Err(Error::Shape("u is not in the ring".into()));
        }
        Ok(())
    }

    /// A_mu = Eval(C_PRF, B_1..B_kappa, C_{mu_1}..C_{mu_t}).
    pub fn message_matrix(&self, pp: &ParamSet, msg: &[bool]) -> Result<RingMatrix> {
        if msg.len() != pp.t {
            return Err(Error::InvalidParams(format!("message must have {} bits", pp.t)));
        }
        let mut inputs = self.b.clone();
        inputs.extend(msg.iter().map(|&bit| if bit { self.c1.clone() } else { self.c0.clone() }));
        eval_public(&pp.prf.circuit, &inputs)
    }
}

impl Codec for VerificationKey {
    fn write(&self, w: &mut Writer) {
        let modulus = self.a.modulus();
        w.header(Tag::VerificationKey, self.a.n(), modulus.k(), 6 + self.b.len(), self.a.cols());
        for mat in [&self.a, &self.a0, &self.a1] {
            mat.write(w);
        }
        for mat in &self.b {
            mat.write(w);
        }
        self.c0.write(w);
        self.c1.write(w);
        self.u.write(w);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let h = r.expect_header(Tag::VerificationKey)?;
        if h.rows < 6 {
            return Err(Error::Decode("verification key holds too few objects".into()));
        }
        let kappa = h.rows as usize - 6;
        let a = RingMatrix::read(r)?;
        let a0 = RingMatrix::read(r)?;
        let a1 = RingMatrix::read(r)?;
        let b = (0..kappa).map(|_| RingMatrix::read(r)).collect::<Result<Vec<_>>>()?;
        let c0 = RingMatrix::read(r)?;
        let c1 = RingMatrix::read(r)?;
        let u = RingElem::read(r)?;
        let vk = Self { a, a0, a1, b, c0, c1, u };
        let (n, k) = (h.n as usize, h.k);
        let rows = [&vk.a, &vk.a0, &vk.a1, &vk.c0, &vk.c1];
        if rows.into_iter().chain(vk.b.iter()).any(|m| {
            m.rows() != 1 || m.cols() != h.cols as usize || m.n() != n || m.modulus().k() != k
        }) || vk.u.n() != n
            || vk.u.modulus().k() != k
        {
            return Err(Error::Decode("verification key components disagree with header".into()));
        }
        Ok(vk)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigningKey {
    pub trapdoor: GTrapdoor,
    pub prf_key: Vec<bool>,
}

impl SigningKey {
    /// Whether this key's trapdoor belongs to `vk`.
    pub fn pairs_with(&self, vk: &VerificationKey) -> bool {
        self.trapdoor.binding() == vk.binding()
    }
}

impl Codec for SigningKey {
    fn write(&self, w: &mut Writer) {
        let modulus = self.trapdoor.modulus();
        w.header(Tag::SigningKey, self.trapdoor.n(), modulus.k(), 1, self.prf_key.len());
        let bits: Vec<i64> = self.prf_key.iter().map(|&b| b as i64).collect();
        w.i64s(&bits);
        self.trapdoor.write(w);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let h = r.expect_header(Tag::SigningKey)?;
        let bits = r.i64s(h.cols as usize)?;
        let prf_key = bits
            .into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Decode(format!("PRF key bit {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let trapdoor = Trapdoor::read(r)?;
        if trapdoor.n() != h.n as usize || trapdoor.modulus().k() != h.k {
            return Err(Error::Decode("trapdoor disagrees with key header".into()));
        }
        Ok(Self { trapdoor, prf_key })
    }
}

/// (vk, sk) from the stream; the transcript reproduces the pair.
pub fn keygen(pp: &ParamSet, stream: &mut RandomStream) -> Result<(VerificationKey, SigningKey, Transcript)> {
    let seed_view = RandomStream::from_seed(stream.seed());
    let start = stream.position();
    let (n, modulus, m) = (pp.n, pp.modulus(), pp.m);
    let (a, trapdoor) = trap_gen(stream, n, modulus, pp.w, pp.sigma_tg)?;
    let row = |s: &mut RandomStream| RingMatrix::row(uniform_ring_vector(s, modulus, n, m));
    let a0 = row(stream);
    let a1 = row(stream);
    let c0 = row(stream);
    let c1 = row(stream);
    let u = uniform_ring_elem(stream, modulus, n);
    let prf_key = (0..pp.kappa).map(|_| stream.bit()).collect();
    let b = (0..pp.kappa).map(|_| row(stream)).collect();
    let vk = VerificationKey { a, a0, a1, b, c0, c1, u };
    let transcript = Transcript {
        seed: seed_view.seed_hex(),
        words_used: stream.position() - start,
    };
    Ok((vk, SigningKey { trapdoor, prf_key }, transcript))
}

/// An ordered list of at least two distinct verification keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ring {
    keys: Vec<VerificationKey>,
}

impl Ring {
    pub fn new(keys: Vec<VerificationKey>) -> Result<Self> {
        if keys.len() < 2 {
            return Err(Error::InvalidRing(format!("a ring needs at least 2 members, got {}", keys.len())));
        }
        if let Some((i, j)) = duplicate_pair(&keys) {
            return Err(Error::InvalidRing(format!("members {i} and {j} are the same key")));
        }
        Ok(Self { keys })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[VerificationKey] {
        &self.keys
    }

    /// Position of the member whose A matches the signing key.
    pub fn position_of(&self, sk: &SigningKey) -> Option<usize> {
        self.keys.iter().position(|vk| sk.pairs_with(vk))
    }
}

fn duplicate_pair(keys: &[VerificationKey]) -> Option<(usize, usize)> {
    let mut encoded: Vec<(Vec<u8>, usize)> = keys.iter().map(|k| k.a_bytes()).zip(0..).collect();
    encoded.sort();
    encoded.windows(2).find(|w| w[0].0 == w[1].0).map(|w| (w[0].1.min(w[1].1), w[0].1.max(w[1].1)))
}

/// Index of the key whose A has the smallest canonical encoding.
pub fn lexicographic_first(keys: &[VerificationKey]) -> usize {
    keys.iter()
        .map(VerificationKey::a_bytes)
        .enumerate()
        .min_by(|x, y| x.1.cmp(&y.1))
        .map(|(i, _)| i)
        .expect("nonempty key list")
}

/// e = (e^(1), ..., e^(N)), each block of width 2m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub e: IntVector,
}

impl Signature {
    pub fn blocks(&self, m: usize) -> usize {
        self.e.width() / (2 * m)
    }

    pub fn block_norm(&self, m: usize, i: usize) -> f64 {
        self.e.range_norm(2 * m * i, 2 * m * (i + 1))
    }
}

impl Codec for Signature {
    fn write(&self, w: &mut Writer) {
        self.e.write_tagged(w, Tag::Signature, 0);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let (e, _) = IntVector::read_tagged(r, Tag::Signature)?;
        Ok(Self { e })
    }
}

/// Everything about (ring, mu) that does not depend on the signer.
#[derive(Clone, Debug)]
pub struct MessageContext {
    msg: Vec<bool>,
    ring_size: usize,
    /// F'_{mu,d} for d = 0, 1.
    f_prime: [RingMatrix; 2],
    target: RingElem,
    i_prime: usize,
}

impl MessageContext {
    pub fn new(pp: &ParamSet, ring: &Ring, msg: &[bool]) -> Result<Self> {
        for vk in ring.keys() {
            vk.check_shape(pp)?;
        }
        let mut parts: [Option<RingMatrix>; 2] = [None, None];
        for vk in ring.keys() {
            let a_mu = vk.message_matrix(pp, msg)?;
            for (d, a_d) in [&vk.a0, &vk.a1].into_iter().enumerate() {
                let block = vk.a.hconcat(&a_d.sub(&a_mu)?)?;
                parts[d] = Some(match parts[d].take() {
                    None => block,
                    Some(acc) => acc.hconcat(&block)?,
                });
            }
        }
        let [f0, f1] = parts;
        let i_prime = lexicographic_first(ring.keys());
        Ok(Self {
            msg: msg.to_vec(),
            ring_size: ring.len(),
            f_prime: [f0.unwrap(), f1.unwrap()],
            target: ring.keys()[i_prime].u.clone(),
            i_prime,
        })
    }

    pub fn f_prime(&self, d: usize) -> &RingMatrix {
        &self.f_prime[d]
    }

    pub fn target(&self) -> &RingElem {
        &self.target
    }

    pub fn i_prime(&self) -> usize {
        self.i_prime
    }

    pub fn ring_size(&self) -> usize {
        self.ring_size
    }
}

fn check_ring_size(pp: &ParamSet, ring: &Ring) -> Result<()> {
    if ring.len() > pp.max_ring {
        return Err(Error::InvalidRing(format!(
            "ring of {} exceeds the parameter set's maximum of {}",
            ring.len(),
            pp.max_ring
        )));
    }
    Ok(())
}

/// Nominal floors for delegation and signing at ring size N, checked
/// before any expensive work.
pub fn check_widths(pp: &ParamSet, ring: usize) -> Result<()> {
    let (n, k) = (pp.n as f64, pp.k as f64);
    let log = n.log2().sqrt();
    let parent = pp.sigma_tg * ((pp.w as f64 * n).sqrt() + (k * n).sqrt()) * log;
    if pp.sigma_td < parent {
        return Err(Error::SigmaBelowFloor { sigma: pp.sigma_td, floor: parent });
    }
    let width = (2 * ring * pp.m) as f64;
    let delegated = pp.sigma_td * (((width - k) * n).sqrt() + (k * n).sqrt()) * log;
    let sigma = pp.sigma_sign(ring);
    if sigma < delegated {
        return Err(Error::SigmaBelowFloor { sigma, floor: delegated });
    }
    Ok(())
}

/// The PRF bit d = PRF(k, mu).
pub fn prf_bit(pp: &ParamSet, sk: &SigningKey, msg: &[bool]) -> Result<bool> {
    pp.prf.eval(&sk.prf_key, msg)
}

/// Delegated trapdoor for F'_{mu,1-d} from member s.
pub fn delegate(
    pp: &ParamSet,
    sk: &SigningKey,
    signer: usize,
    ctx: &MessageContext,
    stream: &mut RandomStream,
) -> Result<(usize, DelegatedTrapdoor)> {
    if signer >= ctx.ring_size {
        return Err(Error::InvalidRing(format!("signer index {signer} outside the ring")));
    }
    let d = prf_bit(pp, sk, &ctx.msg)? as usize;
    let f = &ctx.f_prime[1 - d];
    let t = trap_del(stream, &sk.trapdoor, f, 2 * pp.m * signer, pp.sigma_td).map_err(|e| match e {
        Error::BlockAbsent => Error::InvalidRing(format!("signing key does not belong to ring member {signer}")),
        other => other,
    })?;
    Ok((1 - d, t))
}

/// A delegated sampler for repeated signing on one (ring, mu, signer).
#[derive(Clone, Debug)]
pub struct PreparedSigner {
    sampler: PreparedSampler,
    target: RingElem,
}

impl PreparedSigner {
    pub fn new(pp: &ParamSet, sk: &SigningKey, signer: usize, ctx: &MessageContext, stream: &mut RandomStream) -> Result<Self> {
        let (fd, t) = delegate(pp, sk, signer, ctx, stream)?;
        let sigma = pp.sigma_sign(ctx.ring_size);
        Ok(Self {
            sampler: PreparedSampler::new(&ctx.f_prime[fd], &t, sigma)?,
            target: ctx.target.clone(),
        })
    }

    pub fn sign(&self, stream: &mut RandomStream) -> Result<Signature> {
        Ok(Signature {
            e: self.sampler.sample(stream, &self.target)?,
        })
    }
}

pub fn sign(
    pp: &ParamSet,
    sk: &SigningKey,
    signer: usize,
    msg: &[bool],
    ring: &Ring,
    stream: &mut RandomStream,
) -> Result<Signature> {
    check_ring_size(pp, ring)?;
    check_widths(pp, ring.len())?;
    let ctx = MessageContext::new(pp, ring, msg)?;
    PreparedSigner::new(pp, sk, signer, &ctx, stream)?.sign(stream)
}

#[derive(Clone, Debug, PartialEq)]
pub enum RejectReason {
    BadShape(String),
    NormViolation { block: usize, norm: f64, bound: f64 },
    EquationFailure,
    DuplicateKeys,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::BadShape(s) => write!(f, "bad shape: {s}"),
            RejectReason::NormViolation { block, norm, bound } => {
                write!(f, "norm violation: block {block} has norm {norm:.1} > {bound:.1}")
            }
            RejectReason::EquationFailure => write!(f, "equation failure"),
            RejectReason::DuplicateKeys => write!(f, "duplicate ring keys"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Accepted with F'_{mu,d}.
    Accept { d: usize },
    Reject(RejectReason),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept { .. })
    }
}

/// Verification on untrusted keys; `ring` need not be a validated [`Ring`].
pub fn verify(pp: &ParamSet, msg: &[bool], ring: &[VerificationKey], sig: &Signature) -> Verdict {
    if ring.len() < 2 {
        return Verdict::Reject(RejectReason::BadShape("ring has fewer than 2 members".into()));
    }
    if duplicate_pair(ring).is_some() {
        return Verdict::Reject(RejectReason::DuplicateKeys);
    }
    let ring = match Ring::new(ring.to_vec()) {
        Ok(r) => r,
        Err(e) => return Verdict::Reject(RejectReason::BadShape(e.to_string())),
    };
    if msg.len() != pp.t {
        return Verdict::Reject(RejectReason::BadShape(format!("message must have {} bits", pp.t)));
    }
    let ctx = match MessageContext::new(pp, &ring, msg) {
        Ok(c) => c,
        Err(e) => return Verdict::Reject(RejectReason::BadShape(e.to_string())),
    };
    verify_in_context(pp, &ctx, sig)
}

pub fn verify_in_context(pp: &ParamSet, ctx: &MessageContext, sig: &Signature) -> Verdict {
    let n_ring = ctx.ring_size;
    if sig.e.n() != pp.n || sig.e.width() != 2 * n_ring * pp.m {
        return Verdict::Reject(RejectReason::BadShape(format!(
            "signature has {} entries at n = {}, expected {} at n = {}",
            sig.e.width(),
            sig.e.n(),
            2 * n_ring * pp.m,
            pp.n
        )));
    }
    let bound = pp.block_bound(n_ring);
    for i in 0..n_ring {
        let norm = sig.block_norm(pp.m, i);
        if norm.is_nan() || norm > bound {
            return Verdict::Reject(RejectReason::NormViolation { block: i, norm, bound });
        }
    }
    for d in 0..2 {
        let lhs = PreparedMatrix::new(&ctx.f_prime[d]).and_then(|f| f.mul_int_vector(&sig.e));
        match lhs {
            Ok(v) if v.get(0) == &ctx.target => return Verdict::Accept { d },
            Ok(_) => {}
            Err(e) => return Verdict::Reject(RejectReason::BadShape(e.to_string())),
        }
    }
    Verdict::Reject(RejectReason::EquationFailure)
}

/// Trapdoor for a standalone A (exposed for tests and the demo).
pub fn member_trapdoor(sk: &SigningKey) -> &Trapdoor {
    &sk.trapdoor
}
