//! Browser bindings: the attack curve, the integer Gaussian sampler, and a
//! toy ring you can sign with and tamper with.

use btrs_core::attack::{experiment_basic, BasicConfig};
use btrs_core::params::ParamSet;
use btrs_core::ring::Codec;
use btrs_core::sampling::{GaussianParam, RandomStream, ZSampler};
use btrs_core::scheme::{keygen, sign, verify, Ring, Signature, SigningKey, Verdict};
use sha2::{Digest, Sha256};
use wasm_bindgen::prelude::*;

fn stream(seed: &[u8]) -> Result<RandomStream, JsError> {
    let seed: [u8; 32] = seed.try_into().map_err(|_| JsError::new("seed must be 32 bytes"))?;
    Ok(RandomStream::from_seed(seed))
}

fn js(e: btrs_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Q values the attack curve is evaluated at.
#[wasm_bindgen]
pub fn attack_sweep() -> Vec<u32> {
    vec![1, 3, 10, 30, 100, 300, 1000, 3000, 10000]
}

/// Success rate of the basic attack at each point of [`attack_sweep`].
#[wasm_bindgen]
pub fn attack_curve(n_ring: usize, eps_bias: f64, reps: usize, seed: &[u8]) -> Result<Vec<f64>, JsError> {
    let config = BasicConfig {
        q_sweep: attack_sweep().into_iter().map(|q| q as usize).collect(),
        reps,
        n_ring,
        eps_bias,
        bound: 8,
    };
    let rows = experiment_basic(&config, &stream(seed)?).map_err(js)?;
    Ok(rows.iter().map(|r| r.success_rate).collect())
}

/// Draws from the integer Gaussian and returns flat triples
/// (x, empirical frequency, exact probability) over center ± 4 sigma.
#[wasm_bindgen]
pub fn gaussian_histogram(sigma: f64, center: f64, draws: u32, seed: &[u8]) -> Result<Vec<f64>, JsError> {
    let param = GaussianParam::new(sigma, center).map_err(js)?;
    let sampler = ZSampler::new(&param);
    let mut s = stream(seed)?;
    let lo = (center - 4.0 * sigma).floor() as i64;
    let hi = (center + 4.0 * sigma).ceil() as i64;
    let mut counts = vec![0u32; (hi - lo + 1) as usize];
    for _ in 0..draws {
        let x = sampler.sample(&mut s);
        if (lo..=hi).contains(&x) {
            counts[(x - lo) as usize] += 1;
        }
    }
    let weight = |x: i64| (-(x as f64 - center).powi(2) / (2.0 * sigma * sigma)).exp();
    let (tlo, thi) = ((center - 14.0 * sigma).floor() as i64, (center + 14.0 * sigma).ceil() as i64);
    let total: f64 = (tlo..=thi).map(weight).sum();
    Ok((lo..=hi)
        .zip(&counts)
        .flat_map(|(x, &c)| [x as f64, c as f64 / draws.max(1) as f64, weight(x) / total])
        .collect())
}

fn message_bit(msg: &str) -> Vec<bool> {
    let h = Sha256::new().chain_update(b"btrs message").chain_update(0u32.to_le_bytes()).chain_update(msg).finalize();
    vec![h[0] >> 7 == 1]
}

/// A ring of toy-parameter keys held in the page.
#[wasm_bindgen]
pub struct ToyRing {
    pp: ParamSet,
    ring: Ring,
    sks: Vec<SigningKey>,
    stream: RandomStream,
}

#[wasm_bindgen]
impl ToyRing {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: &[u8]) -> Result<ToyRing, JsError> {
        let pp = ParamSet::toy();
        let mut s = stream(seed)?;
        let mut vks = Vec::with_capacity(size);
        let mut sks = Vec::with_capacity(size);
        for _ in 0..size {
            let (vk, sk, _) = keygen(&pp, &mut s).map_err(js)?;
            vks.push(vk);
            sks.push(sk);
        }
        let ring = Ring::new(vks).map_err(js)?;
        Ok(ToyRing { pp, ring, sks, stream: s })
    }

    pub fn size(&self) -> usize {
        self.ring.len()
    }

    /// Signature bytes from member `signer`.
    pub fn sign(&mut self, signer: usize, message: &str) -> Result<Vec<u8>, JsError> {
        let sk = self.sks.get(signer).ok_or_else(|| JsError::new("no such member"))?;
        let sig = sign(&self.pp, sk, signer, &message_bit(message), &self.ring, &mut self.stream).map_err(js)?;
        Ok(sig.to_bytes())
    }

    /// "accept", or the rejection reason.
    pub fn verify(&self, message: &str, sig: &[u8]) -> String {
        let sig = match Signature::from_bytes(sig) {
            Ok(s) => s,
            Err(e) => return format!("bad shape: {e}"),
        };
        match verify(&self.pp, &message_bit(message), self.ring.keys(), &sig) {
            Verdict::Accept { .. } => "accept".into(),
            Verdict::Reject(r) => r.to_string(),
        }
    }

    /// Euclidean norm of each member's block, next to the verification bound.
    pub fn block_norms(&self, sig: &[u8]) -> Result<Vec<f64>, JsError> {
        let sig = Signature::from_bytes(sig).map_err(js)?;
        let n = self.ring.len();
        let mut out: Vec<f64> = (0..n).map(|i| sig.block_norm(self.pp.m, i)).collect();
        out.push(self.pp.block_bound(n));
        Ok(out)
    }
}
