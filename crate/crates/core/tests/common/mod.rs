#![allow(dead_code)]

use btrs_core::keyhom::{eval_public, eval_secret, NandCircuit};
use btrs_core::ring::{IntMatrix, RingMatrix};
use btrs_core::sampling::{uniform_ring_vector, RandomStream};
use btrs_core::trapdoor::{gadget, spectral_norm};
use btrs_core::params::ParamSet;

pub fn sign_matrix(s: &mut RandomStream, m: usize, n: usize) -> IntMatrix {
    let data = (0..m * m * n).map(|_| if s.bit() { 1 } else { -1 }).collect();
    IntMatrix::from_data(m, m, n, data).unwrap()
}

/// Random circuit with `inputs` inputs and depth at most `max_depth`.
pub fn random_circuit(s: &mut RandomStream, inputs: usize, gates: usize, max_depth: usize) -> NandCircuit {
    let mut depth = vec![0usize; inputs];
    let mut list = Vec::new();
    for _ in 0..gates {
        let ok: Vec<usize> = (0..depth.len()).filter(|&w| depth[w] < max_depth).collect();
        let l = ok[s.below(ok.len() as u64) as usize];
        let r = ok[s.below(ok.len() as u64) as usize];
        list.push((l, r));
        depth.push(1 + depth[l].max(depth[r]));
    }
    let output = inputs + gates - 1;
    NandCircuit::new(inputs, list, output).unwrap()
}

/// Balanced NAND tree over a random permutation of `inputs` (a power of
/// two), with each gate's operands randomly ordered.
pub fn balanced_circuit(s: &mut RandomStream, inputs: usize) -> NandCircuit {
    let mut layer: Vec<usize> = (0..inputs).collect();
    for i in (1..layer.len()).rev() {
        layer.swap(i, s.below(i as u64 + 1) as usize);
    }
    let mut gates = Vec::new();
    while layer.len() > 1 {
        let mut next = Vec::new();
        for pair in layer.chunks(2) {
            let (a, b) = if s.bit() { (pair[0], pair[1]) } else { (pair[1], pair[0]) };
            gates.push((a, b));
            next.push(inputs + gates.len() - 1);
        }
        layer = next;
    }
    NandCircuit::new(inputs, gates, layer[0]).unwrap()
}

pub struct HomCheck {
    pub identity: bool,
    pub bit: bool,
    pub r_norm: f64,
}

/// Builds A_i = A R_i + b_i G for random A, R_i, b and compares the public
/// evaluation against A R_C + C(b) G.
pub fn homomorphic_check(s: &mut RandomStream, pp: &ParamSet, c: &NandCircuit, norm_steps: usize) -> HomCheck {
    let (n, m, modulus) = (pp.n, pp.m, pp.modulus());
    let a = RingMatrix::row(uniform_ring_vector(s, modulus, n, m));
    let g = gadget(m, n, modulus);
    let bits: Vec<bool> = (0..c.inputs).map(|_| s.bit()).collect();
    let rs: Vec<IntMatrix> = (0..c.inputs).map(|_| sign_matrix(s, m, n)).collect();
    let mats: Vec<RingMatrix> = rs
        .iter()
        .zip(&bits)
        .map(|(r, &b)| {
            let ar = a.mul_int_matrix(r).unwrap();
            if b { ar.add(&g).unwrap() } else { ar }
        })
        .collect();
    let public = eval_public(c, &mats).unwrap();
    let (r_c, bit) = eval_secret(c, &mats, &rs, &bits).unwrap();
    let mut rebuilt = a.mul_int_matrix(&r_c).unwrap();
    if bit {
        rebuilt = rebuilt.add(&g).unwrap();
    }
    HomCheck {
        identity: rebuilt == public && bit == c.eval(&bits).unwrap(),
        bit,
        r_norm: if norm_steps > 0 { spectral_norm(&r_c, norm_steps) } else { 0.0 },
    }
}
