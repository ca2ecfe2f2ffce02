mod common;

use btrs_core::keyhom::{eval_public, eval_secret, NandCircuit, PrfSpec};
use btrs_core::params::ParamSet;
use btrs_core::ring::RingMatrix;
use btrs_core::sampling::{uniform_ring_vector, RandomStream};
use btrs_core::trapdoor::{gadget, gadget_decompose_matrix};
use common::{balanced_circuit, homomorphic_check, random_circuit, sign_matrix};

fn stream(tag: &str) -> RandomStream {
    RandomStream::from_seed([0x33; 32]).fork(tag)
}

/// Straight-line evaluation of the toy keyed circuit from its description.
fn toy_prf_oracle(key: &[bool], msg: &[bool]) -> bool {
    let nand = |a: bool, b: bool| !(a && b);
    let mut layer: Vec<bool> = (0..key.len())
        .map(|i| if i % 2 == 0 { nand(key[i], msg[(i / 2) % msg.len()]) } else { nand(key[i], key[i - 1]) })
        .collect();
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|p| if p.len() == 2 { nand(p[0], p[1]) } else { p[0] })
            .collect();
    }
    layer[0]
}

/// Evaluates by recursing from the output wire.
fn recursive_eval(c: &NandCircuit, bits: &[bool]) -> bool {
    fn wire(c: &NandCircuit, bits: &[bool], w: usize) -> bool {
        if w < c.inputs {
            return bits[w];
        }
        let (l, r) = c.gates[w - c.inputs];
        !(wire(c, bits, l) && wire(c, bits, r))
    }
    wire(c, bits, c.output)
}

#[test]
fn toy_prf_matches_independent_evaluator() {
    let mut s = stream("prf");
    for (key_len, msg_len) in [(16, 1), (128, 1), (5, 2), (16, 3)] {
        let prf = PrfSpec::toy(key_len, msg_len).unwrap();
        assert!(prf.toy);
        assert!(prf.circuit.depth() <= 8);
        for _ in 0..100 {
            let key: Vec<bool> = (0..key_len).map(|_| s.bit()).collect();
            let msg: Vec<bool> = (0..msg_len).map(|_| s.bit()).collect();
            assert_eq!(prf.eval(&key, &msg).unwrap(), toy_prf_oracle(&key, &msg));
        }
    }
}

#[test]
fn circuits_match_recursive_evaluator_on_every_input() {
    let mut s = stream("exhaustive");
    for inputs in 1..=10 {
        for _ in 0..3 {
            let gates = 1 + s.below(12) as usize;
            let c = random_circuit(&mut s, inputs, gates, 6);
            for x in 0u32..(1 << inputs) {
                let bits: Vec<bool> = (0..inputs).map(|i| x >> i & 1 == 1).collect();
                assert_eq!(c.eval(&bits).unwrap(), recursive_eval(&c, &bits));
            }
        }
    }
}

#[test]
fn one_gate_identity_and_local_rule() {
    let pp = ParamSet::toy();
    let mut s = stream("one gate");
    let (n, m, modulus) = (pp.n, pp.m, pp.modulus());
    let c = NandCircuit::new(2, vec![(0, 1)], 2).unwrap();
    for bits in [[true, true], [true, false], [false, true], [false, false]] {
        let a = RingMatrix::row(uniform_ring_vector(&mut s, modulus, n, m));
        let g = gadget(m, n, modulus);
        let rs = [sign_matrix(&mut s, m, n), sign_matrix(&mut s, m, n)];
        let mats: Vec<RingMatrix> = rs
            .iter()
            .zip(bits)
            .map(|(r, b)| {
                let ar = a.mul_int_matrix(r).unwrap();
                if b { ar.add(&g).unwrap() } else { ar }
            })
            .collect();
        let (r_c, bit) = eval_secret(&c, &mats, &rs, &bits).unwrap();
        assert_eq!(bit, !(bits[0] && bits[1]));
        // R_g = -R_l D(A_r) - b_l R_r.
        let d = gadget_decompose_matrix(&mats[1]).unwrap();
        let mut want = rs[0].mul(&d).unwrap().neg();
        if bits[0] {
            want = want.add(&rs[1].neg()).unwrap();
        }
        assert_eq!(r_c, want);
        let public = eval_public(&c, &mats).unwrap();
        let residual = public.sub(&a.mul_int_matrix(&r_c).unwrap()).unwrap();
        if bit {
            assert_eq!(residual, g);
        } else {
            assert_eq!(residual, RingMatrix::zero(1, m, n, modulus));
        }
    }
}

#[test]
fn depth_two_three_gate_circuit() {
    let pp = ParamSet::toy();
    let c = NandCircuit::new(3, vec![(0, 1), (1, 2), (3, 4)], 5).unwrap();
    assert_eq!(c.depth(), 2);
    let mut s = stream("depth two");
    for _ in 0..4 {
        assert!(homomorphic_check(&mut s, &pp, &c, 0).identity);
    }
}

#[test]
fn identity_on_50_random_circuits() {
    let pp = ParamSet::toy();
    let mut s = stream("random circuits");
    for _ in 0..50 {
        let inputs = 1 + s.below(8) as usize;
        let gates = 1 + s.below(10) as usize;
        let c = random_circuit(&mut s, inputs, gates, 4);
        assert!(c.depth() <= 4);
        assert!(homomorphic_check(&mut s, &pp, &c, 0).identity);
    }
}

#[test]
fn identity_across_toy_prf_circuit() {
    let pp = ParamSet::toy();
    let mut s = stream("prf circuit");
    assert!(homomorphic_check(&mut s, &pp, &pp.prf.circuit, 0).identity);
}

#[test]
fn r_norm_ratio_is_recorded() {
    let pp = ParamSet::toy();
    let mut s = stream("norm ratio");
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let inputs = [2, 4, 8, 16][i % 4];
        let c = balanced_circuit(&mut s, inputs);
        let check = homomorphic_check(&mut s, &pp, &c, 50);
        assert!(check.identity);
        let scale = inputs as f64 * (pp.m as f64).log2() + (pp.m as f64).sqrt();
        worst = worst.max(check.r_norm / scale);
    }
    println!("max ||R_C|| / (l log2 m + sqrt m) over 100 circuits: {worst:.1}");
    assert!(worst.is_finite() && worst > 0.0);
}
