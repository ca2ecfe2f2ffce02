use btrs_core::ring::{Codec, Modulus, RingElem, RingMatrix, RingVector};
use btrs_core::sampling::{uniform_ring_elem, RandomStream};
use num_bigint::BigInt;
use num_traits::Zero;
use proptest::prelude::*;

fn stream(tag: u8) -> RandomStream {
    RandomStream::from_seed([tag; 32])
}

fn to_big(a: &RingElem) -> Vec<BigInt> {
    a.coeffs().iter().map(|&c| BigInt::from(c)).collect()
}

fn reduce(x: &BigInt, q: &BigInt) -> u64 {
    let r = ((x % q) + q) % q;
    u64::try_from(r).unwrap()
}

/// Negacyclic product in arbitrary precision, reduced at the end.
fn big_mul(a: &RingElem, b: &RingElem) -> Vec<u64> {
    let n = a.n();
    let q = BigInt::from(a.modulus().q());
    let (x, y) = (to_big(a), to_big(b));
    let mut acc = vec![BigInt::zero(); n];
    for i in 0..n {
        for j in 0..n {
            let p = &x[i] * &y[j];
            if i + j < n {
                acc[i + j] += p;
            } else {
                acc[i + j - n] -= p;
            }
        }
    }
    acc.iter().map(|c| reduce(c, &q)).collect()
}

/// Schoolbook with the sign folded in as each term is placed.
fn schoolbook(a: &RingElem, b: &RingElem) -> Vec<u64> {
    let n = a.n();
    let q = a.modulus().q() as i128;
    let mut acc = vec![0i128; n];
    for (i, &x) in a.coeffs().iter().enumerate() {
        for (j, &y) in b.coeffs().iter().enumerate() {
            let t = (x as i128 * y as i128) % q;
            let slot = (i + j) % n;
            acc[slot] = if i + j < n { (acc[slot] + t) % q } else { (acc[slot] - t).rem_euclid(q) };
        }
    }
    acc.into_iter().map(|c| c as u64).collect()
}

#[test]
fn add_matches_big_integer_oracle() {
    let m = Modulus::new(10).unwrap();
    let mut s = stream(1);
    let q = BigInt::from(m.q());
    for _ in 0..200 {
        let a = uniform_ring_elem(&mut s, m, 64);
        let b = uniform_ring_elem(&mut s, m, 64);
        let want: Vec<u64> = to_big(&a).iter().zip(to_big(&b)).map(|(x, y)| reduce(&(x + y), &q)).collect();
        assert_eq!(a.add(&b).unwrap().coeffs(), &want[..]);
    }
}

#[test]
fn additive_identity_and_characteristic() {
    let m = Modulus::new(10).unwrap();
    let mut s = stream(2);
    let a = uniform_ring_elem(&mut s, m, 64);
    assert_eq!(a.add(&RingElem::zero(64, m)).unwrap(), a);
    assert!(a.add(&a.scale(m.q() - 1)).unwrap().is_zero());
}

#[test]
fn mul_matches_schoolbook_on_1000_pairs() {
    let m = Modulus::new(10).unwrap();
    let mut s = stream(3);
    for _ in 0..1000 {
        let a = uniform_ring_elem(&mut s, m, 64);
        let b = uniform_ring_elem(&mut s, m, 64);
        assert_eq!(a.mul(&b).unwrap().coeffs(), &schoolbook(&a, &b)[..]);
    }
}

#[test]
fn mul_matches_big_integer_oracle_at_full_size() {
    let m = Modulus::new(30).unwrap();
    let mut s = stream(4);
    for _ in 0..20 {
        let a = uniform_ring_elem(&mut s, m, 512);
        let b = uniform_ring_elem(&mut s, m, 512);
        assert_eq!(a.mul(&b).unwrap().coeffs(), &big_mul(&a, &b)[..]);
    }
}

#[test]
fn multiplicative_identity_and_wraparound() {
    for k in [10, 30] {
        let m = Modulus::new(k).unwrap();
        let mut s = stream(5);
        let a = uniform_ring_elem(&mut s, m, 64);
        assert_eq!(RingElem::one(64, m).mul(&a).unwrap(), a);
        let prod = RingElem::monomial(64, m, 1).mul(&RingElem::monomial(64, m, 63)).unwrap();
        assert_eq!(prod, RingElem::constant(64, m, m.q() - 1));
    }
}

#[test]
fn matvec_matches_composition() {
    let m = Modulus::new(10).unwrap();
    let mut s = stream(6);
    let (a, b) = (uniform_ring_elem(&mut s, m, 64), uniform_ring_elem(&mut s, m, 64));
    let (x, y) = (uniform_ring_elem(&mut s, m, 64), uniform_ring_elem(&mut s, m, 64));
    let mat = RingMatrix::new(1, 2, vec![a.clone(), b.clone()], 64, m).unwrap();
    let v = RingVector::new(vec![x.clone(), y.clone()], 64, m).unwrap();
    let want = a.mul(&x).unwrap().add(&b.mul(&y).unwrap()).unwrap();
    assert_eq!(mat.matvec(&v).unwrap().get(0), &want);

    let one = RingMatrix::new(1, 1, vec![RingElem::one(64, m)], 64, m).unwrap();
    let single = RingVector::new(vec![x.clone()], 64, m).unwrap();
    assert_eq!(one.matvec(&single).unwrap(), single);
    let zero = RingMatrix::zero(1, 2, 64, m);
    assert!(zero.matvec(&v).unwrap().get(0).is_zero());
}

#[test]
fn norm_uses_centered_lift() {
    let m = Modulus::new(10).unwrap();
    let q = m.q() as i64;
    let top = RingElem::from_coeffs(vec![m.q() - 1, 0, 0, 0], m).unwrap();
    assert_eq!(top.norm_l2(), 1.0);
    let mut s = stream(7);
    for _ in 0..50 {
        let a = uniform_ring_elem(&mut s, m, 64);
        let centered = a.centered();
        let mut shifted = centered.clone();
        let idx = s.below(64) as usize;
        shifted[idx] += q;
        assert_eq!(RingElem::from_i64(&shifted, m).unwrap().norm_l2(), a.norm_l2());
    }
    assert_eq!(RingVector::zero(3, 64, m).norm_l2(), 0.0);
}

#[test]
fn mismatched_modulus_is_an_error() {
    let a = RingElem::one(64, Modulus::new(10).unwrap());
    let b = RingElem::one(64, Modulus::new(11).unwrap());
    assert!(a.add(&b).is_err());
    assert!(a.mul(&b).is_err());
    assert!(a.mul(&RingElem::one(32, Modulus::new(10).unwrap())).is_err());
}

#[test]
fn non_canonical_coefficient_rejected_on_decode() {
    let m = Modulus::new(10).unwrap();
    let mut bytes = RingElem::one(64, m).to_bytes();
    let len = bytes.len();
    bytes[len - 8..].copy_from_slice(&m.q().to_le_bytes());
    assert!(RingElem::from_bytes(&bytes).is_err());
    assert!(RingElem::from_bytes(&bytes[..len - 3]).is_err());
}

fn elem(seed: u64, n: usize, m: Modulus) -> RingElem {
    let mut s = RandomStream::from_seed([0; 32]).fork_indexed("law", seed);
    uniform_ring_elem(&mut s, m, n)
}

fn law_checks(seed: u64, n: usize, k: u32) {
    let m = Modulus::new(k).unwrap();
    let (a, b, c) = (elem(seed, n, m), elem(seed.wrapping_add(1), n, m), elem(seed.wrapping_add(2), n, m));
    assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
    assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
    assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
    assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
    assert_eq!(
        a.mul(&b.add(&c).unwrap()).unwrap(),
        a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_laws_n64(seed in any::<u64>(), k in prop::sample::select(vec![10u32, 30])) {
        law_checks(seed, 64, k);
    }

    #[test]
    fn codec_round_trips(seed in any::<u64>(), rows in 1usize..4, cols in 1usize..4) {
        let m = Modulus::new(10).unwrap();
        let data: Vec<RingElem> = (0..rows * cols).map(|i| elem(seed.wrapping_add(i as u64), 64, m)).collect();
        let e = data[0].clone();
        prop_assert_eq!(RingElem::from_bytes(&e.to_bytes()).unwrap(), e);
        let v = RingVector::new(data[..cols].to_vec(), 64, m).unwrap();
        prop_assert_eq!(RingVector::from_bytes(&v.to_bytes()).unwrap(), v);
        let mat = RingMatrix::new(rows, cols, data, 64, m).unwrap();
        prop_assert_eq!(RingMatrix::from_bytes(&mat.to_bytes()).unwrap(), mat);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ring_laws_n512(seed in any::<u64>()) {
        law_checks(seed, 512, 30);
    }
}

#[test]
fn big_oracle_unit_at_full_size() {
    let m = Modulus::new(30).unwrap();
    let a = elem(99, 512, m);
    let want = big_mul(&RingElem::one(512, m), &a);
    assert_eq!(a.coeffs(), &want[..]);
}
