use btrs_web::{attack_curve, attack_sweep, gaussian_histogram, ToyRing};

#[test]
fn attack_curve_rises_to_one() {
    let rates = attack_curve(2, 0.2, 60, &[7; 32]).unwrap();
    assert_eq!(rates.len(), attack_sweep().len());
    assert!(rates.last().unwrap() >= &0.95);
    assert!(rates.last().unwrap() > &rates[0]);
}

#[test]
fn histogram_tracks_exact_mass() {
    let flat = gaussian_histogram(3.3, 0.5, 50_000, &[3; 32]).unwrap();
    assert_eq!(flat.len() % 3, 0);
    let sd: f64 = flat.chunks(3).map(|t| (t[1] - t[2]).abs()).sum::<f64>() / 2.0;
    assert!(sd < 0.02, "{sd}");
    let mass: f64 = flat.chunks(3).map(|t| t[2]).sum();
    assert!(mass > 0.999 && mass <= 1.0 + 1e-12);
}

#[test]
fn toy_ring_signs_and_detects_tampering() {
    let mut ring = ToyRing::new(3, &[9; 32]).unwrap();
    assert_eq!(ring.size(), 3);
    let mut sig = ring.sign(2, "meet at noon").unwrap();
    assert_eq!(ring.verify("meet at noon", &sig), "accept");
    let norms = ring.block_norms(&sig).unwrap();
    assert_eq!(norms.len(), 4);
    assert!(norms[..3].iter().all(|&v| v <= norms[3]));
    let at = sig.len() - 8;
    sig[at] ^= 1;
    assert_eq!(ring.verify("meet at noon", &sig), "equation failure");
    assert!(ring.verify("meet at noon", &sig[..10]).starts_with("bad shape"));
}
