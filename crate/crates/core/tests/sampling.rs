use btrs_core::ring::Modulus;
use btrs_core::sampling::{
    gauss_int_vector, gauss_ring_vector, gauss_z, uniform_ring_elem, GaussianParam, RandomStream, ZSampler, TAU,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn stream(tag: u8) -> RandomStream {
    RandomStream::from_seed([tag; 32])
}

/// Truncated discrete Gaussian by direct summation over its support.
fn oracle_pmf(sigma: f64, center: f64) -> (i64, Vec<f64>) {
    let lo = (center - TAU * sigma).ceil() as i64;
    let hi = (center + TAU * sigma).floor() as i64;
    let w: Vec<f64> = (lo..=hi)
        .map(|z| (-(z as f64 - center).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    (lo, w.iter().map(|x| x / total).collect())
}

#[test]
fn uniform_coefficients_pass_chi_square() {
    let m = Modulus::new(10).unwrap();
    let mut s = stream(1);
    let bins = 100;
    let mut counts = vec![0u64; bins];
    let mut drawn = 0;
    while drawn < 1_000_000 {
        for &c in uniform_ring_elem(&mut s, m, 64).coeffs() {
            counts[(c as u128 * bins as u128 / m.q() as u128) as usize] += 1;
        }
        drawn += 64;
    }
    // Bin widths differ by one value at most; use the exact expected mass.
    let q = m.q() as f64;
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(b, &obs)| {
            let lo = (b as u128 * m.q() as u128).div_ceil(bins as u128) as f64;
            let hi = ((b as u128 + 1) * m.q() as u128).div_ceil(bins as u128) as f64;
            let exp = drawn as f64 * (hi - lo) / q;
            (obs as f64 - exp).powi(2) / exp
        })
        .sum();
    let p = ChiSquared::new((bins - 1) as f64).unwrap().sf(chi2);
    assert!(p > 0.001, "chi2 {chi2}, p {p}");
}

#[test]
fn streams_are_deterministic_and_labels_separate() {
    let m = Modulus::new(10).unwrap();
    let a = uniform_ring_elem(&mut stream(2), m, 64);
    let b = uniform_ring_elem(&mut stream(2), m, 64);
    assert_eq!(a, b);
    let root = stream(2);
    let x = uniform_ring_elem(&mut root.fork("alpha"), m, 64);
    let y = uniform_ring_elem(&mut root.fork("beta"), m, 64);
    assert_ne!(x, y);
    assert_eq!(x, uniform_ring_elem(&mut root.fork("alpha"), m, 64));
}

#[test]
fn tiny_sigma_is_always_center() {
    let mut s = stream(3);
    let p = GaussianParam::centered(0.05).unwrap();
    assert!((0..10_000).all(|_| gauss_z(&mut s, &p) == 0));
    let v = gauss_ring_vector(&mut s, &p, 4, 64, Modulus::new(10).unwrap());
    assert_eq!(v.norm_l2(), 0.0);
}

#[test]
fn mean_and_variance_at_table_width() {
    let sigma = 3.3;
    let sampler = ZSampler::new(&GaussianParam::centered(sigma).unwrap());
    let mut s = stream(4);
    let draws = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let x = sampler.sample(&mut s) as f64;
        sum += x;
        sq += x * x;
    }
    let mean = sum / draws as f64;
    let var = sq / draws as f64 - mean * mean;
    let (lo, pmf) = oracle_pmf(sigma, 0.0);
    let exact: f64 = pmf.iter().enumerate().map(|(i, p)| p * ((lo + i as i64) as f64).powi(2)).sum();
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var / exact - 1.0).abs() < 0.02, "var {var} vs {exact}");
}

#[test]
fn empirical_pmf_matches_exact_at_three_centers() {
    let sigma = 3.3;
    let draws = 10_000_000u64;
    for (i, center) in [0.0, 1.0 / 3.0, 2.0 / 3.0].into_iter().enumerate() {
        let param = GaussianParam::new(sigma, center).unwrap();
        let sampler = ZSampler::new(&param);
        let (lo, pmf) = oracle_pmf(sigma, center);
        let mut counts = vec![0u64; pmf.len()];
        let mut s = stream(10 + i as u8);
        let bound = (TAU * sigma).ceil() as i64 + center.abs().ceil() as i64;
        for _ in 0..draws {
            let x = sampler.sample(&mut s);
            assert!(x.abs() <= bound);
            counts[(x - lo) as usize] += 1;
        }
        let sd: f64 = 0.5
            * counts
                .iter()
                .zip(&pmf)
                .map(|(&c, p)| (c as f64 / draws as f64 - p).abs())
                .sum::<f64>();
        assert!(sd < 0.003, "center {center}: SD {sd}");
    }
}

#[test]
fn magnitude_respects_tail_cut() {
    let mut s = stream(5);
    for (sigma, center) in [(0.8, 0.25), (3.3, -2.5), (40.0, 7.0), (500.0, 0.5)] {
        let p = GaussianParam::new(sigma, center).unwrap();
        let bound = (TAU * sigma).ceil() + center.abs();
        for _ in 0..20_000 {
            assert!((gauss_z(&mut s, &p) as f64).abs() <= bound);
        }
    }
}

#[test]
fn ring_vector_norm_tail_bound() {
    let sigma = 3.3;
    let (width, n) = (128, 64);
    let p = GaussianParam::centered(sigma).unwrap();
    let limit = 1.1 * sigma * ((width * n) as f64).sqrt();
    let mut s = stream(6);
    let trials = 2000;
    let over = (0..trials)
        .filter(|_| gauss_int_vector(&mut s, &p, width, n).norm_l2() > limit)
        .count();
    assert!(over as f64 <= 0.001 * trials as f64, "{over} of {trials} above the bound");
}

#[test]
fn gaussian_vectors_are_reproducible() {
    let p = GaussianParam::centered(3.3).unwrap();
    let m = Modulus::new(10).unwrap();
    let a = gauss_ring_vector(&mut stream(7), &p, 8, 64, m);
    let b = gauss_ring_vector(&mut stream(7), &p, 8, 64, m);
    assert_eq!(a, b);
}
