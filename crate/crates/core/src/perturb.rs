//! Perturbations with covariance sigma^2 I - s^2 P P^T.
//!
//! Multiplication by a ring element is diagonal in the negacyclic evaluation
//! basis, so the covariance splits into n/2 independent complex blocks, one
//! per conjugate pair of roots of X^n + 1. Block j is c^2 I - V V^* with
//! V = s·P̂_j (W x k). It is sampled as c·(I + V K V^*)·y with y standard
//! complex normal, where K (k x k) solves (I + V K V^*)^2 = I - V V^* / c^2:
//! with V^* V = R^* R and M M^* = I - R R^* / c^2, K = R^{-1} (M - I) R^{-*}.
//! The continuous sample is rounded to the nearest integer, which adds 1/12
//! to every variance; c^2 = sigma^2 - 1/12 absorbs that.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::ring::{IntMatrix, IntVector};
use crate::sampling::RandomStream;

const ROUNDING_VARIANCE: f64 = 1.0 / 12.0;

type Block = Vec<Complex64>;

#[derive(Clone)]
pub struct Perturbation {
    n: usize,
    w: usize,
    k: usize,
    c: f64,
    /// Per evaluation point: V (W x k, row major).
    v: Vec<Block>,
    /// Per evaluation point: K (k x k, row major).
    kk: Vec<Block>,
    /// zeta^{-i} / sqrt(n).
    untwist: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("n", &self.n)
            .field("w", &self.w)
            .field("k", &self.k)
            .field("c", &self.c)
            .finish()
    }
}

/// Evaluations of an integer polynomial at zeta^{2j+1}, j < n/2.
fn evaluate(a: &[i64], twist: &[Complex64], fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
    for ((b, &x), t) in buf.iter_mut().zip(a).zip(twist) {
        *b = t * x as f64;
    }
    fft.process(buf);
}

/// In-place lower Cholesky factor of a Hermitian k x k matrix.
fn cholesky(a: &mut [Complex64], k: usize) -> bool {
    for j in 0..k {
        let mut d = a[j * k + j].re;
        for l in 0..j {
            d -= a[j * k + l].norm_sqr();
        }
        if d.is_nan() || d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j * k + j] = Complex64::new(d, 0.0);
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for l in 0..j {
                s -= a[i * k + l] * a[j * k + l].conj();
            }
            a[i * k + j] = s / d;
        }
        for i in 0..j {
            a[i * k + j] = Complex64::new(0.0, 0.0);
        }
    }
    true
}

/// Largest eigenvalue of a Hermitian PSD matrix.
fn top_eigenvalue(a: &[Complex64], k: usize) -> f64 {
    let mut x: Vec<Complex64> = (0..k).map(|i| Complex64::new(1.0 + i as f64 * 0.01, 0.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y: Vec<Complex64> = (0..k).map(|i| (0..k).map(|l| a[i * k + l] * x[l]).sum()).collect();
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x = y.into_iter().map(|z| z / norm).collect();
    }
    lambda
}

/// X = L^{-1} B for lower-triangular L (k x k), B (k x k).
fn solve_lower(l: &[Complex64], b: &[Complex64], k: usize) -> Block {
    let mut x = b.to_vec();
    for col in 0..k {
        for i in 0..k {
            let mut s = x[i * k + col];
            for j in 0..i {
                s -= l[i * k + j] * x[j * k + col];
            }
            x[i * k + col] = s / l[i * k + i];
        }
    }
    x
}

/// V^* V for V (rows x k, row major).
fn gram(v: &[Complex64], k: usize) -> Block {
    let mut g = vec![Complex64::new(0.0, 0.0); k * k];
    for row in v.chunks_exact(k) {
        for a in 0..k {
            let ca = row[a].conj();
            for b in 0..k {
                g[a * k + b] += ca * row[b];
            }
        }
    }
    g
}

fn adjoint(a: &[Complex64], k: usize) -> Block {
    let mut out = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            out[j * k + i] = a[i * k + j].conj();
        }
    }
    out
}

impl Perturbation {
    /// Prepares the sampler for covariance sigma^2 I - s^2 P P^T.
    pub fn new(p: &IntMatrix, s: f64, sigma: f64) -> Result<Self> {
        let (w, k, n) = (p.rows(), p.cols(), p.n());
        if n < 2 {
            return Err(Error::InvalidParams("perturbation needs n >= 2".into()));
        }
        let c2 = sigma * sigma - ROUNDING_VARIANCE;
        let half = n / 2;
        let mut planner = FftPlanner::new();
        let inverse = planner.plan_fft_inverse(n);
        let forward = planner.plan_fft_forward(n);
        let twist: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, PI * i as f64 / n as f64)).collect();
        let untwist: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0 / (n as f64).sqrt(), -PI * i as f64 / n as f64))
            .collect();

        let mut v = vec![vec![Complex64::new(0.0, 0.0); w * k]; half];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..w {
            for col in 0..k {
                evaluate(p.entry(r, col), &twist, inverse.as_ref(), &mut buf);
                for (j, vj) in v.iter_mut().enumerate() {
                    vj[r * k + col] = buf[j] * s;
                }
            }
        }

        let mut kk = Vec::with_capacity(half);
        for vj in &v {
            // V^* V = L L^*, so R = L^* and R R^* = L^* L.
            let mut l = gram(vj, k);
            if !cholesky(&mut l, k) {
                return Err(Error::InvalidParams("trapdoor has rank-deficient evaluations".into()));
            }
            let lh = adjoint(&l, k);
            let mut h = vec![Complex64::new(0.0, 0.0); k * k];
            for a in 0..k {
                for b in 0..k {
                    let rr: Complex64 = (0..k).map(|t| lh[a * k + t] * l[t * k + b]).sum();
                    h[a * k + b] = -rr / c2;
                }
                h[a * k + a] += 1.0;
            }
            if c2 <= 0.0 || !cholesky(&mut h, k) {
                let worst = v.iter().map(|vj| top_eigenvalue(&gram(vj, k), k)).fold(0.0, f64::max);
                let floor = (worst + ROUNDING_VARIANCE).sqrt();
                return Err(Error::SigmaBelowFloor { sigma, floor });
            }
            // K = L^{-*} (M - I) L^{-1} = (L^{-1})^* (M - I) L^{-1}.
            let mut mi = h;
            for a in 0..k {
                mi[a * k + a] -= 1.0;
            }
            let mut ident = vec![Complex64::new(0.0, 0.0); k * k];
            for a in 0..k {
                ident[a * k + a] = Complex64::new(1.0, 0.0);
            }
            let linv = solve_lower(&l, &ident, k);
            let linv_h = adjoint(&linv, k);
            let mut tmp = vec![Complex64::new(0.0, 0.0); k * k];
            for a in 0..k {
                for b in 0..k {
                    tmp[a * k + b] = (0..k).map(|t| linv_h[a * k + t] * mi[t * k + b]).sum();
                }
            }
            let mut kj = vec![Complex64::new(0.0, 0.0); k * k];
            for a in 0..k {
                for b in 0..k {
                    kj[a * k + b] = (0..k).map(|t| tmp[a * k + t] * linv[t * k + b]).sum();
                }
            }
            kk.push(kj);
        }
        Ok(Self {
            n,
            w,
            k,
            c: c2.sqrt(),
            v,
            kk,
            untwist,
            fft: forward,
        })
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn sample(&self, stream: &mut RandomStream) -> IntVector {
        let (n, w, k) = (self.n, self.w, self.k);
        let half = n / 2;
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        // spectra[r * n + j]: evaluation j of row r.
        let mut spectra = vec![Complex64::new(0.0, 0.0); w * n];
        let mut y = vec![Complex64::new(0.0, 0.0); w];
        let mut a = vec![Complex64::new(0.0, 0.0); k];
        let mut b = vec![Complex64::new(0.0, 0.0); k];
        for j in 0..half {
            for yr in y.iter_mut() {
                *yr = Complex64::new(stream.standard_normal() * scale, stream.standard_normal() * scale);
            }
            let vj = &self.v[j];
            a.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for (row, yr) in vj.chunks_exact(k).zip(&y) {
                for (ac, vc) in a.iter_mut().zip(row) {
                    *ac += vc.conj() * yr;
                }
            }
            let kj = &self.kk[j];
            for (bi, krow) in b.iter_mut().zip(kj.chunks_exact(k)) {
                *bi = krow.iter().zip(&a).map(|(x, y)| x * y).sum();
            }
            for (r, (row, yr)) in vj.chunks_exact(k).zip(&y).enumerate() {
                let vb: Complex64 = row.iter().zip(&b).map(|(x, y)| x * y).sum();
                let val = (yr + vb) * self.c;
                spectra[r * n + j] = val;
                spectra[r * n + n - 1 - j] = val.conj();
            }
        }
        let mut data = Vec::with_capacity(w * n);
        for row in spectra.chunks_exact_mut(n) {
            self.fft.process(row);
            for (x, t) in row.iter().zip(&self.untwist) {
                data.push((x * t).re.round() as i64);
            }
        }
        IntVector::from_data(n, data).expect("shape matches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Coefficient embedding of multiplication by a (column j = a·X^j).
    #[allow(clippy::needless_range_loop)]
    fn rot(a: &[i64]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m = vec![vec![0.0; n]; n];
        for j in 0..n {
            for (i, &ai) in a.iter().enumerate() {
                let (idx, sgn) = if i + j < n { (i + j, 1.0) } else { (i + j - n, -1.0) };
                m[idx][j] += sgn * ai as f64;
            }
        }
        m
    }

    #[test]
    fn covariance_matches_target() {
        let n = 4;
        let (w, k) = (3, 2);
        let data: Vec<i64> = vec![3, -1, 0, 2, 1, 1, -2, 0, 1, 0, 0, 0, 0, 0, 0, 0, -1, 2, 2, 1, 0, 1, 0, 0];
        let p = IntMatrix::from_data(w, k, n, data).unwrap();
        let (s, sigma) = (2.0, 40.0);
        let pert = Perturbation::new(&p, s, sigma).unwrap();

        // Target: sigma^2 I - s^2 Rot(P) Rot(P)^T over the w*n coefficients.
        let dim = w * n;
        let mut big = vec![vec![0.0; k * n]; dim];
        for r in 0..w {
            for c in 0..k {
                let m = rot(p.entry(r, c));
                for i in 0..n {
                    for j in 0..n {
                        big[r * n + i][c * n + j] = m[i][j];
                    }
                }
            }
        }
        let mut target = vec![vec![0.0; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                let dot: f64 = (0..k * n).map(|t| big[a][t] * big[b][t]).sum();
                target[a][b] = -s * s * dot + if a == b { sigma * sigma } else { 0.0 };
            }
        }

        let mut st = RandomStream::from_seed([9; 32]);
        let draws = 200_000;
        let mut acc = vec![vec![0.0; dim]; dim];
        let mut mean = vec![0.0; dim];
        for _ in 0..draws {
            let x = pert.sample(&mut st);
            let flat: Vec<f64> = (0..w).flat_map(|r| x.entry(r).iter().map(|&c| c as f64).collect::<Vec<_>>()).collect();
            for a in 0..dim {
                mean[a] += flat[a];
                for b in 0..dim {
                    acc[a][b] += flat[a] * flat[b];
                }
            }
        }
        let tol = 5.0 * sigma * sigma * (2.0 / draws as f64).sqrt();
        for a in 0..dim {
            assert!((mean[a] / draws as f64).abs() < 0.5, "mean {a}");
            for b in 0..dim {
                let got = acc[a][b] / draws as f64;
                assert!((got - target[a][b]).abs() < tol, "({a},{b}): {got} vs {}", target[a][b]);
            }
        }
    }

    #[test]
    fn below_floor_reports_floor() {
        let p = IntMatrix::from_data(1, 1, 4, vec![5, 0, 0, 0]).unwrap();
        match Perturbation::new(&p, 2.0, 5.0) {
            Err(Error::SigmaBelowFloor { floor, .. }) => assert!((floor - (100.0f64 + 1.0 / 12.0).sqrt()).abs() < 1e-6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Perturbation::new(&p, 2.0, 10.1).is_ok());
    }
}
