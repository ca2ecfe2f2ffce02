//! The statistical-distance accumulation attack.
//!
//! An adversary collects Q signatures from one ring member, histograms the
//! coefficients of every slot, scores each slot by its statistical distance
//! to a reference distribution and names the highest scorer as the signer.
//! Against a scheme whose signer slot is sampled slightly differently from
//! the others the verdict converges to the signer; against the bonsai-tree
//! scheme it should stay uniform.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::sampling::{RandomStream, TAU};
use crate::scheme::{keygen, MessageContext, PreparedSigner, Ring};

/// Scores closer than this are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Bins used for Gaussian-shaped coefficients.
pub const GAUSSIAN_BINS: usize = 256;

/// Equal-width bins; values outside the covered range land in the end bins.
#[derive(Clone, Debug, PartialEq)]
pub struct Binning {
    lo: f64,
    width: f64,
    inv_width: f64,
    bins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || hi.is_nan() || lo.is_nan() || hi <= lo {
            return Err(Error::InvalidParams(format!("cannot bin [{lo}, {hi}] into {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        Ok(Self {
            lo,
            width,
            inv_width: 1.0 / width,
            bins,
        })
    }

    /// One bin per integer in [lo, hi].
    pub fn exact(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidParams(format!("empty support [{lo}, {hi}]")));
        }
        Self::new(lo as f64 - 0.5, hi as f64 + 0.5, (hi - lo + 1) as usize)
    }

    /// [`GAUSSIAN_BINS`] bins over [-TAU sigma, TAU sigma].
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(-TAU * sigma, TAU * sigma, GAUSSIAN_BINS)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn index(&self, x: i64) -> usize {
        let b = ((x as f64 - self.lo) * self.inv_width).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.bins - 1)
        }
    }

    /// Left and right edge of bin `b`.
    pub fn edges(&self, b: usize) -> (f64, f64) {
        let left = self.lo + b as f64 * self.width;
        (left, left + self.width)
    }
}

/// A binned histogram of integer samples.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    binning: Binning,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn new(binning: Binning) -> Self {
        Self {
            counts: vec![0; binning.bins()],
            binning,
            total: 0,
        }
    }

    pub fn from_counts(binning: Binning, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != binning.bins() {
            return Err(Error::Shape(format!("{} counts for {} bins", counts.len(), binning.bins())));
        }
        let total = counts.iter().sum();
        Ok(Self { binning, counts, total })
    }

    #[inline]
    pub fn add(&mut self, x: i64) {
        self.counts[self.binning.index(x)] += 1;
        self.total += 1;
    }

    pub fn extend(&mut self, xs: &[i64]) {
        for &x in xs {
            self.add(x);
        }
    }

    pub fn merge(&mut self, other: &EmpiricalDistribution) -> Result<()> {
        if self.binning != other.binning {
            return Err(Error::Mismatch("histograms use different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

/// Half the L1 distance between two histograms on the same bins.
pub fn statistical_distance(p: &EmpiricalDistribution, r: &EmpiricalDistribution) -> Result<f64> {
    if p.binning != r.binning {
        return Err(Error::Mismatch("histograms use different bins".into()));
    }
    distance_to_pmf(p, &r.probabilities())
}

/// Half the L1 distance between a histogram and a probability vector.
pub fn distance_to_pmf(p: &EmpiricalDistribution, pmf: &[f64]) -> Result<f64> {
    if pmf.len() != p.binning.bins() {
        return Err(Error::Mismatch(format!("{} probabilities for {} bins", pmf.len(), p.binning.bins())));
    }
    if p.total == 0 {
        return Err(Error::InvalidParams("empty histogram".into()));
    }
    let t = p.total as f64;
    let l1: f64 = p.counts.iter().zip(pmf).map(|(&c, &q)| (c as f64 / t - q).abs()).sum();
    Ok(0.5 * l1)
}

/// Binned mass of the centered discrete Gaussian of width `sigma`,
/// summed exactly over the integers within TAU sigma.
pub fn discrete_gaussian_pmf(binning: &Binning, sigma: f64) -> Vec<f64> {
    let cut = (TAU * sigma).ceil() as i64;
    let mut mass = vec![0.0; binning.bins()];
    let c = -0.5 / (sigma * sigma);
    for x in -cut..=cut {
        mass[binning.index(x)] += (c * (x * x) as f64).exp();
    }
    normalize(mass)
}

/// Binned mass of the uniform distribution on [lo, hi].
pub fn uniform_pmf(binning: &Binning, lo: i64, hi: i64) -> Vec<f64> {
    let mut mass = vec![0.0; binning.bins()];
    for x in lo..=hi {
        mass[binning.index(x)] += 1.0;
    }
    normalize(mass)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// What each slot is compared against.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    /// A fixed probability vector over the bins.
    Pmf(Vec<f64>),
    /// The pooled histogram of every other slot. With two slots the two
    /// scores coincide exactly, so the verdict is always the tie-break.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackVerdict {
    pub scores: Vec<f64>,
    pub argmax: usize,
    pub q: usize,
    /// Another slot had the same top score; the lowest index won.
    pub tied: bool,
}

/// Per-slot histograms over a growing set of signatures.
#[derive(Clone, Debug)]
pub struct Accumulator {
    slots: Vec<EmpiricalDistribution>,
    q: usize,
}

impl Accumulator {
    pub fn new(slots: usize, binning: &Binning) -> Self {
        Self {
            slots: (0..slots).map(|_| EmpiricalDistribution::new(binning.clone())).collect(),
            q: 0,
        }
    }

    /// One signature: the coefficients of each slot.
    pub fn add(&mut self, slots: &[&[i64]]) -> Result<()> {
        if slots.len() != self.slots.len() {
            return Err(Error::Shape(format!("{} slots, expected {}", slots.len(), self.slots.len())));
        }
        for (h, xs) in self.slots.iter_mut().zip(slots) {
            h.extend(xs);
        }
        self.q += 1;
        Ok(())
    }

    /// One signature with a single coefficient per slot.
    pub fn add_tuple(&mut self, tuple: &[i64]) -> Result<()> {
        let slots: Vec<&[i64]> = tuple.iter().map(std::slice::from_ref).collect();
        self.add(&slots)
    }

    pub fn slots(&self) -> &[EmpiricalDistribution] {
        &self.slots
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn verdict(&self, reference: &Reference) -> Result<AttackVerdict> {
        if self.q == 0 {
            return Err(Error::InvalidParams("no signatures accumulated".into()));
        }
        let scores = (0..self.slots.len())
            .map(|i| match reference {
                Reference::Pmf(pmf) => distance_to_pmf(&self.slots[i], pmf),
                Reference::Pooled => {
                    let mut pool = EmpiricalDistribution::new(self.slots[i].binning.clone());
                    for (j, h) in self.slots.iter().enumerate() {
                        if j != i {
                            pool.merge(h)?;
                        }
                    }
                    statistical_distance(&self.slots[i], &pool)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        // Scores equal up to summation rounding count as tied.
        let top = scores.iter().cloned().fold(f64::MIN, f64::max);
        let is_top = |s: f64| top - s <= TIE_TOLERANCE;
        let argmax = scores.iter().position(|&s| is_top(s)).expect("nonempty");
        let tied = scores.iter().filter(|&&s| is_top(s)).count() > 1;
        Ok(AttackVerdict {
            scores,
            argmax,
            q: self.q,
            tied,
        })
    }
}

/// Histograms every slot of `samples` and names the most distant one.
pub fn accumulate_and_identify(samples: &[Vec<i64>], binning: &Binning, reference: &Reference) -> Result<AttackVerdict> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidParams("no samples".into()))?;
    let mut acc = Accumulator::new(first.len(), binning);
    for s in samples {
        acc.add_tuple(s)?;
    }
    acc.verdict(reference)
}

/// The all-but-one model: every slot is uniform on [-bound, bound] except
/// the signer's, which is at statistical distance `eps_bias` from it.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicScheme {
    n_ring: usize,
    bound: i64,
    eps_bias: f64,
    /// Probability that a negative signer draw is reflected to positive.
    flip: f64,
}

impl BasicScheme {
    pub fn new(n_ring: usize, bound: i64, eps_bias: f64) -> Result<Self> {
        if n_ring < 2 || bound < 1 {
            return Err(Error::InvalidParams("need N >= 2 and bound >= 1".into()));
        }
        let width = (2 * bound + 1) as f64;
        let max = bound as f64 / width;
        if !(0.0..=max).contains(&eps_bias) {
            return Err(Error::InvalidParams(format!("eps_bias must lie in [0, {max:.4}] for bound {bound}")));
        }
        Ok(Self {
            n_ring,
            bound,
            eps_bias,
            flip: eps_bias * width / bound as f64,
        })
    }

    pub fn n_ring(&self) -> usize {
        self.n_ring
    }

    pub fn binning(&self) -> Binning {
        Binning::exact(-self.bound, self.bound).expect("bound >= 1")
    }

    pub fn reference(&self) -> Vec<f64> {
        uniform_pmf(&self.binning(), -self.bound, self.bound)
    }

    /// Exact distribution of the signer slot.
    pub fn signer_pmf(&self) -> Vec<f64> {
        let u = 1.0 / (2 * self.bound + 1) as f64;
        (-self.bound..=self.bound)
            .map(|x| match x.signum() {
                -1 => u * (1.0 - self.flip),
                1 => u * (1.0 + self.flip),
                _ => u,
            })
            .collect()
    }

    fn uniform(&self, stream: &mut RandomStream) -> i64 {
        stream.below((2 * self.bound + 1) as u64) as i64 - self.bound
    }

    fn biased(&self, stream: &mut RandomStream) -> i64 {
        let x = self.uniform(stream);
        if x < 0 && stream.unit_f64() < self.flip {
            -x
        } else {
            x
        }
    }

    pub fn sample(&self, signer: usize, stream: &mut RandomStream) -> Vec<i64> {
        (0..self.n_ring)
            .map(|i| if i == signer { self.biased(stream) } else { self.uniform(stream) })
            .collect()
    }

    pub fn simulate(&self, signer: usize, q: usize, stream: &mut RandomStream) -> Result<Vec<Vec<i64>>> {
        if signer >= self.n_ring {
            return Err(Error::InvalidParams(format!("signer {signer} outside a ring of {}", self.n_ring)));
        }
        Ok((0..q).map(|_| self.sample(signer, stream)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasicConfig {
    pub q_sweep: Vec<usize>,
    pub reps: usize,
    pub n_ring: usize,
    pub eps_bias: f64,
    pub bound: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasicRow {
    pub q: usize,
    pub reps: usize,
    pub n_ring: usize,
    pub eps_bias: f64,
    pub success_rate: f64,
    pub advantage: f64,
    /// How often each slot was named.
    pub index_freq: Vec<f64>,
}

fn checked_sweep(q_sweep: &[usize]) -> Result<Vec<usize>> {
    let mut sweep = q_sweep.to_vec();
    sweep.sort_unstable();
    sweep.dedup();
    if sweep.is_empty() || sweep[0] == 0 {
        return Err(Error::InvalidParams("Q sweep must be nonempty and positive".into()));
    }
    Ok(sweep)
}

/// Success rate of the attack per Q. Repetition r signs as slot r mod N,
/// so each slot signs equally often, and reuses one growing sample across
/// the sweep.
pub fn experiment_basic(config: &BasicConfig, stream: &RandomStream) -> Result<Vec<BasicRow>> {
    let scheme = BasicScheme::new(config.n_ring, config.bound, config.eps_bias)?;
    let sweep = checked_sweep(&config.q_sweep)?;
    let n = config.n_ring;
    let binning = scheme.binning();
    let reference = Reference::Pmf(scheme.reference());
    let mut hits = vec![0usize; sweep.len()];
    let mut named = vec![vec![0usize; n]; sweep.len()];
    for rep in 0..config.reps {
        let mut s = stream.fork_indexed("basic", rep as u64);
        let signer = rep % n;
        let mut acc = Accumulator::new(n, &binning);
        for (k, &q) in sweep.iter().enumerate() {
            while acc.q() < q {
                acc.add_tuple(&scheme.sample(signer, &mut s))?;
            }
            let v = acc.verdict(&reference)?;
            hits[k] += (v.argmax == signer) as usize;
            named[k][v.argmax] += 1;
        }
    }
    let reps = config.reps.max(1) as f64;
    Ok(sweep
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let success_rate = hits[k] as f64 / reps;
            BasicRow {
                q,
                reps: config.reps,
                n_ring: n,
                eps_bias: config.eps_bias,
                success_rate,
                advantage: (success_rate - 1.0 / n as f64).max(0.0),
                index_freq: named[k].iter().map(|&c| c as f64 / reps).collect(),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Binned discrete Gaussian at the signing width.
    Analytic,
    /// Pooled histogram of the other slots.
    Pooled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OursConfig {
    pub n_ring: usize,
    pub q_sweep: Vec<usize>,
    pub reps: usize,
    pub signer: usize,
    pub reference: ReferenceMode,
    /// Delegate afresh for every signature instead of once per repetition.
    pub fresh_delegation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OursRow {
    pub q: usize,
    pub reps: usize,
    pub n_ring: usize,
    pub freqs: Vec<f64>,
    pub counts: Vec<u64>,
    pub sd_from_uniform: f64,
    pub chi_square_p: f64,
}

/// Statistical distance of a frequency vector from uniform.
pub fn sd_from_uniform(freqs: &[f64]) -> f64 {
    let u = 1.0 / freqs.len() as f64;
    0.5 * freqs.iter().map(|f| (f - u).abs()).sum::<f64>()
}

/// p-value of Pearson's test of `counts` against the uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return 1.0;
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    dist.sf(stat)
}

/// The same attack on real signatures from a fixed ring member. Each
/// repetition generates a fresh ring and message.
pub fn experiment_ours(pp: &ParamSet, config: &OursConfig, stream: &RandomStream) -> Result<Vec<OursRow>> {
    experiment_ours_with(pp, config, stream, |_| {})
}

/// [`experiment_ours`] with a callback after each repetition.
pub fn experiment_ours_with(
    pp: &ParamSet,
    config: &OursConfig,
    stream: &RandomStream,
    mut progress: impl FnMut(usize),
) -> Result<Vec<OursRow>> {
    let n = config.n_ring;
    if config.signer >= n {
        return Err(Error::InvalidParams(format!("signer {} outside a ring of {n}", config.signer)));
    }
    if n < 2 || n > pp.max_ring {
        return Err(Error::InvalidParams(format!("ring size {n} outside [2, {}]", pp.max_ring)));
    }
    let sweep = checked_sweep(&config.q_sweep)?;
    let sigma = pp.sigma_sign(n);
    let binning = Binning::gaussian(sigma)?;
    let reference = match config.reference {
        ReferenceMode::Analytic => Reference::Pmf(discrete_gaussian_pmf(&binning, sigma)),
        ReferenceMode::Pooled => Reference::Pooled,
    };
    let block = 2 * pp.m * pp.n;
    let mut named = vec![vec![0u64; n]; sweep.len()];
    for rep in 0..config.reps {
        let mut s = stream.fork_indexed("ours", rep as u64);
        let mut keys = Vec::with_capacity(n);
        for _ in 0..n {
            keys.push(keygen(pp, &mut s)?);
        }
        let ring = Ring::new(keys.iter().map(|k| k.0.clone()).collect())?;
        let msg: Vec<bool> = (0..pp.t).map(|_| s.bit()).collect();
        let ctx = MessageContext::new(pp, &ring, &msg)?;
        let sk = &keys[config.signer].1;
        let mut signer = PreparedSigner::new(pp, sk, config.signer, &ctx, &mut s)?;
        let mut acc = Accumulator::new(n, &binning);
        for (k, &q) in sweep.iter().enumerate() {
            while acc.q() < q {
                if config.fresh_delegation && acc.q() > 0 {
                    signer = PreparedSigner::new(pp, sk, config.signer, &ctx, &mut s)?;
                }
                let sig = signer.sign(&mut s)?;
                let slots: Vec<&[i64]> = sig.e.data().chunks(block).collect();
                acc.add(&slots)?;
            }
            named[k][acc.verdict(&reference)?.argmax] += 1;
        }
        progress(rep);
    }
    let reps = config.reps.max(1) as f64;
    Ok(sweep
        .iter()
        .zip(named)
        .map(|(&q, counts)| {
            let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / reps).collect();
            OursRow {
                q,
                reps: config.reps,
                n_ring: n,
                sd_from_uniform: sd_from_uniform(&freqs),
                chi_square_p: chi_square_uniform(&counts),
                freqs,
                counts,
            }
        })
        .collect())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `Q,reps,N,eps_bias,success_rate,advantage`
pub fn write_basic_csv<W: Write>(rows: &[BasicRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Q", "reps", "N", "eps_bias", "success_rate", "advantage"])
        .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.q.to_string(),
            r.reps.to_string(),
            r.n_ring.to_string(),
            r.eps_bias.to_string(),
            format!("{:.6}", r.success_rate),
            format!("{:.6}", r.advantage),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// `Q,reps,N,idx_0_freq,...,idx_{N-1}_freq,sd_from_uniform`
pub fn write_ours_csv<W: Write>(rows: &[OursRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = rows.first().map_or(0, |r| r.n_ring);
    let mut header = vec!["Q".to_string(), "reps".into(), "N".into()];
    header.extend((0..n).map(|i| format!("idx_{i}_freq")));
    header.push("sd_from_uniform".into());
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        let mut rec = vec![r.q.to_string(), r.reps.to_string(), r.n_ring.to_string()];
        rec.extend(r.freqs.iter().map(|f| format!("{f:.6}")));
        rec.push(format!("{:.6}", r.sd_from_uniform));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(counts: &[u64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_counts(Binning::exact(0, counts.len() as i64 - 1).unwrap(), counts.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let p = hist(&[5, 5]);
        assert_eq!(statistical_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(statistical_distance(&hist(&[3, 0]), &hist(&[0, 7])).unwrap(), 1.0);
        assert!((statistical_distance(&p, &hist(&[3, 1])).unwrap() - 0.25).abs() < 1e-12);
        assert!(statistical_distance(&p, &hist(&[1, 1, 1])).is_err());
    }

    #[test]
    fn single_sample_ties_to_lowest_index() {
        let scheme = BasicScheme::new(2, 8, 0.2).unwrap();
        let v = accumulate_and_identify(&[vec![3, -2]], &scheme.binning(), &Reference::Pmf(scheme.reference())).unwrap();
        assert_eq!(v.argmax, 0);
        assert!(v.tied);
        assert_eq!(v.q, 1);
    }

    #[test]
    fn binning_clamps() {
        let b = Binning::gaussian(10.0).unwrap();
        assert_eq!(b.index(-1_000_000), 0);
        assert_eq!(b.index(1_000_000), GAUSSIAN_BINS - 1);
        assert_eq!(b.index(0), GAUSSIAN_BINS / 2);
    }

    #[test]
    fn signer_pmf_has_configured_distance() {
        let s = BasicScheme::new(3, 8, 0.2).unwrap();
        let d: f64 = s.signer_pmf().iter().zip(s.reference()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!((d - 0.2).abs() < 1e-12);
        assert!(BasicScheme::new(2, 8, 0.6).is_err());
    }

    #[test]
    fn chi_square_extremes() {
        assert!(chi_square_uniform(&[500, 500]) > 0.99);
        assert!(chi_square_uniform(&[600, 400]) < 1e-9);
    }

    #[test]
    fn csv_headers() {
        let mut out = Vec::new();
        write_ours_csv(
            &[OursRow {
                q: 1,
                reps: 2,
                n_ring: 2,
                freqs: vec![0.5, 0.5],
                counts: vec![1, 1],
                sd_from_uniform: 0.0,
                chi_square_p: 1.0,
            }],
            &mut out,
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("Q,reps,N,idx_0_freq,idx_1_freq,sd_from_uniform\n"));
    }
}
