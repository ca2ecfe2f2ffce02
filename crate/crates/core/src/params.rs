//! Parameter sets and the parameter audit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyhom::PrfSpec;
use crate::ring::Modulus;
use crate::trapdoor::SIGMA_G;

/// Relative slack between the sampler width and the verification constant:
/// sigma_saml = SIGMA_SAML_MARGIN * sqrt(2n) * sampling width.
pub const SIGMA_SAML_MARGIN: f64 = 1.1;

/// Stands in for omega(sqrt(log n)) in the derived widths. The preimage
/// sampler needs sigma >= SIGMA_G s1(P), so this is SIGMA_G with a 4/3 margin
/// for the spread of s1 over evaluation points.
pub const SMOOTHING: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub name: String,
    pub n: usize,
    pub k: u32,
    pub q: u64,
    pub w: usize,
    pub m: usize,
    pub kappa: usize,
    pub t: usize,
    pub sigma_tg: f64,
    pub sigma_td: f64,
    /// Verification constant at ring size `saml_ref_ring`.
    pub sigma_saml: f64,
    pub saml_ref_ring: usize,
    pub beta: f64,
    /// beta / (m^{3/2} sigma_tg sigma_saml).
    pub beta_const: f64,
    pub delta: f64,
    pub max_ring: usize,
    pub prf: PrfSpec,
}

/// w = 2 ceil(log2 q) + 2.
pub fn trapdoor_width(modulus: Modulus) -> usize {
    2 * modulus.bits() as usize + 2
}

/// Root Hermite factor with beta / sqrt(q) = delta^{2n}.
pub fn root_hermite(beta: f64, q: u64, n: usize) -> f64 {
    (beta / (q as f64).sqrt()).powf(1.0 / (2.0 * n as f64))
}

impl ParamSet {
    /// The concrete set n = 512, k = 30, echoed verbatim.
    pub fn paper_table1() -> Self {
        let (n, k, w, m) = (512usize, 30u32, 98usize, 128usize);
        let q = 3u64.pow(k);
        let (sigma_tg, sigma_td, sigma_saml, beta) = (3.3, 55.1, 63740.1, 303_684_288.2);
        let kappa = 128;
        Self {
            name: "paper-table1".into(),
            n,
            k,
            q,
            w,
            m,
            kappa,
            t: 1,
            sigma_tg,
            sigma_td,
            sigma_saml,
            saml_ref_ring: 2,
            beta,
            beta_const: beta / ((m as f64).powf(1.5) * sigma_tg * sigma_saml),
            delta: 1.002985,
            max_ring: 2,
            prf: PrfSpec::toy(kappa, 1).expect("valid toy circuit"),
        }
    }

    /// Widths derived from the dimension, with SMOOTHING as the only
    /// constant, sized so that sampling is feasible for rings up to
    /// `max_ring` members.
    pub fn derived(name: &str, n: usize, k: u32, kappa: usize, t: usize, max_ring: usize) -> Result<Self> {
        let modulus = Modulus::new(k)?;
        let w = trapdoor_width(modulus);
        let m = w + k as usize;
        let sigma_tg = ((n * w) as f64).ln().sqrt();
        let sigma_td = sigma_tg * (((w * n) as f64).sqrt() + ((k as usize * n) as f64).sqrt()) * SMOOTHING;
        let saml_ref_ring = 2;
        let sigma_saml = SIGMA_SAML_MARGIN * ((2 * n) as f64).sqrt() * sampling_width(n, k as usize, m, sigma_td, saml_ref_ring);
        let beta_const = 1.0;
        let beta = beta_const * (m as f64).powf(1.5) * sigma_tg * sigma_saml;
        let q = modulus.q();
        let p = Self {
            name: name.into(),
            n,
            k,
            q,
            w,
            m,
            kappa,
            t,
            sigma_tg,
            sigma_td,
            sigma_saml,
            saml_ref_ring,
            beta,
            beta_const,
            delta: root_hermite(beta, q, n),
            max_ring,
            prf: PrfSpec::toy(kappa, t)?,
        };
        p.validate()?;
        Ok(p)
    }

    /// n = 64, k = 10: functional but far from secure.
    pub fn toy() -> Self {
        Self::derived("toy", 64, 10, 16, 1, 16).expect("toy parameters are valid")
    }

    /// The paper-table1 dimensions with widths derived as for the toy set.
    pub fn table1_dims() -> Self {
        Self::derived("table1-dims", 512, 30, 16, 1, 4).expect("valid parameters")
    }

    pub fn names() -> &'static [&'static str] {
        &["paper-table1", "toy", "table1-dims"]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper-table1" => Ok(Self::paper_table1()),
            "toy" => Ok(Self::toy()),
            "table1-dims" => Ok(Self::table1_dims()),
            other => Err(Error::InvalidParams(format!(
                "unknown parameter set '{other}' (expected one of: {})",
                Self::names().join(", ")
            ))),
        }
    }

    pub fn modulus(&self) -> Modulus {
        Modulus::new(self.k).expect("validated exponent")
    }

    /// Structural constraints. Gaussian floors are left to [`audit`] and to
    /// the samplers, which refuse to run below them.
    pub fn validate(&self) -> Result<()> {
        let modulus = Modulus::new(self.k)?;
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if modulus.q() != self.q {
            return bad(format!("q = {} is not 3^{}", self.q, self.k));
        }
        if !self.n.is_power_of_two() || self.n > 1 << crate::ring::ntt::MAX_LOG_N {
            return bad(format!("n = {} must be a power of two", self.n));
        }
        let w = trapdoor_width(modulus);
        if self.w != w {
            return bad(format!("w = {} but 2 ceil(log2 q) + 2 = {w}", self.w));
        }
        if self.m != self.w + self.k as usize {
            return bad(format!("m = {} but k + w = {}", self.m, self.w + self.k as usize));
        }
        if self.kappa < 2 || self.t == 0 {
            return bad("need kappa >= 2 and t >= 1".into());
        }
        if self.prf.key_len != self.kappa || self.prf.msg_len != self.t {
            return bad("PRF shape does not match (kappa, t)".into());
        }
        self.prf.circuit.validate()?;
        if self.max_ring < 2 || self.saml_ref_ring < 1 {
            return bad("max_ring must be at least 2".into());
        }
        for s in [self.sigma_tg, self.sigma_td, self.sigma_saml] {
            if !(s > 0.0 && s.is_finite()) {
                return bad("Gaussian widths must be positive".into());
            }
        }
        Ok(())
    }

    /// Verification constant for ring size N (grows as sqrt N).
    pub fn sigma_saml_for(&self, ring: usize) -> f64 {
        self.sigma_saml * (ring as f64 / self.saml_ref_ring as f64).sqrt()
    }

    /// Width used when sampling a signature for a ring of size N.
    pub fn sigma_sign(&self, ring: usize) -> f64 {
        self.sigma_saml_for(ring) / (SIGMA_SAML_MARGIN * ((2 * self.n) as f64).sqrt())
    }

    /// Verification bound on each block: sigma_saml(N) * sqrt(m).
    pub fn block_bound(&self, ring: usize) -> f64 {
        self.sigma_saml_for(ring) * (self.m as f64).sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParams(format!("bad parameter JSON: {e}")))
    }
}

/// sqrt(N) * sigma_td * SMOOTHING * (sqrt(2mn) + sqrt(kn)).
pub fn sampling_width(n: usize, k: usize, m: usize, sigma_td: f64, ring: usize) -> f64 {
    (ring as f64).sqrt() * sigma_td * SMOOTHING * (((2 * m * n) as f64).sqrt() + ((k * n) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditStatus {
    Pass,
    Flag,
}

/// What a rule protects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    /// Dimension and formula relations.
    Structural,
    /// Width floors the samplers and the verifier depend on.
    Floor,
    /// Hardness sanity; expected to fail for toy sets.
    Security,
    /// Readings of a formula that disagree; reported, not enforced.
    Discrepancy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRule {
    pub rule: String,
    pub kind: RuleKind,
    pub status: AuditStatus,
    pub detail: String,
}

fn rule(kind: RuleKind, name: &str, ok: bool, detail: String) -> AuditRule {
    AuditRule {
        rule: name.into(),
        kind,
        status: if ok { AuditStatus::Pass } else { AuditStatus::Flag },
        detail,
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Re-derives every relation from the raw fields and reports PASS/FLAG.
pub fn audit(p: &ParamSet) -> Vec<AuditRule> {
    let mut out = Vec::new();
    let modulus = match Modulus::new(p.k) {
        Ok(m) => m,
        Err(e) => {
            out.push(rule(RuleKind::Structural, "modulus", false, e.to_string()));
            return out;
        }
    };
    let n = p.n as f64;
    let (k, w, m) = (p.k as f64, p.w as f64, p.m as f64);
    out.push(rule(RuleKind::Structural, "q = 3^k", modulus.q() == p.q, format!("q = {}, 3^{} = {}", p.q, p.k, modulus.q())));
    let w_exp = trapdoor_width(modulus);
    out.push(rule(
        RuleKind::Structural,
        "w = 2 ceil(log2 q) + 2",
        p.w == w_exp,
        format!("w = {}, expected {w_exp}", p.w),
    ));
    out.push(rule(RuleKind::Structural, "m = k + w", p.m == p.w + p.k as usize, format!("m = {}, k + w = {}", p.m, p.w + p.k as usize)));
    out.push(rule(RuleKind::Structural, "n power of two", p.n.is_power_of_two(), format!("n = {}", p.n)));

    let tg_floor = (n * w).ln().sqrt();
    out.push(rule(
        RuleKind::Floor,
        "sigma_tg >= sqrt(ln(n w))",
        p.sigma_tg >= tg_floor,
        format!("sigma_tg = {}, floor {tg_floor:.4}", p.sigma_tg),
    ));

    // Floors in the coefficient embedding, as enforced by the samplers.
    let s1_t = p.sigma_tg * ((w * n).sqrt() + (k * n).sqrt());
    let td_floor = s1_t * n.log2().sqrt();
    out.push(rule(
        RuleKind::Floor,
        "sigma_td >= s1(T) sqrt(log2 n)",
        p.sigma_td >= td_floor * (1.0 - 1e-12),
        format!("sigma_td = {}, floor {td_floor:.1} (s1(T) ~ {s1_t:.1})", p.sigma_td),
    ));
    let td_exact = SIGMA_G * s1_t;
    out.push(rule(
        RuleKind::Floor,
        "sigma_td >= SIGMA_G s1(T) (perturbation covariance PSD)",
        p.sigma_td >= td_exact,
        format!("sigma_td = {}, needs about {td_exact:.1}", p.sigma_td),
    ));
    let ring = p.saml_ref_ring.max(2);
    let width = (2 * ring * p.m) as f64;
    let s1_del = p.sigma_td * (((width - k) * n).sqrt() + (k * n).sqrt());
    let sign_floor = s1_del * n.log2().sqrt();
    let sigma_sign = p.sigma_sign(ring);
    let sign_exact = SIGMA_G * s1_del;
    out.push(rule(
        RuleKind::Floor,
        "sampling width >= SIGMA_G s1(T') (perturbation covariance PSD)",
        sigma_sign >= sign_exact,
        format!("N = {ring}: sampling width {sigma_sign:.1}, needs about {sign_exact:.1}"),
    ));
    out.push(rule(
        RuleKind::Floor,
        "sampling width >= s1(T') sqrt(log2 n)",
        sigma_sign >= sign_floor * (1.0 - 1e-12),
        format!(
            "N = {ring}: sampling width {sigma_sign:.1} (= sigma_saml / (1.1 sqrt(2n))), floor {sign_floor:.1}"
        ),
    ));

    let beta_tg = p.beta_const * m.powf(1.5) * p.sigma_tg * p.sigma_saml;
    let beta_td = p.beta_const * m.powf(1.5) * p.sigma_td * p.sigma_saml;
    out.push(rule(
        RuleKind::Structural,
        "beta = c m^1.5 sigma_tg sigma_saml",
        close(beta_tg, p.beta, 1e-9),
        format!("configured {}, re-derived {beta_tg:.1} (c = {:.6})", p.beta, p.beta_const),
    ));
    out.push(rule(
        RuleKind::Discrepancy,
        "beta variant c m^1.5 sigma_td sigma_saml",
        close(beta_td, p.beta, 1e-9),
        format!("sigma_td variant gives {beta_td:.1} vs configured {}", p.beta),
    ));
    out.push(rule(
        RuleKind::Security,
        "RingSIS bound beta < q",
        p.beta < p.q as f64,
        format!("beta = {:.1}, q = {}", p.beta, p.q),
    ));
    let delta = root_hermite(p.beta, p.q, p.n);
    out.push(rule(
        RuleKind::Structural,
        "delta^(2n) = beta / sqrt(q)",
        close(delta, p.delta, 1e-6),
        format!("configured {}, re-derived {delta:.6}", p.delta),
    ));

    // The verifier checks sigma_saml sqrt(m) on blocks of 2m entries, each
    // with n coefficients of width sampling_width.
    let expected_norm = sigma_sign * (2.0 * m * n).sqrt();
    let bound = p.block_bound(ring);
    out.push(rule(
        RuleKind::Floor,
        "block norm sqrt(2m n) sigma fits sigma_saml sqrt(m)",
        expected_norm * 1.05 <= bound,
        format!("expected honest block norm {expected_norm:.1}, bound {bound:.1}"),
    ));
    out.push(rule(
        RuleKind::Discrepancy,
        "sigma_saml read as sampler width fits sqrt(m) bound",
        p.sigma_saml * (2.0 * m * n).sqrt() <= bound,
        format!(
            "sigma_saml sqrt(2mn) = {:.1} vs sigma_saml sqrt(m) = {bound:.1}",
            p.sigma_saml * (2.0 * m * n).sqrt()
        ),
    ));
    let depth = p.prf.circuit.depth();
    out.push(rule(
        RuleKind::Structural,
        "PRF circuit depth <= 8",
        depth <= 8,
        format!("depth {depth}{}", if p.prf.toy { " (toy circuit, NOT cryptographic)" } else { "" }),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_echo() {
        let p = ParamSet::paper_table1();
        assert_eq!((p.n, p.k, p.w, p.m, p.q), (512, 30, 98, 128, 3u64.pow(30)));
        assert_eq!((p.sigma_tg, p.sigma_td, p.sigma_saml, p.beta), (3.3, 55.1, 63740.1, 303_684_288.2));
        p.validate().unwrap();
    }

    #[test]
    fn toy_dimensions() {
        let p = ParamSet::toy();
        assert_eq!((p.n, p.k, p.q, p.w, p.m), (64, 10, 59049, 34, 44));
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(ParamSet::by_name("nope").is_err());
        assert!(ParamSet::derived("x", 64, 0, 16, 1, 4).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = ParamSet::toy();
        assert_eq!(ParamSet::from_json(&p.to_json()).unwrap(), p);
    }
}
