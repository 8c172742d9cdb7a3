//! The selection probability `π = Pr{D=1} = E_Y[G(Y)]` and its first and
//! second partial derivatives in `(μ, τ, ψ)`.
//!
//! Four evaluation routes share one accumulator:
//! * binary responses sum over `{0, 1}`;
//! * count responses use a truncated series;
//! * the `expn-mgf` mechanism has the closed form `1 − e^{−e^τ} M(−α/μ)`;
//! * Normal responses are integrated by adaptive quadrature over `μ ± 10σ`.
//!
//! Derivatives are analytic throughout. For a support point `y` with weight
//! `p(y; μ, ψ)` the μ- and ψ-derivatives of `p` enter through the relative
//! sensitivities of the density, the μ- and τ-derivatives of `G` through the
//! chain rule in `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{DensitySensitivity, FamilyKind, ResponseFamily};
use crate::mechanism::{GEval, HKind, SelectionMechanism};
use crate::quadrature;

/// Tail mass above which a truncated count series is flagged.
pub const TAIL_WARNING: f64 = 1e-10;
/// Auto truncation extends the series until the neglected mass is below this.
const AUTO_TAIL_TARGET: f64 = 1e-15;
const MAX_AUTO_K: u64 = 1 << 20;
const QUAD_TOL: f64 = 1e-10;
const QUAD_HALF_WIDTH_SD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Truncation {
    /// Per observation `K = max(max yᵢ, ⌈μ + 10·sd + 20⌉)`, doubled while the
    /// neglected mass exceeds 1e-15.
    #[default]
    Auto,
    Fixed(u64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiResult {
    pub pi: f64,
    /// `1 − π`, accumulated directly to keep precision when `π ≈ 1`.
    pub pi_complement: f64,
    pub dpi_dmu: f64,
    pub dpi_dtau: f64,
    pub dpi_dpsi: f64,
    pub d2pi_dmu2: f64,
    pub d2pi_dtau2: f64,
    pub d2pi_dmudtau: f64,
    pub d2pi_dpsidmu: f64,
    pub d2pi_dpsidtau: f64,
    pub d2pi_dpsi2: f64,
    pub truncation_k: Option<u64>,
    /// Probability mass beyond the truncation point.
    pub tail_mass: Option<f64>,
}

impl PiResult {
    pub fn tail_warning(&self) -> bool {
        self.tail_mass.is_some_and(|t| t > TAIL_WARNING)
    }

    fn add(&mut self, p: f64, s: &DensitySensitivity, g: &GEval) {
        self.pi += p * g.g;
        self.pi_complement += p * g.gc;
        self.dpi_dmu += p * (s.mu * g.g + g.mu);
        self.dpi_dtau += p * g.tau;
        self.dpi_dpsi += p * s.psi * g.g;
        self.d2pi_dmu2 += p * (s.mumu * g.g + 2.0 * s.mu * g.mu + g.mumu);
        self.d2pi_dtau2 += p * g.tautau;
        self.d2pi_dmudtau += p * (s.mu * g.tau + g.mutau);
        self.d2pi_dpsidmu += p * (s.mupsi * g.g + s.psi * g.mu);
        self.d2pi_dpsidtau += p * s.psi * g.tau;
        self.d2pi_dpsi2 += p * s.psipsi * g.g;
    }

    fn to_array(self) -> [f64; 11] {
        [
            self.pi,
            self.pi_complement,
            self.dpi_dmu,
            self.dpi_dtau,
            self.dpi_dpsi,
            self.d2pi_dmu2,
            self.d2pi_dtau2,
            self.d2pi_dmudtau,
            self.d2pi_dpsidmu,
            self.d2pi_dpsidtau,
            self.d2pi_dpsi2,
        ]
    }

    fn from_array(a: [f64; 11]) -> Self {
        PiResult {
            pi: a[0],
            pi_complement: a[1],
            dpi_dmu: a[2],
            dpi_dtau: a[3],
            dpi_dpsi: a[4],
            d2pi_dmu2: a[5],
            d2pi_dtau2: a[6],
            d2pi_dmudtau: a[7],
            d2pi_dpsidmu: a[8],
            d2pi_dpsidtau: a[9],
            d2pi_dpsi2: a[10],
            truncation_k: None,
            tail_mass: None,
        }
    }
}

/// `π = (1−μ)G(0) + μG(1)` for a binary response.
pub fn pi_binary(mech: &SelectionMechanism, mu: f64, tau: f64) -> Result<PiResult> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("binary π needs μ in (0,1), got {mu}")));
    }
    let mut out = PiResult::default();
    for (y, p, s) in [(0.0, 1.0 - mu, -1.0 / (1.0 - mu)), (1.0, mu, 1.0 / mu)] {
        let g = mech.g_eval(y, tau, mu)?;
        out.add(p, &DensitySensitivity { mu: s, ..Default::default() }, &g);
    }
    Ok(out)
}

/// Truncation point used by [`Truncation::Auto`].
pub fn default_truncation(family: &ResponseFamily, mu: f64, psi: f64, y_max: f64) -> u64 {
    let sd = family.variance(mu, psi).sqrt();
    let k = (mu + 10.0 * sd + 20.0).ceil();
    k.max(y_max.max(0.0)) as u64
}

/// Series `Σ_{k=0}^{K} p_k(μ) G(k)` for Poisson and negative binomial responses.
pub fn pi_count(mech: &SelectionMechanism, family: &ResponseFamily, mu: f64, tau: f64, k_max: u64) -> Result<PiResult> {
    if !matches!(family.kind(), FamilyKind::Poisson | FamilyKind::NegativeBinomial) {
        return Err(Error::model(format!("series π needs a count family, got {}", family.key())));
    }
    if k_max < 1 {
        return Err(Error::domain("truncation point must be at least 1"));
    }
    family.check_mean(mu)?;
    let mut out = PiResult::default();
    let mut lp = family.log_pf(0.0, mu, 1.0)?;
    for k in 0..=k_max {
        let y = k as f64;
        if k > 0 {
            lp += family.log_pmf_ratio(y, mu);
        }
        let p = lp.exp();
        if p == 0.0 && y > mu {
            break;
        }
        let g = mech.g_eval(y, tau, mu)?;
        out.add(p, &family.density_sensitivity(y, mu, 1.0), &g);
    }
    out.truncation_k = Some(k_max);
    out.tail_mass = Some(count_tail(family, mu, k_max, lp));
    Ok(out)
}

/// Mass above `k_max`, continuing the pmf recursion from `log p(k_max)`.
fn count_tail(family: &ResponseFamily, mu: f64, k_max: u64, mut lp: f64) -> f64 {
    let mut tail = 0.0;
    let mut k = k_max as f64;
    for _ in 0..100_000 {
        k += 1.0;
        lp += family.log_pmf_ratio(k, mu);
        let p = lp.exp();
        tail += p;
        if k > mu && (p <= tail * 1e-17 || p == 0.0) {
            break;
        }
    }
    tail
}

/// Closed form for the `expn-mgf` mechanism: `π = 1 − e^{−e^τ} M(−α/μ)`.
pub fn pi_mgf(mech: &SelectionMechanism, family: &ResponseFamily, mu: f64, tau: f64) -> Result<PiResult> {
    if mech.kind.h != HKind::MgfLinear {
        return Err(Error::model("closed-form π needs the 'expn-mgf' mechanism"));
    }
    let alpha = mech.alpha;
    if alpha < 0.0 {
        return Err(Error::domain(format!("'expn-mgf' needs α ≥ 0, got {alpha}")));
    }
    family.check_mean(mu)?;
    let lam = tau.exp();

    // v = μ(e^t − 1) at t = −α/μ, with μ-derivatives
    let t = -alpha / mu;
    let t1 = alpha / (mu * mu);
    let t2 = -2.0 * alpha / (mu * mu * mu);
    let et = t.exp();
    let v = mu * t.exp_m1();
    let v1 = t.exp_m1() + mu * et * t1;
    let v2 = 2.0 * et * t1 + mu * et * (t1 * t1 + t2);

    // m = log M(t(μ); μ)
    let (m, m1, m2) = match family.kind() {
        FamilyKind::Poisson => (v, v1, v2),
        FamilyKind::Bernoulli => {
            let q = 1.0 + v;
            (v.ln_1p(), v1 / q, v2 / q - (v1 / q).powi(2))
        }
        FamilyKind::NegativeBinomial => {
            let k = family.kappa().expect("negative binomial carries κ");
            let r = k - v;
            if r <= 0.0 {
                return Err(Error::domain("negative binomial MGF diverges at −η"));
            }
            (-k * (-v / k).ln_1p(), k * v1 / r, k * v2 / r + k * v1 * v1 / (r * r))
        }
        FamilyKind::Normal => {
            return Err(Error::model("'expn-mgf' needs a non-negative response"));
        }
    };
    let log_q = -lam + m;
    let q = log_q.exp();
    let mut out = PiResult {
        pi: -log_q.exp_m1(),
        pi_complement: q,
        dpi_dmu: -q * m1,
        dpi_dtau: lam * q,
        d2pi_dmu2: -q * (m2 + m1 * m1),
        d2pi_dtau2: -q * (lam * lam - lam),
        d2pi_dmudtau: lam * q * m1,
        ..Default::default()
    };
    if !out.pi.is_finite() {
        out.pi = f64::NAN;
    }
    Ok(out)
}

/// `∫ f(y) G(y) dy` for a Normal response by adaptive quadrature over `μ ± 10σ`.
pub fn pi_normal(mech: &SelectionMechanism, family: &ResponseFamily, mu: f64, psi: f64, tau: f64) -> Result<PiResult> {
    if family.kind() != FamilyKind::Normal {
        return Err(Error::model("quadrature π is implemented for the Normal family"));
    }
    if !(psi > 0.0) {
        return Err(Error::domain(format!("dispersion must be positive, got {psi}")));
    }
    if mech.kind.h.uses_mean() {
        return Err(Error::model(format!("mechanism '{}' needs μ > 0", mech.kind.key())));
    }
    let sd = psi.sqrt();
    let mut failure = None;
    let values = quadrature::integrate(
        |y| {
            let lf = family.log_pf(y, mu, psi).unwrap_or(f64::NEG_INFINITY);
            let mut acc = PiResult::default();
            match mech.g_eval(y, tau, mu) {
                Ok(g) => acc.add(lf.exp(), &family.density_sensitivity(y, mu, psi), &g),
                Err(e) => failure = Some(e),
            }
            acc.to_array()
        },
        mu - QUAD_HALF_WIDTH_SD * sd,
        mu + QUAD_HALF_WIDTH_SD * sd,
        QUAD_TOL,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PiResult::from_array(values))
}

/// With α = 0, `G` does not depend on `y` and `π = G0{h(τ)}`.
fn pi_independent(mech: &SelectionMechanism, family: &ResponseFamily, mu: f64, tau: f64) -> Result<PiResult> {
    family.check_mean(mu)?;
    let g = mech.g_eval(0.0, tau, mu)?;
    Ok(PiResult {
        pi: g.g,
        pi_complement: g.gc,
        dpi_dtau: g.tau,
        d2pi_dtau2: g.tautau,
        ..Default::default()
    })
}

/// Picks the evaluation route for a family/mechanism pair.
pub fn selection_probability(
    family: &ResponseFamily,
    mech: &SelectionMechanism,
    mu: f64,
    psi: f64,
    tau: f64,
    truncation: Truncation,
    y_max: f64,
) -> Result<PiResult> {
    if mech.alpha == 0.0 {
        return pi_independent(mech, family, mu, tau);
    }
    if mech.kind.h == HKind::MgfLinear {
        return pi_mgf(mech, family, mu, tau);
    }
    match family.kind() {
        FamilyKind::Bernoulli => pi_binary(mech, mu, tau),
        FamilyKind::Poisson | FamilyKind::NegativeBinomial => {
            match truncation {
                Truncation::Fixed(k) => pi_count(mech, family, mu, tau, k),
                Truncation::Auto => {
                    // heavy negative binomial tails can outlast the default point
                    let mut k = default_truncation(family, mu, psi, y_max);
                    loop {
                        let r = pi_count(mech, family, mu, tau, k)?;
                        if r.tail_mass.is_none_or(|t| t <= AUTO_TAIL_TARGET) || k >= MAX_AUTO_K {
                            return Ok(r);
                        }
                        k = (2 * k).min(MAX_AUTO_K);
                    }
                }
            }
        }
        FamilyKind::Normal => pi_normal(mech, family, mu, psi, tau),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;

    fn mech(key: &str, alpha: f64) -> SelectionMechanism {
        SelectionMechanism::from_key(key, alpha).unwrap()
    }

    #[test]
    fn binary_examples() {
        let r = pi_binary(&mech("probit-linear", 0.0), 0.3, 0.0).unwrap();
        assert_eq!(r.pi, 0.5);
        assert_eq!(r.dpi_dmu, 0.0);
        let r = pi_binary(&mech("probit-linear", 1.0), 0.5, 0.0).unwrap();
        assert!((r.pi - (0.25 + 0.5 * norm_cdf(1.0))).abs() < 1e-15);
        assert!((r.pi - 0.670_672_373_034_271_5).abs() < 1e-14);
        assert_eq!(r.dpi_dpsi, 0.0);
        assert_eq!(r.d2pi_dpsi2, 0.0);
        assert!(pi_binary(&mech("probit-linear", 1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn count_independence_case() {
        let pois = ResponseFamily::poisson();
        let r = pi_count(&mech("probit-linear", 0.0), &pois, 2.0, 0.3, 60).unwrap();
        assert!((r.pi - norm_cdf(0.3)).abs() < 1e-15);
        assert!(r.tail_mass.unwrap() < 1e-30);
        assert!(!r.tail_warning());
        assert_eq!(r.truncation_k, Some(60));
    }

    #[test]
    fn count_tail_warning_for_short_series() {
        let pois = ResponseFamily::poisson();
        let r = pi_count(&mech("probit-linear", 0.5), &pois, 5.0, 0.0, 5).unwrap();
        assert!(r.tail_warning());
        let t = r.tail_mass.unwrap();
        // P(Y > 5) for μ = 5
        assert!((t - 0.384_039_345_166_937_8).abs() < 1e-12, "{t}");
    }

    #[test]
    fn mgf_examples() {
        let pois = ResponseFamily::poisson();
        let r = pi_mgf(&mech("expn-mgf", 0.0), &pois, 3.0, 0.0).unwrap();
        assert!((r.pi - (1.0 - (-1f64).exp())).abs() < 1e-15);
        // μ = 1, η = 1: 1 − exp[−1 + (e^{−1} − 1)]
        let r = pi_mgf(&mech("expn-mgf", 1.0), &pois, 1.0, 0.0).unwrap();
        let expect = 1.0 - (-1.0 + ((-1f64).exp() - 1.0)).exp();
        assert!((r.pi - expect).abs() < 1e-15);
        assert!((r.pi - 0.804_485_465_847_411_9).abs() < 1e-14);
        assert!(pi_mgf(&mech("probit-linear", 1.0), &pois, 1.0, 0.0).is_err());
    }

    #[test]
    fn normal_examples() {
        let fam = ResponseFamily::normal();
        let r = pi_normal(&mech("probit-linear", 0.0), &fam, 1.5, 2.0, 0.4).unwrap();
        assert!((r.pi - norm_cdf(0.4)).abs() < 1e-10);
        // symmetric case: τ = 0, h odd around μ → π = 1/2
        let sigma = 1.7f64;
        let alpha = 0.9;
        let m = mech("probit-linear", alpha / sigma);
        let mu = 0.8;
        let r = pi_normal(&m, &fam, mu, sigma * sigma, -alpha * mu / sigma).unwrap();
        assert!((r.pi - 0.5).abs() < 1e-10);
        assert!((r.pi + r.pi_complement - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dispatcher_routes() {
        let pois = ResponseFamily::poisson();
        let m = mech("expn-mgf", 0.7);
        let a = selection_probability(&pois, &m, 1.2, 1.0, 0.1, Truncation::Auto, 0.0).unwrap();
        assert!(a.truncation_k.is_none());
        let m = mech("probit-std", 0.7);
        let a = selection_probability(&pois, &m, 1.2, 1.0, 0.1, Truncation::Auto, 50.0).unwrap();
        assert_eq!(a.truncation_k, Some(50));
        let a = selection_probability(&pois, &m, 1.2, 1.0, 0.1, Truncation::Fixed(80), 50.0).unwrap();
        assert_eq!(a.truncation_k, Some(80));
    }
}
