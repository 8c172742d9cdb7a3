//! Exponential-family response distributions.
//!
//! Every family is written as
//!
//! ```text
//! f(y; ϑ, ψ) = exp{ (yϑ − b(ϑ)) / a(ψ) + d(y, ψ) }
//! ```
//!
//! with the mean `μ = b'(ϑ)` tied to the covariates through a link `g(μ) = xᵀβ`.
//! Bernoulli and Poisson have `a(ψ) = 1`; the negative binomial uses the NB2
//! form with a fixed size `κ`; the Normal family carries `a(ψ) = ψ = σ²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{self, LN_SQRT_2PI};

/// Lower clamp applied to means computed from a linear predictor.
pub const MU_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    Bernoulli,
    Poisson,
    NegativeBinomial,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Logit,
    Probit,
    Log,
    Identity,
    /// Complementary log-log; used for binary models with an exponential latent threshold.
    Cloglog,
}

/// `(g(μ), g'(μ), g''(μ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDerivs {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
}

/// `(b(ϑ), b'(ϑ), b''(ϑ), b'''(ϑ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BDerivs {
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// `(a(ψ), a'(ψ), a''(ψ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Carrier `d(y, ψ)` with its first two ψ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub d: f64,
    pub d_psi: f64,
    pub d_psipsi: f64,
}

/// Relative derivatives of the density at a fixed point `y`:
/// `∂f/∂μ / f`, `∂²f/∂μ² / f`, and the ψ analogues.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DensitySensitivity {
    pub mu: f64,
    pub mumu: f64,
    pub psi: f64,
    pub psipsi: f64,
    pub mupsi: f64,
}

/// Mean link composed with its first two derivatives in the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMap {
    pub mu: f64,
    /// dμ/dη = 1 / g'(μ)
    pub dmu: f64,
    /// d²μ/dη² = −g''(μ) / g'(μ)³
    pub d2mu: f64,
    pub link: LinkDerivs,
}

impl Link {
    pub fn key(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Log => "log",
            Link::Identity => "identity",
            Link::Cloglog => "cloglog",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        Ok(match key.trim().to_ascii_lowercase().as_str() {
            "logit" => Link::Logit,
            "probit" => Link::Probit,
            "log" => Link::Log,
            "identity" => Link::Identity,
            "cloglog" => Link::Cloglog,
            other => return Err(Error::model(format!("unknown link '{other}'"))),
        })
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => special::norm_cdf(eta),
            Link::Log => eta.exp(),
            Link::Identity => eta,
            Link::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    pub fn derivs(self, mu: f64) -> Result<LinkDerivs> {
        let unit = || {
            if mu > 0.0 && mu < 1.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{} link needs μ in (0,1), got {mu}", self.key())))
            }
        };
        Ok(match self {
            Link::Logit => {
                unit()?;
                let v = mu * (1.0 - mu);
                LinkDerivs {
                    g: (mu / (1.0 - mu)).ln(),
                    g1: 1.0 / v,
                    g2: (2.0 * mu - 1.0) / (v * v),
                }
            }
            Link::Probit => {
                unit()?;
                let z = special::norm_quantile(mu);
                let phi = special::norm_pdf(z);
                LinkDerivs {
                    g: z,
                    g1: 1.0 / phi,
                    g2: z / (phi * phi),
                }
            }
            Link::Log => {
                if mu <= 0.0 {
                    return Err(Error::domain(format!("log link needs μ > 0, got {mu}")));
                }
                LinkDerivs {
                    g: mu.ln(),
                    g1: 1.0 / mu,
                    g2: -1.0 / (mu * mu),
                }
            }
            Link::Identity => LinkDerivs { g: mu, g1: 1.0, g2: 0.0 },
            Link::Cloglog => {
                unit()?;
                let l = -(-mu).ln_1p();
                let s = (1.0 - mu) * l;
                LinkDerivs {
                    g: l.ln(),
                    g1: 1.0 / s,
                    g2: (l - 1.0) / (s * s),
                }
            }
        })
    }
}

/// A response distribution: family kind, mean link and (for the negative
/// binomial) the fixed size parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseFamily {
    kind: FamilyKind,
    link: Link,
    kappa: Option<f64>,
}

impl ResponseFamily {
    pub fn new(kind: FamilyKind, link: Link, kappa: Option<f64>) -> Result<Self> {
        let ok = match kind {
            FamilyKind::Bernoulli => matches!(link, Link::Logit | Link::Probit | Link::Cloglog),
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => link == Link::Log,
            FamilyKind::Normal => link == Link::Identity,
        };
        if !ok {
            return Err(Error::model(format!("link '{}' not supported for {kind:?}", link.key())));
        }
        let kappa = match kind {
            FamilyKind::NegativeBinomial => match kappa {
                Some(k) if k > 0.0 && k.is_finite() => Some(k),
                _ => return Err(Error::model("negative binomial needs a positive size κ")),
            },
            _ => None,
        };
        Ok(Self { kind, link, kappa })
    }

    pub fn bernoulli(link: Link) -> Result<Self> {
        Self::new(FamilyKind::Bernoulli, link, None)
    }

    pub fn poisson() -> Self {
        Self { kind: FamilyKind::Poisson, link: Link::Log, kappa: None }
    }

    pub fn negative_binomial(kappa: f64) -> Result<Self> {
        Self::new(FamilyKind::NegativeBinomial, Link::Log, Some(kappa))
    }

    pub fn normal() -> Self {
        Self { kind: FamilyKind::Normal, link: Link::Identity, kappa: None }
    }

    pub fn from_keys(family: &str, link: Option<&str>, kappa: Option<f64>) -> Result<Self> {
        let kind = match family.trim().to_ascii_lowercase().as_str() {
            "bernoulli" | "binary" | "binomial" => FamilyKind::Bernoulli,
            "poisson" => FamilyKind::Poisson,
            "negbin" | "negative-binomial" | "negative_binomial" | "nb" => FamilyKind::NegativeBinomial,
            "normal" | "gaussian" => FamilyKind::Normal,
            other => return Err(Error::model(format!("unknown family '{other}'"))),
        };
        let link = match link {
            Some(l) => Link::from_key(l)?,
            None => match kind {
                FamilyKind::Bernoulli => Link::Logit,
                FamilyKind::Poisson | FamilyKind::NegativeBinomial => Link::Log,
                FamilyKind::Normal => Link::Identity,
            },
        };
        Self::new(kind, link, kappa)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn key(&self) -> &'static str {
        match self.kind {
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Poisson => "poisson",
            FamilyKind::NegativeBinomial => "negbin",
            FamilyKind::Normal => "normal",
        }
    }

    /// True unless the family carries a free dispersion parameter ψ.
    pub fn dispersion_known(&self) -> bool {
        self.kind != FamilyKind::Normal
    }

    /// Support is a subset of the non-negative reals.
    pub fn nonnegative_support(&self) -> bool {
        self.kind != FamilyKind::Normal
    }

    pub fn is_discrete(&self) -> bool {
        self.kind != FamilyKind::Normal
    }

    fn size(&self) -> f64 {
        self.kappa.unwrap_or(f64::INFINITY)
    }

    pub fn check_mean(&self, mu: f64) -> Result<()> {
        let ok = match self.kind {
            FamilyKind::Bernoulli => mu > 0.0 && mu < 1.0,
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => mu > 0.0 && mu.is_finite(),
            FamilyKind::Normal => mu.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("mean {mu} outside the {} mean domain", self.key())))
        }
    }

    pub fn check_support(&self, y: f64) -> Result<()> {
        let ok = match self.kind {
            FamilyKind::Bernoulli => y == 0.0 || y == 1.0,
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
            FamilyKind::Normal => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Support(format!("{y} is not in the {} support", self.key())))
        }
    }

    /// Clamps a mean produced by the link into the interior of the mean domain.
    pub fn clamp_mean(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => mu.clamp(MU_EPS, 1.0 - MU_EPS),
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => mu.max(MU_EPS),
            FamilyKind::Normal => mu,
        }
    }

    /// Mean and its η-derivatives for a linear predictor value.
    pub fn mean_map(&self, eta: f64) -> Result<MeanMap> {
        let mu = self.clamp_mean(self.link.inverse(eta));
        let link = self.link.derivs(mu)?;
        let dmu = 1.0 / link.g1;
        Ok(MeanMap {
            mu,
            dmu,
            d2mu: -link.g2 * dmu * dmu * dmu,
            link,
        })
    }

    /// Canonical parameter ϑ with `b'(ϑ) = μ`.
    pub fn theta_of_mu(&self, mu: f64) -> Result<f64> {
        self.check_mean(mu)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => (mu / (1.0 - mu)).ln(),
            FamilyKind::Poisson => mu.ln(),
            FamilyKind::NegativeBinomial => (mu / (mu + self.size())).ln(),
            FamilyKind::Normal => mu,
        })
    }

    pub fn b_derivs(&self, theta: f64) -> Result<BDerivs> {
        if !theta.is_finite() {
            return Err(Error::domain(format!("canonical parameter {theta} is not finite")));
        }
        Ok(match self.kind {
            FamilyKind::Bernoulli => {
                let mu = 1.0 / (1.0 + (-theta).exp());
                let v = mu * (1.0 - mu);
                BDerivs {
                    b: theta.max(0.0) + (-theta.abs()).exp().ln_1p(),
                    b1: mu,
                    b2: v,
                    b3: v * (1.0 - 2.0 * mu),
                }
            }
            FamilyKind::Poisson => {
                let mu = theta.exp();
                BDerivs { b: mu, b1: mu, b2: mu, b3: mu }
            }
            FamilyKind::NegativeBinomial => {
                if theta >= 0.0 {
                    return Err(Error::domain("negative binomial needs ϑ < 0"));
                }
                let k = self.size();
                let mu = k / (-theta).exp_m1();
                let v = mu * (1.0 + mu / k);
                BDerivs {
                    b: -k * (-theta.exp_m1()).ln(),
                    b1: mu,
                    b2: v,
                    b3: v * (1.0 + 2.0 * mu / k),
                }
            }
            FamilyKind::Normal => BDerivs { b: 0.5 * theta * theta, b1: theta, b2: 1.0, b3: 0.0 },
        })
    }

    pub fn dispersion(&self, psi: f64) -> Dispersion {
        match self.kind {
            FamilyKind::Normal => Dispersion { a: psi, a1: 1.0, a2: 0.0 },
            _ => Dispersion { a: 1.0, a1: 0.0, a2: 0.0 },
        }
    }

    /// Variance `a(ψ) b''(ϑ)` written in terms of the mean.
    pub fn variance(&self, mu: f64, psi: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => mu * (1.0 - mu),
            FamilyKind::Poisson => mu,
            FamilyKind::NegativeBinomial => mu * (1.0 + mu / self.size()),
            FamilyKind::Normal => psi,
        }
    }

    pub fn carrier(&self, y: f64, psi: f64) -> Carrier {
        match self.kind {
            FamilyKind::Bernoulli => Carrier { d: 0.0, d_psi: 0.0, d_psipsi: 0.0 },
            FamilyKind::Poisson => Carrier { d: -special::ln_gamma(y + 1.0), d_psi: 0.0, d_psipsi: 0.0 },
            FamilyKind::NegativeBinomial => {
                let k = self.size();
                Carrier {
                    d: special::ln_gamma(y + k) - special::ln_gamma(k) - special::ln_gamma(y + 1.0),
                    d_psi: 0.0,
                    d_psipsi: 0.0,
                }
            }
            FamilyKind::Normal => Carrier {
                d: -y * y / (2.0 * psi) - LN_SQRT_2PI - 0.5 * psi.ln(),
                d_psi: y * y / (2.0 * psi * psi) - 0.5 / psi,
                d_psipsi: -y * y / (psi * psi * psi) + 0.5 / (psi * psi),
            },
        }
    }

    /// Log density (or log probability) at `y`.
    pub fn log_pf(&self, y: f64, mu: f64, psi: f64) -> Result<f64> {
        self.check_support(y)?;
        self.check_mean(mu)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => {
                if y == 1.0 {
                    mu.ln()
                } else {
                    (-mu).ln_1p()
                }
            }
            FamilyKind::Poisson => {
                let head = if y == 0.0 { 0.0 } else { y * mu.ln() };
                head - mu - special::ln_gamma(y + 1.0)
            }
            FamilyKind::NegativeBinomial => {
                let k = self.size();
                let head = if y == 0.0 { 0.0 } else { y * (mu / (mu + k)).ln() };
                special::ln_gamma(y + k) - special::ln_gamma(k) - special::ln_gamma(y + 1.0)
                    + head
                    + k * (k / (mu + k)).ln()
            }
            FamilyKind::Normal => {
                if psi <= 0.0 {
                    return Err(Error::domain(format!("dispersion must be positive, got {psi}")));
                }
                let r = y - mu;
                -r * r / (2.0 * psi) - LN_SQRT_2PI - 0.5 * psi.ln()
            }
        })
    }

    /// Relative μ- and ψ-derivatives of the density at `y`.
    pub fn density_sensitivity(&self, y: f64, mu: f64, psi: f64) -> DensitySensitivity {
        match self.kind {
            FamilyKind::Bernoulli => {
                if y == 1.0 {
                    DensitySensitivity { mu: 1.0 / mu, ..Default::default() }
                } else {
                    DensitySensitivity { mu: -1.0 / (1.0 - mu), ..Default::default() }
                }
            }
            FamilyKind::Poisson => {
                let s = y / mu - 1.0;
                DensitySensitivity { mu: s, mumu: s * s - y / (mu * mu), ..Default::default() }
            }
            FamilyKind::NegativeBinomial => {
                let k = self.size();
                let s = y / mu - (y + k) / (mu + k);
                let ds = -y / (mu * mu) + (y + k) / ((mu + k) * (mu + k));
                DensitySensitivity { mu: s, mumu: s * s + ds, ..Default::default() }
            }
            FamilyKind::Normal => {
                let r = y - mu;
                let s_mu = r / psi;
                let s_psi = r * r / (2.0 * psi * psi) - 0.5 / psi;
                let ds_psi = -r * r / (psi * psi * psi) + 0.5 / (psi * psi);
                DensitySensitivity {
                    mu: s_mu,
                    mumu: s_mu * s_mu - 1.0 / psi,
                    psi: s_psi,
                    psipsi: s_psi * s_psi + ds_psi,
                    mupsi: s_mu * s_psi - r / (psi * psi),
                }
            }
        }
    }

    /// Moment generating function `E[e^{tY}]`.
    pub fn mgf(&self, mu: f64, psi: f64, t: f64) -> Result<f64> {
        self.check_mean(mu)?;
        let v = match self.kind {
            FamilyKind::Bernoulli => 1.0 + mu * t.exp_m1(),
            FamilyKind::Poisson => (mu * t.exp_m1()).exp(),
            FamilyKind::NegativeBinomial => {
                let k = self.size();
                let denom = k - mu * t.exp_m1();
                if denom <= 0.0 {
                    return Err(Error::domain(format!(
                        "negative binomial MGF diverges at t={t} (needs e^t < 1 + κ/μ)"
                    )));
                }
                (k / denom).powf(k)
            }
            FamilyKind::Normal => (mu * t + 0.5 * psi * t * t).exp(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("MGF overflows at t={t}")))
        }
    }

    /// Smallest `k` with `F(k) ≥ u` for the discrete families, `μ + σΦ⁻¹(u)` for the Normal.
    pub fn quantile(&self, u: f64, mu: f64, psi: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => {
                if u > 1.0 - mu {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Normal => mu + psi.sqrt() * special::norm_quantile(u),
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => {
                let sd = self.variance(mu, psi).sqrt();
                let guard = mu + 60.0 * sd + 100.0;
                let mut k = 0.0;
                let mut lp = self.log_pf(0.0, mu, psi).unwrap_or(f64::NEG_INFINITY);
                let mut cdf = lp.exp();
                while cdf < u && k < guard {
                    k += 1.0;
                    lp += self.log_pmf_ratio(k, mu);
                    cdf += lp.exp();
                    // remaining mass is below rounding of the accumulated cdf
                    if k > mu && lp < -50.0 {
                        break;
                    }
                }
                k
            }
        }
    }

    /// `log p(k) − log p(k−1)` for the count families.
    pub(crate) fn log_pmf_ratio(&self, k: f64, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Poisson => (mu / k).ln(),
            FamilyKind::NegativeBinomial => {
                let s = self.size();
                ((k - 1.0 + s) / k).ln() + (mu / (mu + s)).ln()
            }
            _ => unreachable!("pmf recursion is only defined for count families"),
        }
    }
}
