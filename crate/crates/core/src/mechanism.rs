//! Selection mechanisms `G(y) = G0{h(y)}`.
//!
//! `G0` is the distribution function of the latent threshold `T` and `h`
//! carries the dependence on the response value, the selection predictor
//! `τ = wᵀγ` and, for standardized forms, the response mean `μ`.
//! A value `y` is observed when `T ≤ h(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FamilyKind, Link, ResponseFamily};
use crate::special;

/// Cap on the exponent of the exponentiated forms; `e^600` keeps products of
/// `h` with its partials finite while `G0(h)` is already exactly 1.
const MAX_EXPONENT: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum G0Kind {
    StdNormal,
    Logistic,
    UnitExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HKind {
    /// `τ + αy`
    Linear,
    /// `τ + ηy`, `η = α/μ`
    Standardized,
    /// `exp(τ + αy)`
    ExpLinear,
    /// `exp(τ + ηy)`
    ExpStandardized,
    /// `e^τ + ηy`, α ≥ 0
    MgfLinear,
}

/// One entry of the mechanism catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismKind {
    pub g0: G0Kind,
    pub h: HKind,
}

/// A catalog mechanism together with its dependence parameter α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMechanism {
    pub kind: MechanismKind,
    pub alpha: f64,
}

/// `G0(t)`, `g0(t) = G0'(t)` and `g0'(t)`, plus the tail and ratio forms
/// needed to keep log-likelihood terms finite far in the tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G0Eval {
    pub cdf: f64,
    pub pdf: f64,
    pub dpdf: f64,
    /// `1 − G0(t)`
    pub ccdf: f64,
    pub log_cdf: f64,
    pub log_ccdf: f64,
    /// `g0 / G0`
    pub ratio1: f64,
    /// `g0' / G0`
    pub ratio2: f64,
}

/// `h` and its partial derivatives in `(μ, τ)` at a fixed `y`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HEval {
    pub h: f64,
    pub mu: f64,
    pub tau: f64,
    pub mumu: f64,
    pub tautau: f64,
    pub mutau: f64,
}

/// `G(y)` with its partial derivatives in `(μ, τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GEval {
    pub g: f64,
    pub gc: f64,
    pub log_g: f64,
    pub mu: f64,
    pub tau: f64,
    pub mumu: f64,
    pub tautau: f64,
    pub mutau: f64,
    pub h: HEval,
    pub g0: G0Eval,
}

pub const CATALOG: [(&str, MechanismKind); 7] = [
    ("probit-linear", MechanismKind { g0: G0Kind::StdNormal, h: HKind::Linear }),
    ("probit-std", MechanismKind { g0: G0Kind::StdNormal, h: HKind::Standardized }),
    ("logit-linear", MechanismKind { g0: G0Kind::Logistic, h: HKind::Linear }),
    ("logit-std", MechanismKind { g0: G0Kind::Logistic, h: HKind::Standardized }),
    ("gumbel-linear", MechanismKind { g0: G0Kind::UnitExponential, h: HKind::ExpLinear }),
    ("gumbel-std", MechanismKind { g0: G0Kind::UnitExponential, h: HKind::ExpStandardized }),
    ("expn-mgf", MechanismKind { g0: G0Kind::UnitExponential, h: HKind::MgfLinear }),
];

impl G0Kind {
    pub fn eval(self, t: f64) -> Result<G0Eval> {
        Ok(match self {
            G0Kind::StdNormal => {
                let pdf = special::norm_pdf(t);
                let r1 = special::norm_hazard_lower(t);
                G0Eval {
                    cdf: special::norm_cdf(t),
                    pdf,
                    dpdf: -t * pdf,
                    ccdf: special::norm_sf(t),
                    log_cdf: special::norm_log_cdf(t),
                    log_ccdf: special::norm_log_cdf(-t),
                    ratio1: r1,
                    ratio2: -t * r1,
                }
            }
            G0Kind::Logistic => {
                let cdf = 1.0 / (1.0 + (-t).exp());
                let ccdf = 1.0 / (1.0 + t.exp());
                let pdf = cdf * ccdf;
                let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
                G0Eval {
                    cdf,
                    pdf,
                    dpdf: pdf * (ccdf - cdf),
                    ccdf,
                    log_cdf: -softplus(-t),
                    log_ccdf: -softplus(t),
                    ratio1: ccdf,
                    ratio2: ccdf * (ccdf - cdf),
                }
            }
            G0Kind::UnitExponential => {
                if !(t >= 0.0) {
                    return Err(Error::domain(format!("unit exponential G0 needs t ≥ 0, got {t}")));
                }
                let ccdf = (-t).exp();
                let cdf = -(-t).exp_m1();
                let r1 = 1.0 / t.exp_m1();
                G0Eval {
                    cdf,
                    pdf: ccdf,
                    dpdf: -ccdf,
                    ccdf,
                    log_cdf: cdf.ln(),
                    log_ccdf: -t,
                    ratio1: r1,
                    ratio2: -r1,
                }
            }
        })
    }

    /// Inverse of `G0`, used to draw the latent threshold.
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            G0Kind::StdNormal => special::norm_quantile(u),
            G0Kind::Logistic => (u / (1.0 - u)).ln(),
            G0Kind::UnitExponential => -(-u).ln_1p(),
        }
    }
}

impl HKind {
    pub fn uses_mean(self) -> bool {
        matches!(self, HKind::Standardized | HKind::ExpStandardized | HKind::MgfLinear)
    }

    /// Evaluates `h(y; τ, μ, α)` and its `(μ, τ)` partials.
    pub fn eval(self, alpha: f64, y: f64, tau: f64, mu: f64) -> Result<HEval> {
        if self.uses_mean() && !(mu > 0.0) {
            return Err(Error::domain(format!("standardized selection needs μ > 0, got {mu}")));
        }
        Ok(match self {
            HKind::Linear => HEval { h: tau + alpha * y, tau: 1.0, ..Default::default() },
            HKind::Standardized => {
                let ay = alpha * y;
                HEval {
                    h: tau + ay / mu,
                    mu: -ay / (mu * mu),
                    tau: 1.0,
                    mumu: 2.0 * ay / (mu * mu * mu),
                    ..Default::default()
                }
            }
            HKind::ExpLinear => {
                let h = (tau + alpha * y).min(MAX_EXPONENT).exp();
                HEval { h, tau: h, tautau: h, ..Default::default() }
            }
            HKind::ExpStandardized => {
                let ay = alpha * y;
                let h = (tau + ay / mu).min(MAX_EXPONENT).exp();
                let u_mu = -ay / (mu * mu);
                let u_mumu = 2.0 * ay / (mu * mu * mu);
                HEval {
                    h,
                    mu: h * u_mu,
                    tau: h,
                    mumu: h * (u_mu * u_mu + u_mumu),
                    tautau: h,
                    mutau: h * u_mu,
                }
            }
            HKind::MgfLinear => {
                let lam = tau.min(MAX_EXPONENT).exp();
                let ay = alpha * y;
                HEval {
                    h: lam + ay / mu,
                    mu: -ay / (mu * mu),
                    tau: lam,
                    mumu: 2.0 * ay / (mu * mu * mu),
                    tautau: lam,
                    mutau: 0.0,
                }
            }
        })
    }
}

impl MechanismKind {
    pub fn from_key(key: &str) -> Result<Self> {
        let key = key.trim().to_ascii_lowercase();
        CATALOG
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, m)| *m)
            .ok_or_else(|| {
                let known: Vec<_> = CATALOG.iter().map(|(k, _)| *k).collect();
                Error::model(format!("unknown mechanism '{key}' (known: {})", known.join(", ")))
            })
    }

    pub fn key(&self) -> &'static str {
        CATALOG.iter().find(|(_, m)| m == self).map(|(k, _)| *k).unwrap_or("custom")
    }

    pub fn all() -> impl Iterator<Item = MechanismKind> {
        CATALOG.iter().map(|(_, m)| *m)
    }

    pub fn is_standardized(&self) -> bool {
        self.h.uses_mean()
    }

    /// α is restricted to `[0, ∞)`.
    pub fn alpha_nonnegative(&self) -> bool {
        self.h == HKind::MgfLinear
    }

    /// The `G0`/`h` pairing is one of the documented constructions.
    pub fn is_valid_pairing(&self) -> bool {
        match self.h {
            HKind::Linear | HKind::Standardized => self.g0 != G0Kind::UnitExponential,
            HKind::ExpLinear | HKind::ExpStandardized | HKind::MgfLinear => self.g0 == G0Kind::UnitExponential,
        }
    }

    pub fn compatible_with(&self, family: &ResponseFamily) -> Result<()> {
        if !self.is_valid_pairing() {
            return Err(Error::model(format!("invalid G0/h pairing {:?}/{:?}", self.g0, self.h)));
        }
        if self.h.uses_mean() && family.kind() == FamilyKind::Normal {
            return Err(Error::model(format!(
                "mechanism '{}' standardizes by μ and needs a positive-mean family",
                self.key()
            )));
        }
        if self.h == HKind::MgfLinear && !family.nonnegative_support() {
            return Err(Error::model("mechanism 'expn-mgf' needs a non-negative response"));
        }
        Ok(())
    }

    /// Link of the binary model for `D` when α = 0 (`G = G0{h(·)}` with `h` free of `y`).
    pub fn selection_link(&self) -> Link {
        match self.g0 {
            G0Kind::StdNormal => Link::Probit,
            G0Kind::Logistic => Link::Logit,
            G0Kind::UnitExponential => Link::Cloglog,
        }
    }

    pub fn with_alpha(self, alpha: f64) -> SelectionMechanism {
        SelectionMechanism { kind: self, alpha }
    }
}

impl SelectionMechanism {
    pub fn new(kind: MechanismKind, alpha: f64) -> Result<Self> {
        if !kind.is_valid_pairing() {
            return Err(Error::model(format!("invalid G0/h pairing {:?}/{:?}", kind.g0, kind.h)));
        }
        if kind.alpha_nonnegative() && alpha < 0.0 {
            return Err(Error::domain(format!("mechanism '{}' needs α ≥ 0, got {alpha}", kind.key())));
        }
        Ok(Self { kind, alpha })
    }

    pub fn from_key(key: &str, alpha: f64) -> Result<Self> {
        Self::new(MechanismKind::from_key(key)?, alpha)
    }

    pub fn g0_eval(&self, t: f64) -> Result<G0Eval> {
        self.kind.g0.eval(t)
    }

    pub fn h_eval(&self, y: f64, tau: f64, mu: f64) -> Result<HEval> {
        self.kind.h.eval(self.alpha, y, tau, mu)
    }

    /// `G(y)` and its `(μ, τ)` partials.
    pub fn g_eval(&self, y: f64, tau: f64, mu: f64) -> Result<GEval> {
        let h = self.h_eval(y, tau, mu)?;
        let g0 = self.g0_eval(h.h)?;
        let (p, dp) = (g0.pdf, g0.dpdf);
        Ok(GEval {
            g: g0.cdf,
            gc: g0.ccdf,
            log_g: g0.log_cdf,
            mu: p * h.mu,
            tau: p * h.tau,
            mumu: dp * h.mu * h.mu + p * h.mumu,
            tautau: dp * h.tau * h.tau + p * h.tautau,
            mutau: dp * h.mu * h.tau + p * h.mutau,
            h,
            g0,
        })
    }

    /// Conditional selection probability `Pr{D=1 | Y=y}`.
    pub fn prob(&self, y: f64, tau: f64, mu: f64) -> Result<f64> {
        Ok(self.g_eval(y, tau, mu)?.g)
    }

    /// Log-odds ratio between `Y` and `D` for a binary response.
    /// Infinite when one of the four cells has probability zero.
    pub fn log_odds_lambda(&self, tau: f64, mu: f64) -> Result<f64> {
        let g0 = self.g_eval(0.0, tau, mu)?.g0;
        let g1 = self.g_eval(1.0, tau, mu)?.g0;
        Ok((g0.log_ccdf + g1.log_cdf) - (g0.log_cdf + g1.log_ccdf))
    }
}
