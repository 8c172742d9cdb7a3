//! Full-sample log-likelihood
//!
//! ```text
//! log L = Σ_{d=1} log{f(yᵢ) G(yᵢ)} + Σ_{d=0} log(1 − πᵢ)
//! ```
//!
//! with its analytic score and Hessian in θ = (β, γ[, ψ]) at fixed α.
//! Each observation contributes derivatives in its local coordinates
//! `(μᵢ, τᵢ, ψ)`; these are chained to β through the mean map `μ = g⁻¹(xᵀβ)`.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Model, ParamVector};
use crate::error::Result;
use crate::family::ResponseFamily;
use crate::mechanism::SelectionMechanism;
use crate::normalizer::{selection_probability, Truncation};
use crate::special::CompensatedSum;

/// Rows per work unit. Fixed so the reduction order does not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Order {
    Value,
    Score,
    Hessian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHessian {
    pub loglik: f64,
    pub score: DVector<f64>,
    /// Empty (0×0) when only the score was requested.
    pub hessian: DMatrix<f64>,
    /// Observations whose truncated series left more than the warning mass.
    pub tail_warnings: usize,
}

/// Derivatives of one observation's contribution in `(μ, τ, ψ)`.
#[derive(Debug, Clone, Copy, Default)]
struct Local {
    value: f64,
    mu: f64,
    tau: f64,
    psi: f64,
    mumu: f64,
    tautau: f64,
    psipsi: f64,
    mutau: f64,
    mupsi: f64,
    taupsi: f64,
}

struct Partial {
    loglik: CompensatedSum,
    score: DVector<f64>,
    hessian: DMatrix<f64>,
    tail_warnings: usize,
    infeasible: bool,
}

impl Partial {
    fn new(dim: usize, order: Order) -> Self {
        let h = if order == Order::Hessian { dim } else { 0 };
        Self {
            loglik: CompensatedSum::default(),
            score: DVector::zeros(if order >= Order::Score { dim } else { 0 }),
            hessian: DMatrix::zeros(h, h),
            tail_warnings: 0,
            infeasible: false,
        }
    }

    fn merge(&mut self, other: Partial) {
        self.loglik.merge(&other.loglik);
        self.score += other.score;
        self.hessian += other.hessian;
        self.tail_warnings += other.tail_warnings;
        self.infeasible |= other.infeasible;
    }
}

struct Ctx<'a> {
    data: &'a Dataset,
    family: ResponseFamily,
    mech: SelectionMechanism,
    truncation: Truncation,
    y_max: f64,
    params: &'a ParamVector,
    psi: f64,
    order: Order,
}

impl Ctx<'_> {
    /// Local derivatives for row `i`, or `None` when the contribution is `−∞`.
    fn local(&self, i: usize, mu: f64, tau: f64, warn: &mut usize) -> Result<Option<Local>> {
        let fam = &self.family;
        let psi = self.psi;
        if let Some(y) = self.data.y[i] {
            let g = self.mech.g_eval(y, tau, mu)?;
            let logf = fam.log_pf(y, mu, psi)?;
            if g.log_g == f64::NEG_INFINITY || logf == f64::NEG_INFINITY {
                return Ok(None);
            }
            let mut l = Local { value: logf + g.log_g, ..Default::default() };
            if self.order == Order::Value {
                return Ok(Some(l));
            }
            let theta = fam.theta_of_mu(mu)?;
            let b = fam.b_derivs(theta)?;
            let disp = fam.dispersion(psi);
            let carrier = fam.carrier(y, psi);
            let (r1, r2) = (g.g0.ratio1, g.g0.ratio2);
            let h = &g.h;
            let ab = disp.a * b.b2;
            let resid = y - mu;
            let core = y * theta - b.b;

            l.mu = resid / ab + r1 * h.mu;
            l.tau = r1 * h.tau;
            l.psi = -core * disp.a1 / (disp.a * disp.a) + carrier.d_psi;

            let curv = r2 - r1 * r1;
            l.mumu = -1.0 / ab - resid * b.b3 / (disp.a * b.b2 * b.b2 * b.b2) + curv * h.mu * h.mu + r1 * h.mumu;
            l.tautau = curv * h.tau * h.tau + r1 * h.tautau;
            l.mutau = curv * h.mu * h.tau + r1 * h.mutau;
            let a = disp.a;
            l.psipsi = core * (2.0 * disp.a1 * disp.a1 / (a * a * a) - disp.a2 / (a * a)) + carrier.d_psipsi;
            l.mupsi = -resid * disp.a1 / (a * a * b.b2);
            Ok(Some(l))
        } else {
            let pr = selection_probability(fam, &self.mech, mu, psi, tau, self.truncation, self.y_max)?;
            if pr.tail_warning() {
                *warn += 1;
            }
            let c = pr.pi_complement;
            if !(c > 0.0) {
                return Ok(None);
            }
            let mut l = Local { value: c.ln(), ..Default::default() };
            if self.order == Order::Value {
                return Ok(Some(l));
            }
            l.mu = -pr.dpi_dmu / c;
            l.tau = -pr.dpi_dtau / c;
            l.psi = -pr.dpi_dpsi / c;
            let c2 = c * c;
            l.mumu = -pr.d2pi_dmu2 / c - pr.dpi_dmu * pr.dpi_dmu / c2;
            l.tautau = -pr.d2pi_dtau2 / c - pr.dpi_dtau * pr.dpi_dtau / c2;
            l.mutau = -pr.d2pi_dmudtau / c - pr.dpi_dmu * pr.dpi_dtau / c2;
            l.psipsi = -pr.d2pi_dpsi2 / c - pr.dpi_dpsi * pr.dpi_dpsi / c2;
            l.mupsi = -pr.d2pi_dpsidmu / c - pr.dpi_dpsi * pr.dpi_dmu / c2;
            l.taupsi = -pr.d2pi_dpsidtau / c - pr.dpi_dpsi * pr.dpi_dtau / c2;
            Ok(Some(l))
        }
    }

    fn chunk(&self, rows: std::ops::Range<usize>) -> Result<Partial> {
        let data = self.data;
        let (p, q) = (data.p(), data.q());
        let has_psi = self.params.psi.is_some();
        let dim = p + q + usize::from(has_psi);
        let mut acc = Partial::new(dim, self.order);
        for i in rows {
            let xi = data.x.row(i);
            let wi = data.w.row(i);
            let eta = xi.dot(&self.params.beta.transpose());
            let tau = wi.dot(&self.params.gamma.transpose());
            let mm = self.family.mean_map(eta)?;
            let Some(l) = self.local(i, mm.mu, tau, &mut acc.tail_warnings)? else {
                acc.infeasible = true;
                return Ok(acc);
            };
            acc.loglik.add(l.value);
            if self.order == Order::Value {
                continue;
            }
            let s_eta = l.mu * mm.dmu;
            for j in 0..p {
                acc.score[j] += s_eta * xi[j];
            }
            for j in 0..q {
                acc.score[p + j] += l.tau * wi[j];
            }
            if has_psi {
                acc.score[p + q] += l.psi;
            }
            if self.order != Order::Hessian {
                continue;
            }
            let h = &mut acc.hessian;
            let bb = l.mumu * mm.dmu * mm.dmu + l.mu * mm.d2mu;
            let bg = l.mutau * mm.dmu;
            for j in 0..p {
                for k in 0..=j {
                    h[(j, k)] += bb * xi[j] * xi[k];
                }
                for k in 0..q {
                    h[(p + k, j)] += bg * xi[j] * wi[k];
                }
            }
            for j in 0..q {
                for k in 0..=j {
                    h[(p + j, p + k)] += l.tautau * wi[j] * wi[k];
                }
            }
            if has_psi {
                let r = p + q;
                let bp = l.mupsi * mm.dmu;
                for j in 0..p {
                    h[(r, j)] += bp * xi[j];
                }
                for j in 0..q {
                    h[(r, p + j)] += l.taupsi * wi[j];
                }
                h[(r, r)] += l.psipsi;
            }
        }
        Ok(acc)
    }
}

fn evaluate(data: &Dataset, model: &Model, params: &ParamVector, order: Order) -> Result<ScoreHessian> {
    params.check_shape(data, model)?;
    let ctx = Ctx {
        data,
        family: model.family,
        mech: model.selection(params.alpha)?,
        truncation: model.truncation,
        y_max: data.y_max(),
        params,
        psi: params.psi.unwrap_or(1.0),
        order,
    };
    if let Some(psi) = params.psi {
        if !(psi > 0.0) {
            return Ok(infeasible(params.dim(), order));
        }
    }
    let n = data.n();
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let run = |&s: &usize| ctx.chunk(s..(s + CHUNK).min(n));

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Partial>> = {
        use rayon::prelude::*;
        starts.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Partial>> = starts.iter().map(run).collect();

    let dim = params.dim();
    let mut total = Partial::new(dim, order);
    for part in parts {
        total.merge(part?);
    }
    if total.infeasible {
        return Ok(infeasible(dim, order));
    }
    let mut hessian = total.hessian;
    for j in 0..hessian.nrows() {
        for k in 0..j {
            hessian[(k, j)] = hessian[(j, k)];
        }
    }
    Ok(ScoreHessian {
        loglik: total.loglik.value(),
        score: total.score,
        hessian,
        tail_warnings: total.tail_warnings,
    })
}

fn infeasible(dim: usize, order: Order) -> ScoreHessian {
    let p = Partial::new(dim, order);
    ScoreHessian {
        loglik: f64::NEG_INFINITY,
        score: p.score,
        hessian: p.hessian,
        tail_warnings: 0,
    }
}

/// Log-likelihood at `params`; `−∞` when some observation has zero probability.
pub fn loglik(data: &Dataset, model: &Model, params: &ParamVector) -> Result<f64> {
    Ok(evaluate(data, model, params, Order::Value)?.loglik)
}

/// Log-likelihood and score in θ.
pub fn score(data: &Dataset, model: &Model, params: &ParamVector) -> Result<ScoreHessian> {
    evaluate(data, model, params, Order::Score)
}

/// Log-likelihood, score and Hessian in θ.
pub fn hessian(data: &Dataset, model: &Model, params: &ParamVector) -> Result<ScoreHessian> {
    evaluate(data, model, params, Order::Hessian)
}
