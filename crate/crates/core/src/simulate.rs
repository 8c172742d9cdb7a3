//! Synthetic data from the latent-threshold representation: draw `Y ~ f` and
//! an independent `T ~ G0`, and observe `y` when `T ≤ h(y)`.
//!
//! Every observation draws from its own ChaCha20 stream, so the output is a
//! function of the seed alone and rows can be generated in any order.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::ResponseFamily;
use crate::mechanism::{MechanismKind, SelectionMechanism};
use crate::normalizer::pi_normal;
use crate::special::{norm_cdf, norm_pdf, norm_quantile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateLaw {
    /// Intercept plus independent standard normal columns.
    StandardNormalColumns,
    UserMatrix { x: DMatrix<f64>, w: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub family: ResponseFamily,
    pub mechanism: MechanismKind,
    /// Includes the intercept as its first entry.
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    /// Ignored for families with known dispersion.
    pub psi: f64,
    pub covariates: CovariateLaw,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: Dataset,
    /// Responses for every row, including those not observed.
    pub y_full: Vec<f64>,
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
}

/// Uniform on (0, 1) from the top 53 bits, never 0 or 1.
fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, i: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub fn simulate(config: &SimConfig) -> Result<Simulated> {
    let n = config.n;
    let (p, q) = (config.beta.len(), config.gamma.len());
    if p == 0 || q == 0 {
        return Err(Error::Config("β and γ need at least an intercept".into()));
    }
    config.mechanism.compatible_with(&config.family)?;
    let mech = SelectionMechanism::new(config.mechanism, config.alpha)?;
    if !config.family.dispersion_known() && !(config.psi > 0.0) {
        return Err(Error::Config(format!("dispersion must be positive, got {}", config.psi)));
    }
    if let CovariateLaw::UserMatrix { x, w } = &config.covariates {
        if x.shape() != (n, p) || w.shape() != (n, q) {
            return Err(Error::Config(format!(
                "covariate matrices {:?}/{:?} do not match n={n}, p={p}, q={q}",
                x.shape(),
                w.shape()
            )));
        }
    }
    let beta = DVector::from_column_slice(&config.beta);
    let gamma = DVector::from_column_slice(&config.gamma);
    let mut x = DMatrix::zeros(n, p);
    let mut w = DMatrix::zeros(n, q);
    let mut d = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut y_full = Vec::with_capacity(n);
    let mut mus = Vec::with_capacity(n);
    let mut taus = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(config.seed, i);
        match &config.covariates {
            CovariateLaw::StandardNormalColumns => {
                x[(i, 0)] = 1.0;
                w[(i, 0)] = 1.0;
                for j in 1..p {
                    x[(i, j)] = norm_quantile(uniform(&mut rng));
                }
                for j in 1..q {
                    w[(i, j)] = norm_quantile(uniform(&mut rng));
                }
            }
            CovariateLaw::UserMatrix { x: ux, w: uw } => {
                x.row_mut(i).copy_from(&ux.row(i));
                w.row_mut(i).copy_from(&uw.row(i));
            }
        }
        let eta = x.row(i).dot(&beta.transpose());
        let tau = w.row(i).dot(&gamma.transpose());
        let mu = config.family.mean_map(eta)?.mu;
        let yi = config.family.quantile(uniform(&mut rng), mu, config.psi);
        let t = mech.kind.g0.quantile(uniform(&mut rng));
        let h = mech.h_eval(yi, tau, mu)?.h;
        let selected = t <= h;
        d.push(selected);
        y.push(selected.then_some(yi));
        y_full.push(yi);
        mus.push(mu);
        taus.push(tau);
    }
    let names = |prefix: &str, k: usize| -> Vec<String> {
        std::iter::once("(Intercept)".to_string())
            .chain((1..k).map(|j| format!("{prefix}{j}")))
            .collect()
    };
    let (x_names, w_names) = match &config.covariates {
        CovariateLaw::StandardNormalColumns => (names("x", p), names("w", q)),
        CovariateLaw::UserMatrix { .. } => (
            (0..p).map(|j| format!("x{j}")).collect(),
            (0..q).map(|j| format!("w{j}")).collect(),
        ),
    };
    let data = Dataset::new(d, y, x, w, x_names, w_names)?;
    Ok(Simulated { data, y_full, mu: mus, tau: taus })
}

/// Monte Carlo estimate of `π = Pr{T ≤ h(Y)}` with its standard error.
pub fn pi_monte_carlo(
    family: &ResponseFamily,
    mech: &SelectionMechanism,
    mu: f64,
    psi: f64,
    tau: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    family.check_mean(mu)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..reps {
        let y = family.quantile(uniform(&mut rng), mu, psi);
        let t = mech.kind.g0.quantile(uniform(&mut rng));
        if t <= mech.h_eval(y, tau, mu)?.h {
            hits += 1;
        }
    }
    let p = hits as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsnCheck {
    pub max_abs_deviation: f64,
    /// Selection probability from the general machinery; `Φ(τ)` in theory.
    pub pi: f64,
}

/// Compares the Normal/probit selection density built from the general
/// machinery with the closed-form extended skew-normal density
/// `φ(z) Φ((τ + ρz)/√(1−ρ²)) / (σ Φ(τ))` over `y_grid`.
pub fn esn_density_check(mu: f64, sigma: f64, rho: f64, tau: f64, y_grid: &[f64]) -> Result<EsnCheck> {
    if !(rho.abs() < 1.0) || !(sigma > 0.0) {
        return Err(Error::domain(format!("needs |ρ| < 1 and σ > 0, got ρ={rho}, σ={sigma}")));
    }
    let a = rho / (1.0 - rho * rho).sqrt();
    // h(y) = τ√(1+α²) + α(y−μ)/σ, written as τ' + α'y
    let mech = SelectionMechanism::from_key("probit-linear", a / sigma)?;
    let tau_lin = tau * (1.0 + a * a).sqrt() - a * mu / sigma;
    let family = ResponseFamily::normal();
    let psi = sigma * sigma;
    let pi = pi_normal(&mech, &family, mu, psi, tau_lin)?.pi;
    let s = (1.0 - rho * rho).sqrt();
    let mut worst: f64 = 0.0;
    for &y in y_grid {
        let general = family.log_pf(y, mu, psi)?.exp() * mech.prob(y, tau_lin, mu)? / pi;
        let z = (y - mu) / sigma;
        let closed = norm_pdf(z) * norm_cdf((tau + rho * z) / s) / (sigma * norm_cdf(tau));
        worst = worst.max((general - closed).abs());
    }
    Ok(EsnCheck { max_abs_deviation: worst, pi })
}
