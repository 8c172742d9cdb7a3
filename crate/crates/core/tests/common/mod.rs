#![allow(dead_code)]

use nalgebra::DVector;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use selmod::simulate::{simulate, CovariateLaw, SimConfig};
use selmod::{Dataset, Link, MechanismKind, Model, ParamVector, ResponseFamily};

pub struct Rng(ChaCha20Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn seed(&mut self) -> u64 {
        self.0.next_u64()
    }
}

pub fn families() -> Vec<ResponseFamily> {
    vec![
        ResponseFamily::bernoulli(Link::Logit).unwrap(),
        ResponseFamily::bernoulli(Link::Probit).unwrap(),
        ResponseFamily::poisson(),
        ResponseFamily::negative_binomial(1.7).unwrap(),
        ResponseFamily::normal(),
    ]
}

/// Every family/mechanism pair the model accepts.
pub fn valid_pairs() -> Vec<(ResponseFamily, MechanismKind)> {
    let mut out = Vec::new();
    for fam in families() {
        for mech in MechanismKind::all() {
            if mech.compatible_with(&fam).is_ok() {
                out.push((fam, mech));
            }
        }
    }
    out
}

pub fn alpha_range(mech: MechanismKind) -> (f64, f64) {
    if mech.alpha_nonnegative() {
        (0.05, 0.8)
    } else {
        (-0.8, 0.8)
    }
}

/// Small simulated dataset plus a parameter point near (not at) the truth.
pub fn random_instance(fam: ResponseFamily, mech: MechanismKind, n: usize, rng: &mut Rng) -> (Dataset, Model, ParamVector) {
    let (lo, hi) = alpha_range(mech);
    let alpha = rng.range(lo, hi);
    let b0 = match fam.link() {
        Link::Log => rng.range(0.0, 1.0),
        _ => rng.range(-0.5, 0.5),
    };
    let beta = vec![b0, rng.range(-0.5, 0.5)];
    let gamma = vec![rng.range(0.0, 0.8), rng.range(-0.6, 0.6)];
    let psi = rng.range(0.5, 2.0);
    let cfg = SimConfig {
        n,
        family: fam,
        mechanism: mech,
        beta: beta.clone(),
        gamma: gamma.clone(),
        alpha,
        psi,
        covariates: CovariateLaw::StandardNormalColumns,
        seed: rng.seed(),
    };
    let sim = simulate(&cfg).unwrap();
    let model = Model::new(fam, mech).unwrap();
    let jitter = |v: &[f64], rng: &mut Rng| DVector::from_iterator(v.len(), v.iter().map(|x| x + rng.range(-0.1, 0.1)));
    let params = ParamVector {
        alpha,
        beta: jitter(&beta, rng),
        gamma: jitter(&gamma, rng),
        psi: (!fam.dispersion_known()).then(|| psi * rng.range(0.8, 1.2)),
    };
    (sim.data, model, params)
}

pub fn label(fam: &ResponseFamily, mech: &MechanismKind) -> String {
    format!("{}/{}/{}", fam.key(), fam.link().key(), mech.key())
}

/// Largest of `|fd − an| / max(1, |an|)` over the score components.
pub fn score_fd_error(data: &Dataset, model: &Model, params: &ParamVector) -> f64 {
    let sh = selmod::score(data, model, params).unwrap();
    let theta = params.theta();
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let h = 1e-6 * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        up[j] += h;
        let mut dn = theta.clone();
        dn[j] -= h;
        let fu = selmod::loglik(data, model, &params.with_theta(&up)).unwrap();
        let fd = selmod::loglik(data, model, &params.with_theta(&dn)).unwrap();
        let num = (fu - fd) / (2.0 * h);
        worst = worst.max((num - sh.score[j]).abs() / sh.score[j].abs().max(1.0));
    }
    worst
}

/// Largest of `|fd − an| / max(1, |an|)` over the Hessian entries.
pub fn hessian_fd_error(data: &Dataset, model: &Model, params: &ParamVector) -> f64 {
    let sh = selmod::hessian(data, model, params).unwrap();
    let theta = params.theta();
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let h = 1e-5 * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        up[j] += h;
        let mut dn = theta.clone();
        dn[j] -= h;
        let su = selmod::score(data, model, &params.with_theta(&up)).unwrap().score;
        let sd = selmod::score(data, model, &params.with_theta(&dn)).unwrap().score;
        for k in 0..theta.len() {
            let num = (su[k] - sd[k]) / (2.0 * h);
            let an = sh.hessian[(k, j)];
            worst = worst.max((num - an).abs() / an.abs().max(1.0));
        }
    }
    worst
}

/// Acceptance frequency against `G(y)` per y-bin, as `|freq − expected| / SE`.
/// Adjacent y values are pooled until a bin expects at least 10 selected and
/// 10 unselected rows, so the binomial normal approximation holds.
pub fn acceptance_z_scores(y_full: &[f64], d: &[bool], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let max_y = y_full.iter().cloned().fold(0.0, f64::max) as usize;
    let mut counts = vec![(0usize, 0usize); max_y + 1];
    for (&y, &s) in y_full.iter().zip(d) {
        counts[y as usize].0 += 1;
        counts[y as usize].1 += usize::from(s);
    }
    // (rows, hits, Σ g, Σ g(1−g))
    let mut bins: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut cur = (0.0, 0.0, 0.0, 0.0);
    for (y, &(m, hits)) in counts.iter().enumerate() {
        let gy = g(y as f64);
        let m = m as f64;
        cur = (cur.0 + m, cur.1 + hits as f64, cur.2 + m * gy, cur.3 + m * gy * (1.0 - gy));
        if cur.2 >= 10.0 && cur.0 - cur.2 >= 10.0 {
            bins.push(cur);
            cur = (0.0, 0.0, 0.0, 0.0);
        }
    }
    match bins.last_mut() {
        Some(last) => *last = (last.0 + cur.0, last.1 + cur.1, last.2 + cur.2, last.3 + cur.3),
        None => bins.push(cur),
    }
    bins.iter()
        .map(|&(_, hits, expect, var)| if var > 0.0 { (hits - expect).abs() / var.sqrt() } else { 0.0 })
        .collect()
}
