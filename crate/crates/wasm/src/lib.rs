//! Browser bindings for the selmod demo page.
//!
//! Each operation has a plain Rust function returning a serializable value, so
//! it can be tested natively, and a thin `#[wasm_bindgen]` wrapper that hands
//! JSON text to the page.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use selmod::estimator::ProfileOptions;
use selmod::normalizer::{selection_probability, Truncation};
use selmod::{
    profile_maximize, simulate, CovariateLaw, Error, FamilyKind, MechanismKind, Model, ResponseFamily, SelectionMechanism, SimConfig,
};

#[derive(Debug, Clone, Serialize)]
pub struct DensityView {
    pub y: Vec<f64>,
    /// Baseline density or probability function `f(y)`.
    pub base: Vec<f64>,
    /// `G(y) = Pr{D=1 | Y=y}`.
    pub accept: Vec<f64>,
    /// `f(y) G(y) / π`.
    pub selected: Vec<f64>,
    pub pi: f64,
    pub discrete: bool,
}

fn family(key: &str, kappa: f64) -> selmod::Result<ResponseFamily> {
    let kappa = (key == "negbin").then_some(kappa);
    ResponseFamily::from_keys(key, None, kappa)
}

/// Baseline and selected distributions of `y` at one `(μ, τ)` point.
pub fn density_view(fam: &str, mech: &str, alpha: f64, mu: f64, tau: f64, psi: f64, kappa: f64) -> selmod::Result<DensityView> {
    let family = family(fam, kappa)?;
    let kind = MechanismKind::from_key(mech)?;
    kind.compatible_with(&family)?;
    family.check_mean(mu)?;
    let sel = SelectionMechanism::new(kind, alpha)?;
    let y: Vec<f64> = if family.is_discrete() {
        let sd = family.variance(mu, psi).sqrt();
        let top = match family.kind() {
            FamilyKind::Bernoulli => 1,
            _ => (mu + 5.0 * sd + 3.0).ceil() as usize,
        };
        (0..=top).map(|k| k as f64).collect()
    } else {
        let sd = psi.sqrt();
        (0..=200).map(|i| mu - 5.0 * sd + 0.05 * sd * i as f64).collect()
    };
    let pi = selection_probability(&family, &sel, mu, psi, tau, Truncation::Auto, 0.0)?.pi;
    let mut base = Vec::with_capacity(y.len());
    let mut accept = Vec::with_capacity(y.len());
    let mut selected = Vec::with_capacity(y.len());
    for &v in &y {
        let f = family.log_pf(v, mu, psi)?.exp();
        let g = sel.prob(v, tau, mu)?;
        base.push(f);
        accept.push(g);
        selected.push(if pi > 0.0 { f * g / pi } else { 0.0 });
    }
    Ok(DensityView { y, base, accept, selected, pi, discrete: family.is_discrete() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileView {
    pub alpha_true: f64,
    pub alpha_hat: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub boundary: String,
    pub n_selected: usize,
    pub alphas: Vec<f64>,
    /// Relative profile log-likelihood; `None` where the inner fit failed.
    pub rel_loglik: Vec<Option<f64>>,
}

/// Simulates a two-covariate dataset and profiles α.
pub fn simulate_and_profile(fam: &str, mech: &str, alpha: f64, n: usize, seed: u64) -> selmod::Result<ProfileView> {
    let family = family(fam, 1.5)?;
    let kind = MechanismKind::from_key(mech)?;
    let beta = match family.kind() {
        FamilyKind::Poisson | FamilyKind::NegativeBinomial => vec![0.5, 0.4],
        _ => vec![0.3, 0.8],
    };
    let cfg = SimConfig {
        n,
        family,
        mechanism: kind,
        beta,
        gamma: vec![0.3, 0.7],
        alpha,
        psi: 1.0,
        covariates: CovariateLaw::StandardNormalColumns,
        seed,
    };
    let sim = simulate(&cfg)?;
    let model = Model::new(family, kind)?;
    let r = profile_maximize(&sim.data, &model, &ProfileOptions::default())?;
    Ok(ProfileView {
        alpha_true: alpha,
        alpha_hat: r.alpha_hat,
        ci_lower: r.alpha_ci.lower.value(),
        ci_upper: r.alpha_ci.upper.value(),
        boundary: format!("{:?}", r.boundary),
        n_selected: sim.data.n_selected(),
        alphas: r.profile.alphas,
        rel_loglik: r.profile.rel_loglik,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceView {
    pub y: Vec<f64>,
    pub rows: Vec<usize>,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

/// Empirical `Pr{D=1 | Y=y}` from simulated Poisson draws next to `G(y)`.
pub fn acceptance_law(mech: &str, alpha: f64, mu: f64, tau: f64, n: usize, seed: u64) -> selmod::Result<AcceptanceView> {
    let family = ResponseFamily::poisson();
    let kind = MechanismKind::from_key(mech)?;
    family.check_mean(mu)?;
    let ones = nalgebra::DMatrix::from_element(n, 1, 1.0);
    let cfg = SimConfig {
        n,
        family,
        mechanism: kind,
        beta: vec![mu.ln()],
        gamma: vec![tau],
        alpha,
        psi: 1.0,
        covariates: CovariateLaw::UserMatrix { x: ones.clone(), w: ones },
        seed,
    };
    let sim = simulate(&cfg)?;
    let sel = SelectionMechanism::new(kind, alpha)?;
    let top = sim.y_full.iter().cloned().fold(0.0, f64::max) as usize;
    let mut rows = vec![0usize; top + 1];
    let mut hits = vec![0usize; top + 1];
    for (&y, &d) in sim.y_full.iter().zip(&sim.data.d) {
        rows[y as usize] += 1;
        hits[y as usize] += usize::from(d);
    }
    // the mean every row was simulated with
    let mu_row = sim.mu.first().copied().unwrap_or(mu);
    let mut view = AcceptanceView { y: Vec::new(), rows: Vec::new(), observed: Vec::new(), expected: Vec::new() };
    for k in 0..=top {
        if rows[k] == 0 {
            continue;
        }
        view.y.push(k as f64);
        view.rows.push(rows[k]);
        view.observed.push(hits[k] as f64 / rows[k] as f64);
        view.expected.push(sel.prob(k as f64, tau, mu_row)?);
    }
    Ok(view)
}

fn to_js<T: Serialize>(r: Result<T, Error>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen(js_name = densityView)]
pub fn density_view_js(fam: &str, mech: &str, alpha: f64, mu: f64, tau: f64, psi: f64, kappa: f64) -> Result<String, JsValue> {
    to_js(density_view(fam, mech, alpha, mu, tau, psi, kappa))
}

#[wasm_bindgen(js_name = simulateAndProfile)]
pub fn simulate_and_profile_js(fam: &str, mech: &str, alpha: f64, n: u32, seed: u32) -> Result<String, JsValue> {
    to_js(simulate_and_profile(fam, mech, alpha, n as usize, u64::from(seed)))
}

#[wasm_bindgen(js_name = acceptanceLaw)]
pub fn acceptance_law_js(mech: &str, alpha: f64, mu: f64, tau: f64, n: u32, seed: u32) -> Result<String, JsValue> {
    to_js(acceptance_law(mech, alpha, mu, tau, n as usize, u64::from(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selected_density_sums_to_one() {
        let v = density_view("poisson", "probit-std", 0.7, 3.0, 0.2, 1.0, 1.0).unwrap();
        let total: f64 = v.selected.iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let b = density_view("bernoulli", "logit-linear", 1.0, 0.4, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(b.y, vec![0.0, 1.0]);
        assert!((b.selected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_view_integrates_to_one() {
        let v = density_view("normal", "gumbel-linear", -0.5, 1.0, 0.3, 2.0, 1.0).unwrap();
        let h = v.y[1] - v.y[0];
        let total: f64 = v.selected.iter().sum::<f64>() * h;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn profile_peaks_at_zero() {
        let p = simulate_and_profile("poisson", "gumbel-std", 0.8, 600, 3).unwrap();
        let top = p.rel_loglik.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(top, 0.0);
        assert!(p.alphas.contains(&p.alpha_hat));
    }

    #[test]
    fn acceptance_tracks_g() {
        let v = acceptance_law("logit-linear", 0.5, 2.0, 0.0, 20_000, 1).unwrap();
        for k in 0..v.y.len() {
            if v.rows[k] > 500 {
                let g = v.expected[k];
                let se = (g * (1.0 - g) / v.rows[k] as f64).sqrt();
                assert!((v.observed[k] - g).abs() < 5.0 * se);
            }
        }
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(density_view("normal", "expn-mgf", 0.5, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(density_view("poisson", "nope", 0.5, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(acceptance_law("probit-linear", 0.5, -1.0, 0.0, 10, 1).is_err());
    }
}
