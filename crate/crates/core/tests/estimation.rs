mod common;

use common::*;
use nalgebra::DMatrix;
use selmod::estimator::{decoupled_start, profile_points, ProfileOptions};
use selmod::special::chi2_1_quantile;
use selmod::*;

fn sim(fam: ResponseFamily, key: &str, n: usize, beta: Vec<f64>, gamma: Vec<f64>, alpha: f64, seed: u64) -> (Dataset, Model) {
    let cfg = SimConfig {
        n,
        family: fam,
        mechanism: MechanismKind::from_key(key).unwrap(),
        beta,
        gamma,
        alpha,
        psi: 1.5,
        covariates: CovariateLaw::StandardNormalColumns,
        seed,
    };
    let s = simulate(&cfg).unwrap();
    (s.data, Model::new(fam, cfg.mechanism).unwrap())
}

#[test]
fn glm_recovers_truth_on_large_samples() {
    let truth = [0.4, -0.3];
    for fam in [ResponseFamily::poisson(), ResponseFamily::bernoulli(Link::Probit).unwrap(), ResponseFamily::negative_binomial(2.0).unwrap(), ResponseFamily::normal()] {
        // α = 0 with every row selected: a plain GLM sample
        let (data, _) = sim(fam, "probit-linear", 20_000, truth.to_vec(), vec![9.0], 0.0, 31);
        let (y, x) = data.selected();
        let fit = fit_glm(&y, &x, &fam).unwrap();
        assert!(fit.converged);
        for (c, t) in fit.coef.iter().zip(truth) {
            assert!((c - t).abs() < 0.05, "{}: {:?}", fam.key(), fit.coef);
        }
        if let Some(psi) = fit.psi {
            assert!((psi - 1.5).abs() < 0.1);
        }
    }
}

#[test]
fn decoupling_identity_for_every_pair() {
    let mut rng = Rng::new(44);
    for (fam, mech) in valid_pairs() {
        let (data, model, _) = random_instance(fam, mech, 80, &mut rng);
        let start = decoupled_start(&data, &model).unwrap();
        let (y, x) = data.selected();
        let resp = fit_glm(&y, &x, &fam).unwrap();
        let sel = fit_selection_glm(&data.d, &data.w, mech).unwrap();
        let l = loglik(&data, &model, &start).unwrap();
        assert!((l - (resp.loglik + sel.loglik)).abs() < 1e-8, "{}: {l} vs {}", label(&fam, &mech), resp.loglik + sel.loglik);
        // the decoupled point is stationary for the joint likelihood at α = 0
        let s = score(&data, &model, &start).unwrap().score;
        assert!(s.amax() < 1e-6, "{}: {}", label(&fam, &mech), s.amax());
    }
}

#[test]
fn log_odds_vanish_without_dependence() {
    let mut rng = Rng::new(8);
    for mech in MechanismKind::all() {
        let m = SelectionMechanism::new(mech, 0.0).unwrap();
        for _ in 0..20 {
            let (tau, mu) = (rng.range(-3.0, 3.0), rng.range(0.01, 0.99));
            assert_eq!(m.log_odds_lambda(tau, mu).unwrap(), 0.0);
        }
    }
}

#[test]
fn inner_maximization_ascends_to_a_stationary_point() {
    let mut rng = Rng::new(45);
    for (fam, mech) in valid_pairs() {
        let (data, model, params) = random_instance(fam, mech, 150, &mut rng);
        let start = decoupled_start(&data, &model).unwrap();
        let l0 = loglik(&data, &model, &start.with_alpha(params.alpha)).unwrap();
        let fit = inner_maximize(&data, &model, params.alpha, &start).unwrap();
        assert!(fit.loglik >= l0 - 1e-12, "{}", label(&fam, &mech));
        assert!(fit.grad_norm < 1e-5, "{}: {}", label(&fam, &mech), fit.grad_norm);
        // negative definite curvature at the maximum
        let h = hessian(&data, &model, &fit.params).unwrap().hessian;
        assert!((-h).cholesky().is_some(), "{}", label(&fam, &mech));
    }
}

#[test]
fn degenerate_grid_reproduces_two_glms() {
    let (data, model) = sim(ResponseFamily::poisson(), "logit-linear", 400, vec![0.5, 0.3], vec![0.2, 0.7], 0.4, 3);
    let opts = ProfileOptions { grid: GridConfig::Explicit(vec![0.0]), ..ProfileOptions::default() };
    let r = profile_maximize(&data, &model, &opts).unwrap();
    let (y, x) = data.selected();
    let resp = fit_glm(&y, &x, &model.family).unwrap();
    let sel = fit_selection_glm(&data.d, &data.w, model.mechanism).unwrap();
    assert_eq!(r.alpha_hat, 0.0);
    assert_eq!(r.boundary, BoundaryDiagnostic::AtConstraint);
    assert!((r.loglik_max - resp.loglik - sel.loglik).abs() < 1e-8);
    for j in 0..2 {
        assert!((r.params.beta[j] - resp.coef[j]).abs() < 1e-7);
        assert!((r.params.gamma[j] - sel.coef[j]).abs() < 1e-7);
    }
}

#[test]
fn interval_endpoints_solve_the_defining_equation() {
    let (data, model) = sim(ResponseFamily::bernoulli(Link::Logit).unwrap(), "probit-std", 1500, vec![0.3, 0.8], vec![0.4, 0.7], 1.0, 12);
    let r = profile_maximize(&data, &model, &ProfileOptions::default()).unwrap();
    assert_eq!(r.boundary, BoundaryDiagnostic::Interior);
    let q = chi2_1_quantile(0.95);
    let lo = r.alpha_ci.lower.value().unwrap();
    let hi = r.alpha_ci.upper.value().unwrap();
    assert!(lo < r.alpha_hat && r.alpha_hat < hi);
    // re-profile the endpoints independently of the fit's cache
    let curve = profile_points(&data, &model, &[lo, r.alpha_hat, hi]).unwrap();
    let l: Vec<f64> = curve.loglik.iter().map(|v| v.unwrap()).collect();
    assert!((l[1] - r.loglik_max).abs() < 1e-6);
    for e in [l[0], l[2]] {
        assert!((2.0 * (r.loglik_max - e) - q).abs() < 1e-3, "{}", 2.0 * (r.loglik_max - e));
    }
    // the relative curve peaks at zero, at α̂
    let top = r.profile.rel_loglik.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(top, 0.0);
    let at = r.profile.alphas.iter().position(|&a| a == r.alpha_hat).unwrap();
    assert_eq!(r.profile.rel_loglik[at], Some(0.0));
}

#[test]
fn estimate_does_not_depend_on_grid_resolution() {
    let (data, model) = sim(ResponseFamily::poisson(), "gumbel-std", 800, vec![0.5, 0.4], vec![0.2, 0.6], 0.8, 21);
    let auto = profile_maximize(&data, &model, &ProfileOptions::default()).unwrap();
    let fine: Vec<f64> = (0..=60).map(|i| -1.0 + 0.05 * i as f64).collect();
    let explicit = profile_maximize(&data, &model, &ProfileOptions { grid: GridConfig::Explicit(fine), ..Default::default() }).unwrap();
    assert_eq!(auto.boundary, BoundaryDiagnostic::Interior);
    assert!((auto.alpha_hat - explicit.alpha_hat).abs() < 1e-3, "{} vs {}", auto.alpha_hat, explicit.alpha_hat);
    assert!((auto.loglik_max - explicit.loglik_max).abs() < 1e-6);
    for (a, b) in [(auto.alpha_ci.lower, explicit.alpha_ci.lower), (auto.alpha_ci.upper, explicit.alpha_ci.upper)] {
        assert!((a.value().unwrap() - b.value().unwrap()).abs() < 1e-3);
    }
}

#[test]
fn maximum_at_the_mgf_constraint_is_flagged() {
    // selection favours small counts, which the nonnegative-α mechanism cannot express
    let (data, _) = sim(ResponseFamily::poisson(), "probit-linear", 500, vec![1.0, 0.3], vec![0.3, 0.5], -1.0, 5);
    let model = Model::new(ResponseFamily::poisson(), MechanismKind::from_key("expn-mgf").unwrap()).unwrap();
    let r = profile_maximize(&data, &model, &ProfileOptions::default()).unwrap();
    assert_eq!(r.boundary, BoundaryDiagnostic::AtConstraint);
    assert_eq!(r.alpha_hat, 0.0);
    assert_eq!(r.alpha_ci.lower, CiBound::Constraint(0.0));
    assert!(matches!(r.alpha_ci.upper, CiBound::Finite(v) if v > 0.0));
    assert!(!r.warnings.is_empty());
}

#[test]
fn negative_alpha_rejected_for_mgf() {
    let (data, _) = sim(ResponseFamily::poisson(), "probit-linear", 100, vec![1.0], vec![0.3], 0.0, 5);
    let model = Model::new(ResponseFamily::poisson(), MechanismKind::from_key("expn-mgf").unwrap()).unwrap();
    let opts = ProfileOptions { grid: GridConfig::Explicit(vec![-0.1, 0.0]), ..Default::default() };
    assert!(matches!(profile_maximize(&data, &model, &opts), Err(Error::Config(_))));
}

#[test]
fn standard_errors_invert_numerical_information() {
    let (data, model) = sim(ResponseFamily::normal(), "logit-linear", 600, vec![0.5, 0.3], vec![0.2, 0.7], 0.5, 9);
    let start = decoupled_start(&data, &model).unwrap();
    let fit = inner_maximize(&data, &model, 0.5, &start).unwrap();
    let (se, ratio) = standard_errors(&data, &model, &fit.params).unwrap();
    let theta = fit.params.theta();
    let k = theta.len();
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k {
        let step = 1e-5 * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        up[j] += step;
        let mut dn = theta.clone();
        dn[j] -= step;
        let su = score(&data, &model, &fit.params.with_theta(&up)).unwrap().score;
        let sd = score(&data, &model, &fit.params.with_theta(&dn)).unwrap().score;
        h.set_column(j, &((su - sd) / (2.0 * step)));
    }
    let h = (&h + h.transpose()) * 0.5;
    let cov = (-h).try_inverse().unwrap();
    for j in 0..k {
        assert!((se[j] - cov[(j, j)].sqrt()).abs() < 1e-5 * se[j], "{j}");
        assert!((ratio[j] - theta[j] / se[j]).abs() < 1e-12 * ratio[j].abs().max(1.0));
    }
}

#[test]
fn no_selected_rows_is_an_error() {
    let data = Dataset::new(
        vec![false; 5],
        vec![None; 5],
        DMatrix::from_element(5, 1, 1.0),
        DMatrix::from_element(5, 1, 1.0),
        vec!["a".into()],
        vec!["b".into()],
    )
    .unwrap();
    let model = Model::new(ResponseFamily::poisson(), MechanismKind::from_key("probit-linear").unwrap()).unwrap();
    assert!(profile_maximize(&data, &model, &ProfileOptions::default()).is_err());
}
