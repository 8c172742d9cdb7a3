//! Profile-likelihood estimation of α with Newton inner maximization over θ,
//! likelihood-ratio intervals for α and observed-information standard errors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Model, ParamVector};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, fit_selection_glm};
use crate::likelihood::{hessian, loglik};
use crate::special::chi2_1_quantile;

const MAX_ITER: usize = 200;
const SCORE_TOL: f64 = 1e-8;
const REL_TOL: f64 = 1e-12;
/// Gradient size accepted as stationary when no step improves the log-likelihood.
const STALL_SCORE_TOL: f64 = 1e-5;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

const GRID_POINTS_PER_SIDE: usize = 40;
const GRID_DOUBLING_EVERY: usize = 10;
const GRID_FAILURE_RUN: usize = 3;
/// Extra depth below the interval threshold before an auto-grid flank stops.
const GRID_MARGIN: f64 = 1.0;
const MAX_DROPPED_FRACTION: f64 = 0.2;
const GOLDEN_TOL: f64 = 1e-4;
const CI_RESIDUAL_TOL: f64 = 1e-6;
const CI_WIDTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerFit {
    pub params: ParamVector,
    pub loglik: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Newton direction solving `(−H) δ = s`; the curvature is made positive
/// definite by reflecting and flooring eigenvalues when `−H` is not.
fn newton_direction(neg_h: &DMatrix<f64>, s: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = neg_h.clone().cholesky() {
        return ch.solve(s);
    }
    let eig = neg_h.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax().max(1e-12);
    let floor = top * 1e-6;
    let qts = eig.eigenvectors.transpose() * s;
    let scaled = DVector::from_iterator(
        qts.len(),
        qts.iter().zip(eig.eigenvalues.iter()).map(|(v, l)| v / l.abs().max(floor)),
    );
    eig.eigenvectors * scaled
}

fn feasible(params: &ParamVector) -> bool {
    params.psi.is_none_or(|p| p > 0.0) && params.theta().iter().all(|v| v.is_finite())
}

/// Maximizes the log-likelihood over θ at fixed α, starting from `start`.
pub fn inner_maximize(data: &Dataset, model: &Model, alpha: f64, start: &ParamVector) -> Result<InnerFit> {
    let mut cur = start.with_alpha(alpha);
    let mut sh = hessian(data, model, &cur)?;
    if !sh.loglik.is_finite() {
        return Err(Error::domain(format!("log-likelihood is not finite at the start for α={alpha}")));
    }
    let mut grad_step = 1.0;
    for it in 0..MAX_ITER {
        let g = sh.score.amax();
        if g < SCORE_TOL {
            return Ok(InnerFit { params: cur, loglik: sh.loglik, iterations: it, grad_norm: g });
        }
        let mut dir = newton_direction(&(-&sh.hessian), &sh.score);
        let mut slope = sh.score.dot(&dir);
        let newton = slope > 0.0 && dir.iter().all(|v| v.is_finite());
        if !newton {
            dir = &sh.score * (grad_step / sh.score.norm());
            slope = sh.score.dot(&dir);
        }
        let theta = cur.theta();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = cur.with_theta(&(&theta + &dir * t));
            if feasible(&cand) {
                if let Ok(ll) = loglik(data, model, &cand) {
                    if ll.is_finite() && ll >= sh.loglik + ARMIJO * t * slope {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some(cand) = accepted else {
            if g < STALL_SCORE_TOL {
                return Ok(InnerFit { params: cur, loglik: sh.loglik, iterations: it, grad_norm: g });
            }
            return Err(Error::NonConvergence {
                iterations: it,
                grad_norm: g,
                context: format!("line search failed at α={alpha}"),
            });
        };
        if !newton {
            grad_step = if t == 1.0 { grad_step * 2.0 } else { grad_step * t };
        }
        let next = hessian(data, model, &cand)?;
        let change = (next.loglik - sh.loglik).abs() / sh.loglik.abs().max(1.0);
        cur = cand;
        sh = next;
        if newton && change < REL_TOL {
            let g = sh.score.amax();
            return Ok(InnerFit { params: cur, loglik: sh.loglik, iterations: it + 1, grad_norm: g });
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        grad_norm: sh.score.amax(),
        context: format!("inner maximization at α={alpha}"),
    })
}

/// α = 0 starting values from the two decoupled fits.
pub fn decoupled_start(data: &Dataset, model: &Model) -> Result<ParamVector> {
    if data.n_selected() == 0 {
        return Err(Error::model("no selected observations"));
    }
    let (y, x) = data.selected();
    let resp = fit_glm(&y, &x, &model.family)?;
    let sel = fit_selection_glm(&data.d, &data.w, model.mechanism)?;
    Ok(ParamVector { alpha: 0.0, beta: resp.coef, gamma: sel.coef, psi: resp.psi })
}

/// Observed-information standard errors `sqrt(diag((−H)⁻¹))` and `estimate / SE`.
pub fn standard_errors(data: &Dataset, model: &Model, params: &ParamVector) -> Result<(Vec<f64>, Vec<f64>)> {
    let sh = hessian(data, model, params)?;
    let info = -sh.hessian;
    let Some(ch) = info.clone().cholesky() else {
        let min_eigenvalue = info.symmetric_eigen().eigenvalues.min();
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    };
    let cov = ch.inverse();
    let theta = params.theta();
    let se: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    let ratio = theta.iter().zip(&se).map(|(t, s)| t / s).collect();
    Ok((se, ratio))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridConfig {
    /// Expands outward from α = 0 until both flanks drop below the interval threshold.
    Auto,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub grid: GridConfig,
    pub level: f64,
    /// Extra profile points spread across the interval for plotting.
    pub densify: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { grid: GridConfig::Auto, level: 0.95, densify: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryDiagnostic {
    Interior,
    /// `L_p` still increasing at the upper end of the scanned range.
    MonotoneIncreasing,
    /// `L_p` still increasing towards the lower end of the scanned range.
    MonotoneDecreasing,
    /// Maximum at a constraint on α (α = 0 for `expn-mgf`, or a single fixed α).
    AtConstraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CiBound {
    Finite(f64),
    /// The level set extends past the scanned range.
    Unbounded,
    /// The level set reaches the boundary of the α domain.
    Constraint(f64),
}

impl CiBound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            CiBound::Finite(v) | CiBound::Constraint(v) => Some(v),
            CiBound::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub lower: CiBound,
    pub upper: CiBound,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointStatus {
    Ok,
    Failed,
}

/// Profile log-likelihood over α, shifted so its maximum is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub alphas: Vec<f64>,
    pub rel_loglik: Vec<Option<f64>>,
    pub loglik: Vec<Option<f64>>,
    pub theta_at: Vec<Option<Vec<f64>>>,
    pub status: Vec<PointStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha_hat: f64,
    pub params: ParamVector,
    /// Withheld when the observed information is not positive definite.
    pub std_err: Option<Vec<f64>>,
    pub ratio: Option<Vec<f64>>,
    pub loglik_max: f64,
    pub alpha_ci: AlphaInterval,
    pub profile: ProfileCurve,
    pub boundary: BoundaryDiagnostic,
    pub warnings: Vec<String>,
}

/// Where the search for one interval endpoint starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// An α at which `L_p` is below the threshold.
    Crossing(f64),
    /// No crossing within the scanned range.
    Unbounded,
    /// The α domain ends here with `L_p` still above the threshold.
    Constraint(f64),
}

/// Solves `L_p(α) = L_p(α̂) − q/2` by bisection between α̂ and each bracket.
/// `lp` returns `None` where the profile cannot be evaluated; such points are
/// treated as outside the interval.
pub fn alpha_confidence<F: FnMut(f64) -> Option<f64>>(
    mut lp: F,
    alpha_hat: f64,
    loglik_max: f64,
    lower: Bracket,
    upper: Bracket,
    level: f64,
) -> AlphaInterval {
    let threshold = loglik_max - 0.5 * chi2_1_quantile(level);
    let mut solve = |b: Bracket| match b {
        Bracket::Unbounded => CiBound::Unbounded,
        Bracket::Constraint(a) => CiBound::Constraint(a),
        Bracket::Crossing(out) => {
            let (mut inside, mut outside) = (alpha_hat, out);
            let mut best = (f64::INFINITY, out);
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                match lp(mid) {
                    Some(v) => {
                        let r = v - threshold;
                        if r.abs() < best.0 {
                            best = (r.abs(), mid);
                        }
                        if r.abs() < CI_RESIDUAL_TOL {
                            return CiBound::Finite(mid);
                        }
                        if r > 0.0 {
                            inside = mid;
                        } else {
                            outside = mid;
                        }
                    }
                    None => outside = mid,
                }
                if (outside - inside).abs() < CI_WIDTH_TOL {
                    break;
                }
            }
            CiBound::Finite(if best.0.is_finite() { best.1 } else { 0.5 * (inside + outside) })
        }
    };
    let lo = solve(lower);
    let hi = solve(upper);
    AlphaInterval { lower: lo, upper: hi, level }
}

#[derive(Debug, Clone)]
struct Point {
    alpha: f64,
    fit: Option<InnerFit>,
}

struct Profiler<'a> {
    data: &'a Dataset,
    model: &'a Model,
    /// Every successful evaluation, for warm starts.
    cache: Vec<InnerFit>,
    fallback: ParamVector,
}

impl Profiler<'_> {
    fn nearest_start(&self, alpha: f64) -> ParamVector {
        self.cache
            .iter()
            .min_by(|a, b| (a.params.alpha - alpha).abs().total_cmp(&(b.params.alpha - alpha).abs()))
            .map(|f| f.params.clone())
            .unwrap_or_else(|| self.fallback.clone())
    }

    fn eval_from(&mut self, alpha: f64, start: &ParamVector) -> Option<InnerFit> {
        let mut res = inner_maximize(self.data, self.model, alpha, start).ok();
        if res.is_none() {
            // retry from the decoupled fit
            res = inner_maximize(self.data, self.model, alpha, &self.fallback).ok();
        }
        if let Some(f) = &res {
            self.cache.push(f.clone());
        }
        res
    }

    fn eval(&mut self, alpha: f64) -> Option<InnerFit> {
        if let Some(f) = self.cache.iter().find(|f| f.params.alpha == alpha) {
            return Some(f.clone());
        }
        let start = self.nearest_start(alpha);
        self.eval_from(alpha, &start)
    }

    fn best(&self) -> Option<&InnerFit> {
        self.cache.iter().max_by(|a, b| a.loglik.total_cmp(&b.loglik))
    }
}

struct Flank {
    sign: f64,
    pos: f64,
    step: f64,
    count: usize,
    failures: usize,
    last: Option<f64>,
    falling: bool,
    warm: ParamVector,
    exhausted: bool,
}

fn auto_grid(prof: &mut Profiler, center: &InnerFit, base_step: f64, threshold_drop: f64, allow_negative: bool, points: &mut Vec<Point>) {
    let mut flanks: Vec<Flank> = [1.0, -1.0]
        .into_iter()
        .filter(|&s| s > 0.0 || allow_negative)
        .map(|sign| Flank {
            sign,
            pos: 0.0,
            step: base_step,
            count: 0,
            failures: 0,
            last: Some(center.loglik),
            falling: false,
            warm: center.params.clone(),
            exhausted: false,
        })
        .collect();
    loop {
        let lmax = prof.best().map_or(center.loglik, |f| f.loglik);
        let mut progressed = false;
        for fl in flanks.iter_mut() {
            let done = fl.falling && fl.last.is_some_and(|l| l < lmax - threshold_drop - GRID_MARGIN);
            if done || fl.exhausted {
                continue;
            }
            fl.count += 1;
            if fl.count > 1 && (fl.count - 1) % GRID_DOUBLING_EVERY == 0 {
                fl.step *= 2.0;
            }
            fl.pos += fl.sign * fl.step;
            let warm = fl.warm.clone();
            let fit = prof.eval_from(fl.pos, &warm);
            match &fit {
                Some(f) => {
                    fl.falling = fl.last.is_some_and(|l| f.loglik < l);
                    fl.last = Some(f.loglik);
                    fl.warm = f.params.clone();
                    fl.failures = 0;
                }
                None => fl.failures += 1,
            }
            points.push(Point { alpha: fl.pos, fit });
            if fl.count >= GRID_POINTS_PER_SIDE || fl.failures >= GRID_FAILURE_RUN {
                fl.exhausted = true;
            }
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
}

fn explicit_grid(prof: &mut Profiler, alphas: &[f64], points: &mut Vec<Point>) -> Result<()> {
    let mut grid: Vec<f64> = alphas.to_vec();
    if grid.is_empty() || grid.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config("α grid must be a non-empty list of finite values".into()));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let k0 = (0..grid.len())
        .min_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()))
        .expect("grid is non-empty");
    let center = prof.eval(grid[k0]);
    points.push(Point { alpha: grid[k0], fit: center.clone() });
    for range in [(k0 + 1..grid.len()).collect::<Vec<_>>(), (0..k0).rev().collect()] {
        let mut warm = center.as_ref().map(|f| f.params.clone());
        for k in range {
            let fit = match &warm {
                Some(w) => {
                    let w = w.clone();
                    prof.eval_from(grid[k], &w)
                }
                None => prof.eval(grid[k]),
            };
            if let Some(f) = &fit {
                warm = Some(f.params.clone());
            }
            points.push(Point { alpha: grid[k], fit });
        }
    }
    Ok(())
}

fn golden_section(prof: &mut Profiler, mut a: f64, mut b: f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let value = |prof: &mut Profiler, x: f64| prof.eval(x).map_or(f64::NEG_INFINITY, |f| f.loglik);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = value(prof, c);
    let mut fd = value(prof, d);
    while (b - a).abs() > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = value(prof, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = value(prof, d);
        }
    }
    value(prof, 0.5 * (a + b));
}

fn grid_scale(data: &Dataset, model: &Model, start: &ParamVector) -> f64 {
    if !model.mechanism.is_standardized() {
        return 1.0;
    }
    let eta = &data.x * &start.beta;
    let mean_mu = eta
        .iter()
        .map(|&e| model.family.clamp_mean(model.family.link().inverse(e)))
        .sum::<f64>()
        / data.n().max(1) as f64;
    if mean_mu > 0.0 && mean_mu.is_finite() {
        1.0 / mean_mu
    } else {
        1.0
    }
}

/// Maximizes the profile log-likelihood `L_p(α) = max_θ log L(α, θ)`.
pub fn profile_maximize(data: &Dataset, model: &Model, options: &ProfileOptions) -> Result<FitReport> {
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::Config(format!("confidence level must be in (0,1), got {}", options.level)));
    }
    data.check_support(&model.family)?;
    let start = decoupled_start(data, model)?;
    let mut prof = Profiler { data, model, cache: Vec::new(), fallback: start.clone() };
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    let half_q = 0.5 * chi2_1_quantile(options.level);
    let nonneg = model.mechanism.alpha_nonnegative();

    match &options.grid {
        GridConfig::Auto => {
            let center = prof.eval(0.0).ok_or_else(|| Error::NonConvergence {
                iterations: MAX_ITER,
                grad_norm: f64::NAN,
                context: "inner maximization at α=0".into(),
            })?;
            points.push(Point { alpha: 0.0, fit: Some(center.clone()) });
            let step = 0.25 * grid_scale(data, model, &start);
            auto_grid(&mut prof, &center, step, half_q, !nonneg, &mut points);
        }
        GridConfig::Explicit(alphas) => {
            if nonneg && alphas.iter().any(|&a| a < 0.0) {
                return Err(Error::Config(format!("mechanism '{}' needs α ≥ 0", model.mechanism.key())));
            }
            explicit_grid(&mut prof, alphas, &mut points)?;
        }
    }
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));

    let dropped = points.iter().filter(|p| p.fit.is_none()).count();
    for p in points.iter().filter(|p| p.fit.is_none()) {
        warnings.push(format!("inner fit failed at α={}; point dropped", p.alpha));
    }
    if dropped as f64 > MAX_DROPPED_FRACTION * points.len() as f64 || dropped == points.len() {
        return Err(Error::NonConvergence {
            iterations: MAX_ITER,
            grad_norm: f64::NAN,
            context: format!("{dropped} of {} profile points failed", points.len()),
        });
    }
    let ok: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.fit.as_ref().map(|f| (p.alpha, f.loglik)))
        .collect();
    let k = (0..ok.len()).max_by(|&a, &b| ok[a].1.total_cmp(&ok[b].1)).expect("some points succeeded");

    let boundary = if ok.len() == 1 || k == 0 && nonneg && ok[0].0 == 0.0 {
        BoundaryDiagnostic::AtConstraint
    } else if k == 0 {
        BoundaryDiagnostic::MonotoneDecreasing
    } else if k + 1 == ok.len() {
        BoundaryDiagnostic::MonotoneIncreasing
    } else {
        golden_section(&mut prof, ok[k - 1].0, ok[k + 1].0);
        BoundaryDiagnostic::Interior
    };
    if boundary != BoundaryDiagnostic::Interior {
        warnings.push(format!("profile log-likelihood has no interior maximum ({boundary:?})"));
    }
    let best = prof.best().expect("some points succeeded").clone();
    let alpha_hat = best.params.alpha;
    let lmax = best.loglik;
    let threshold = lmax - half_q;

    let lower = match ok.iter().rev().find(|&&(a, l)| a < alpha_hat && l < threshold) {
        Some(&(a, _)) => Bracket::Crossing(a),
        None if nonneg && ok[0].0 == 0.0 => Bracket::Constraint(0.0),
        None if ok.len() == 1 => Bracket::Constraint(alpha_hat),
        None => Bracket::Unbounded,
    };
    let upper = match ok.iter().find(|&&(a, l)| a > alpha_hat && l < threshold) {
        Some(&(a, _)) => Bracket::Crossing(a),
        None if ok.len() == 1 => Bracket::Constraint(alpha_hat),
        None => Bracket::Unbounded,
    };
    let ci = alpha_confidence(|a| prof.eval(a).map(|f| f.loglik), alpha_hat, lmax, lower, upper, options.level);

    // curve: grid points, the maximizer, interval endpoints and plotting points
    let mut extra = vec![alpha_hat];
    extra.extend(ci.lower.value());
    extra.extend(ci.upper.value());
    if options.densify > 0 {
        let lo = ci.lower.value().unwrap_or(alpha_hat);
        let hi = ci.upper.value().unwrap_or(alpha_hat);
        if hi > lo {
            let m = options.densify;
            extra.extend((1..=m).map(|i| lo + (hi - lo) * i as f64 / (m + 1) as f64));
        }
    }
    for a in extra {
        if points.iter().all(|p| p.alpha != a) {
            let fit = prof.eval(a);
            points.push(Point { alpha: a, fit });
        }
    }
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let profile = ProfileCurve {
        alphas: points.iter().map(|p| p.alpha).collect(),
        loglik: points.iter().map(|p| p.fit.as_ref().map(|f| f.loglik)).collect(),
        rel_loglik: points.iter().map(|p| p.fit.as_ref().map(|f| f.loglik - lmax)).collect(),
        theta_at: points
            .iter()
            .map(|p| p.fit.as_ref().map(|f| f.params.theta().iter().copied().collect()))
            .collect(),
        status: points
            .iter()
            .map(|p| if p.fit.is_some() { PointStatus::Ok } else { PointStatus::Failed })
            .collect(),
    };

    let (std_err, ratio) = match standard_errors(data, model, &best.params) {
        Ok((s, r)) => (Some(s), Some(r)),
        Err(e) => {
            warnings.push(format!("standard errors withheld: {e}"));
            (None, None)
        }
    };
    let tails = crate::likelihood::score(data, model, &best.params)?.tail_warnings;
    if tails > 0 {
        warnings.push(format!("{tails} observations have truncated-series tail mass above 1e-10"));
    }
    Ok(FitReport {
        alpha_hat,
        params: best.params,
        std_err,
        ratio,
        loglik_max: lmax,
        alpha_ci: ci,
        profile,
        boundary,
        warnings,
    })
}

/// Profile log-likelihood at the given α values, warm-started outward from the one nearest 0.
pub fn profile_points(data: &Dataset, model: &Model, alphas: &[f64]) -> Result<ProfileCurve> {
    data.check_support(&model.family)?;
    let start = decoupled_start(data, model)?;
    let mut prof = Profiler { data, model, cache: Vec::new(), fallback: start };
    let mut points = Vec::new();
    explicit_grid(&mut prof, alphas, &mut points)?;
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let lmax = points
        .iter()
        .filter_map(|p| p.fit.as_ref().map(|f| f.loglik))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ProfileCurve {
        alphas: points.iter().map(|p| p.alpha).collect(),
        loglik: points.iter().map(|p| p.fit.as_ref().map(|f| f.loglik)).collect(),
        rel_loglik: points.iter().map(|p| p.fit.as_ref().map(|f| f.loglik - lmax)).collect(),
        theta_at: points
            .iter()
            .map(|p| p.fit.as_ref().map(|f| f.params.theta().iter().copied().collect()))
            .collect(),
        status: points
            .iter()
            .map(|p| if p.fit.is_some() { PointStatus::Ok } else { PointStatus::Failed })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_on_quadratic_profile() {
        // L_p(α) = −(α − 1)² / (2·0.3²)
        let lp = |a: f64| Some(-(a - 1.0) * (a - 1.0) / (2.0 * 0.09));
        let ci = alpha_confidence(lp, 1.0, 0.0, Bracket::Crossing(-3.0), Bracket::Crossing(4.0), 0.95);
        let z = chi2_1_quantile(0.95).sqrt() * 0.3;
        let (lo, hi) = (ci.lower.value().unwrap(), ci.upper.value().unwrap());
        assert!((lo - (1.0 - z)).abs() < 1e-5);
        assert!((hi - (1.0 + z)).abs() < 1e-5);
        let q = chi2_1_quantile(0.95);
        for e in [lo, hi] {
            assert!((2.0 * (0.0 - lp(e).unwrap()) - q).abs() < 2e-5);
        }
    }

    #[test]
    fn interval_flags_pass_through() {
        let ci = alpha_confidence(|_| Some(0.0), 0.0, 0.0, Bracket::Constraint(0.0), Bracket::Unbounded, 0.9);
        assert_eq!(ci.lower, CiBound::Constraint(0.0));
        assert_eq!(ci.upper, CiBound::Unbounded);
    }

    #[test]
    fn modified_newton_direction_ascends() {
        let neg_h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let s = DVector::from_vec(vec![1.0, 1.0]);
        let d = newton_direction(&neg_h, &s);
        assert!(s.dot(&d) > 0.0);
    }
}
