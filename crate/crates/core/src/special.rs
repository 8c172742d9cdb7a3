//! Scalar special functions shared by the families, the mechanisms and the
//! estimator: standard normal distribution helpers, log-gamma, the
//! chi-square(1) quantile and a compensated accumulator.

use statrs::function::erf;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this point the normal lower tail is evaluated through the Mills ratio.
const MILLS_SWITCH: f64 = -5.0;

pub fn norm_pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

pub fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(t)`, accurate for large `t`.
pub fn norm_sf(t: f64) -> f64 {
    norm_cdf(-t)
}

/// `Φ(-x) / φ(x)` for `x >= 5` by the Laplace continued fraction.
fn mills_upper(x: f64) -> f64 {
    let mut v = x;
    for k in (1..=120).rev() {
        v = x + k as f64 / v;
    }
    1.0 / v
}

pub fn norm_log_cdf(t: f64) -> f64 {
    if t < MILLS_SWITCH {
        -0.5 * t * t - LN_SQRT_2PI + mills_upper(-t).ln()
    } else if t > 5.0 {
        (-norm_sf(t)).ln_1p()
    } else {
        norm_cdf(t).ln()
    }
}

/// Inverse Mills ratio `φ(t) / Φ(t)`.
pub fn norm_hazard_lower(t: f64) -> f64 {
    if t < MILLS_SWITCH {
        1.0 / mills_upper(-t)
    } else {
        norm_pdf(t) / norm_cdf(t)
    }
}

/// `Φ⁻¹(p)` for `p` in (0, 1), polished with one Newton step on the smaller tail.
pub fn norm_quantile(p: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    if z <= 0.0 {
        z - (norm_cdf(z) - p) / norm_pdf(z)
    } else {
        z + (norm_sf(z) - (1.0 - p)) / norm_pdf(z)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Quantile of the χ²₁ distribution at `level`, via `P(|Z| ≤ z) = erf(z/√2)`.
pub fn chi2_1_quantile(level: f64) -> f64 {
    let z = erf::erf_inv(level);
    2.0 * z * z
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tails_agree_with_direct_evaluation() {
        for &t in &[-30.0, -12.0, -7.5, -5.01, -4.99, -1.0, 0.0, 2.0, 6.0] {
            let direct = norm_cdf(t);
            let via_log = norm_log_cdf(t).exp();
            assert!((via_log / direct - 1.0).abs() < 1e-12, "t={t}: {via_log} vs {direct}");
            let hz = norm_pdf(t) / direct;
            assert!((norm_hazard_lower(t) / hz - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn log_cdf_far_tail_is_finite() {
        let v = norm_log_cdf(-60.0);
        assert!(v.is_finite());
        // leading term of the asymptotic expansion
        let lead = -1800.0 - LN_SQRT_2PI - 60f64.ln();
        assert!((v - lead).abs() < 1e-3);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.025, 0.5, 0.9, 0.999_999] {
            let z = norm_quantile(p);
            assert!((norm_cdf(z) / p - 1.0).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn chi2_quantile_at_95() {
        assert!((chi2_1_quantile(0.95) - 3.841_458_820_694_124).abs() < 1e-9);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
