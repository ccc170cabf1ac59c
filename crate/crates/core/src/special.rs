//! Gaussian helper functions evaluated in the log domain.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Φ(x), the standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// ln φ(x).
pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// ln of the Gaussian density N(x; mean, sd).
pub fn ln_gauss(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// 1 − xM(x) with M the Mills ratio Φ(−x)/φ(x), for x ≥ 5.
fn one_minus_x_mills(x: f64) -> f64 {
    if x < 30.0 {
        let m = norm_cdf(-x) / (-0.5 * x * x).exp() * (2.0 * PI).sqrt();
        1.0 - x * m
    } else {
        // Σ_{n≥1} (−1)^{n+1} (2n−1)!! / x^{2n}
        let y = 1.0 / (x * x);
        let mut term = y;
        let mut sum = 0.0;
        for n in 1..10 {
            sum += term;
            term *= -((2 * n + 1) as f64) * y;
        }
        sum
    }
}

/// ln g(t) for g(t) = tΦ(t) + φ(t) = ∫_{−t}^∞ (t + z) φ(z) dz > 0.
pub fn ln_g(t: f64) -> f64 {
    if t > -5.0 {
        (t * norm_cdf(t) + (-0.5 * t * t).exp() / (2.0 * PI).sqrt()).ln()
    } else {
        ln_norm_pdf(t) + one_minus_x_mills(-t).ln()
    }
}

/// ln Σ exp(x_i), ignoring −∞ entries.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_branches_join() {
        for t in [-5.0 - 1e-12, -5.0 + 1e-12] {
            let direct = t * norm_cdf(t) + (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
            assert!((ln_g(t) - direct.ln()).abs() < 1e-8, "{t}");
        }
        // series and erfc forms agree at the switch
        let a = one_minus_x_mills(30.0 - 1e-9);
        let b = one_minus_x_mills(30.0 + 1e-9);
        assert!(((a - b) / a).abs() < 1e-9);
    }

    #[test]
    fn g_far_tail() {
        // g(t) ≈ φ(t)/t² for t → −∞
        let t = -200.0;
        let approx = ln_norm_pdf(t) - 2.0 * (-t).ln();
        assert!((ln_g(t) - approx).abs() < 1e-4);
        assert!(ln_g(-1e4).is_finite());
        assert!((ln_g(50.0) - 50f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_basic() {
        let v = [0.0f64, (2.0f64).ln()];
        assert!((log_sum_exp(v.iter().copied()) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY].iter().copied()), f64::NEG_INFINITY);
    }
}
