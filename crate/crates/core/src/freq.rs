//! Weighted least-squares fit of the Crooks log ratio L(W) = β(W − ΔF).

use crate::bayes::check_pairable;
use crate::error::{Error, Result};
use crate::spectral::WorkDistEstimate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Relative magnitude cut applied to noiseless inputs, where the
/// signal-to-noise filter is undefined.
pub const NOISELESS_REL_CUT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exclusion {
    NonPositive,
    LowSignal,
    BelowMagnitudeCut,
    TooFewDraws,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRatioPoint {
    pub w: f64,
    /// Raw ln(p̄_F(W)/p̄_B(−W)), NaN when undefined.
    pub l_raw: f64,
    /// Bias-corrected estimate L̄ = L̄′ − ΔL.
    pub l_bar: f64,
    pub bias: f64,
    pub variance: f64,
    pub excluded: Option<Exclusion>,
}

impl LogRatioPoint {
    pub fn included(&self) -> bool {
        self.excluded.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRatioPoints {
    pub points: Vec<LogRatioPoint>,
}

impl LogRatioPoints {
    pub fn n_included(&self) -> usize {
        self.points.iter().filter(|p| p.included()).count()
    }
}

/// Builds per-W log-ratio estimates with simulated bias and variance.
///
/// Noiseless inputs (both variances zero) get unit weights and are restricted
/// to points where both distributions exceed `NOISELESS_REL_CUT` of their peak.
pub fn log_ratio_points(f: &WorkDistEstimate, b: &WorkDistEstimate, n_resample: usize, seed: u64) -> Result<LogRatioPoints> {
    check_pairable(f, b)?;
    let peak_f = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak_b = b.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut points = Vec::new();
    for (i, (&pf, &vf)) in f.values.iter().zip(&f.variances).enumerate() {
        let k = f.k_min + i as i64;
        let Some(j) = b.index_of(-k) else { continue };
        let (pb, vb) = (b.values[j], b.variances[j]);
        let w = f.w(i);
        let mut pt = LogRatioPoint {
            w,
            l_raw: f64::NAN,
            l_bar: f64::NAN,
            bias: 0.0,
            variance: f64::NAN,
            excluded: None,
        };
        if !(pf > 0.0 && pb > 0.0) {
            pt.excluded = Some(Exclusion::NonPositive);
            points.push(pt);
            continue;
        }
        pt.l_raw = (pf / pb).ln();
        if vf == 0.0 && vb == 0.0 {
            pt.l_bar = pt.l_raw;
            pt.variance = 1.0;
            if pf < NOISELESS_REL_CUT * peak_f || pb < NOISELESS_REL_CUT * peak_b {
                pt.excluded = Some(Exclusion::BelowMagnitudeCut);
            }
            points.push(pt);
            continue;
        }
        if vf / (pf * pf) > 1.0 || vb / (pb * pb) > 1.0 {
            pt.excluded = Some(Exclusion::LowSignal);
            points.push(pt);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let (sf, sb) = (vf.sqrt(), vb.sqrt());
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for _ in 0..n_resample {
            let zf: f64 = StandardNormal.sample(&mut rng);
            let zb: f64 = StandardNormal.sample(&mut rng);
            let (df, db) = (pf + sf * zf, pb + sb * zb);
            if df <= 0.0 || db <= 0.0 {
                continue;
            }
            let l = (df / db).ln();
            n += 1;
            let d = l - mean;
            mean += d / n as f64;
            m2 += d * (l - mean);
        }
        if n < 2 || m2 <= 0.0 {
            pt.excluded = Some(Exclusion::TooFewDraws);
            points.push(pt);
            continue;
        }
        pt.bias = mean - pt.l_raw;
        pt.l_bar = pt.l_raw - pt.bias;
        pt.variance = m2 / (n - 1) as f64;
        points.push(pt);
    }
    Ok(LogRatioPoints { points })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub beta: f64,
    pub delta_f: f64,
    pub var_beta: f64,
    pub var_delta_f: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
}

impl FitReport {
    pub fn sigma_beta(&self) -> f64 {
        self.var_beta.sqrt()
    }

    pub fn sigma_delta_f(&self) -> f64 {
        self.var_delta_f.sqrt()
    }
}

/// Minimizes Σ_k (L̄_k − a W_k − b)²/Var_k; β = a, ΔF = −b/a.
pub fn weighted_fit(points: &LogRatioPoints) -> Result<FitReport> {
    let used: Vec<&LogRatioPoint> = points.points.iter().filter(|p| p.included()).collect();
    if used.len() < 3 {
        return Err(Error::Inference(format!("only {} usable log-ratio points", used.len())));
    }
    let s1: f64 = used.iter().map(|p| 1.0 / p.variance).sum();
    let wbar = used.iter().map(|p| p.w / p.variance).sum::<f64>() / s1;
    let lbar = used.iter().map(|p| p.l_bar / p.variance).sum::<f64>() / s1;
    let sxx: f64 = used.iter().map(|p| (p.w - wbar).powi(2) / p.variance).sum();
    let sxy: f64 = used.iter().map(|p| (p.w - wbar) * (p.l_bar - lbar) / p.variance).sum();
    if !(sxx > 1e-300) {
        return Err(Error::Inference("degenerate design: all work values coincide".into()));
    }
    let a = sxy / sxx;
    let b = lbar - a * wbar;
    let va = 1.0 / sxx;
    let vb = 1.0 / s1 + wbar * wbar / sxx;
    let cov = -wbar / sxx;
    let var_df = vb / (a * a) + b * b * va / a.powi(4) - 2.0 * b / a.powi(3) * cov;
    Ok(FitReport {
        beta: a,
        delta_f: -b / a,
        var_beta: va,
        var_delta_f: var_df,
        slope: a,
        intercept: b,
        n_points: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(data: &[(f64, f64, f64)]) -> LogRatioPoints {
        LogRatioPoints {
            points: data
                .iter()
                .map(|&(w, l, v)| LogRatioPoint {
                    w,
                    l_raw: l,
                    l_bar: l,
                    bias: 0.0,
                    variance: v,
                    excluded: None,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_line() {
        let p = pts(&[(-1.0, 2.0 * (-1.3), 1.0), (0.0, -0.6, 1.0), (0.5, 0.4, 1.0), (2.0, 3.4, 1.0)]);
        let f = weighted_fit(&p).unwrap();
        assert!((f.beta - 2.0).abs() < 1e-14);
        assert!((f.delta_f - 0.3).abs() < 1e-14);
    }

    #[test]
    fn residuals_orthogonal() {
        let data: Vec<(f64, f64, f64)> = (0..9)
            .map(|i| {
                let w = i as f64 * 0.37 - 1.0;
                (w, 1.3 * w + 0.2 + 0.05 * ((i * 7 % 5) as f64 - 2.0), 0.01 + 0.003 * i as f64)
            })
            .collect();
        let p = pts(&data);
        let f = weighted_fit(&p).unwrap();
        let (mut r0, mut r1) = (0.0, 0.0);
        for &(w, l, v) in &data {
            let r = l - f.slope * w - f.intercept;
            r0 += r / v;
            r1 += w * r / v;
        }
        assert!(r0.abs() < 1e-10 && r1.abs() < 1e-10);
    }

    #[test]
    fn variance_formula_matches_sums() {
        let data = [(0.1, 0.0, 0.5), (0.4, 0.1, 0.2), (0.9, 0.3, 0.7), (1.5, 0.2, 0.1)];
        let f = weighted_fit(&pts(&data)).unwrap();
        let s1: f64 = data.iter().map(|d| 1.0 / d.2).sum();
        let sw: f64 = data.iter().map(|d| d.0 / d.2).sum();
        let sw2: f64 = data.iter().map(|d| d.0 * d.0 / d.2).sum();
        let expected = (1.0 / s1) / (sw2 / s1 - (sw / s1).powi(2));
        assert!((f.var_beta - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn degenerate_and_sparse() {
        assert!(weighted_fit(&pts(&[(1.0, 0.0, 1.0), (1.0, 1.0, 1.0), (1.0, 2.0, 1.0)])).is_err());
        assert!(weighted_fit(&pts(&[(1.0, 0.0, 1.0), (2.0, 1.0, 1.0)])).is_err());
    }

    fn estimate(values: Vec<f64>, variances: Vec<f64>, k_min: i64) -> WorkDistEstimate {
        WorkDistEstimate {
            t_window: 3.0,
            n_steps: 100,
            k_min,
            values,
            variances,
            window: crate::spectral::WindowKind::Rectangular,
            tag: None,
        }
    }

    #[test]
    fn noiseless_points_are_exact() {
        let t = 3.0;
        let dw = std::f64::consts::PI / t;
        let (beta, df) = (1.7, 0.25);
        let ks: Vec<i64> = (-6..=6).collect();
        let pb_at = |w: f64| (-(w + 0.3) * (w + 0.3)).exp();
        // p_F(W) = e^{β(W−ΔF)} p_B(−W)
        let f = estimate(
            ks.iter()
                .map(|&k| (beta * (k as f64 * dw - df)).exp() * pb_at(-(k as f64) * dw))
                .collect(),
            vec![0.0; ks.len()],
            -6,
        );
        let b = estimate(ks.iter().map(|&k| pb_at(k as f64 * dw)).collect(), vec![0.0; ks.len()], -6);
        let p = log_ratio_points(&f, &b, 100, 1).unwrap();
        for pt in p.points.iter().filter(|p| p.included()) {
            assert_eq!(pt.bias, 0.0);
            assert!((pt.l_bar - beta * (pt.w - df)).abs() < 1e-12);
        }
        let fit = weighted_fit(&p).unwrap();
        assert!((fit.beta - beta).abs() < 1e-10 && (fit.delta_f - df).abs() < 1e-10);
    }

    #[test]
    fn exclusions() {
        let f = estimate(vec![0.5, -0.1, 0.5, 0.01], vec![0.001, 0.001, 0.001, 0.001], 0);
        let b = estimate(vec![0.5, 0.5, 0.5, 0.5], vec![0.001; 4], -3);
        let p = log_ratio_points(&f, &b, 200, 3).unwrap();
        let ex: Vec<_> = p.points.iter().map(|p| p.excluded).collect();
        assert_eq!(ex, vec![None, Some(Exclusion::NonPositive), None, Some(Exclusion::LowSignal)]);
    }

    #[test]
    fn deterministic_resampling() {
        let f = estimate(vec![0.5, 0.4, 0.3], vec![0.002; 3], -1);
        let b = estimate(vec![0.3, 0.4, 0.5], vec![0.003; 3], -1);
        assert_eq!(log_ratio_points(&f, &b, 500, 9).unwrap(), log_ratio_points(&f, &b, 500, 9).unwrap());
    }
}
