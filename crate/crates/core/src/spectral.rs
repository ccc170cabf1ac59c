//! Windowed discrete Fourier reconstruction of work distributions.

use crate::error::{Error, Result};
use crate::measurement::{CharFnSeries, Provenance};
use crate::model::{QubitConfig, QuenchTag};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Rectangular,
    /// Half Hann taper cos²(πu/2T), 1 at u = 0 and 0 at u = T.
    Hann,
}

impl WindowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Hann => "hann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rectangular" => Ok(WindowKind::Rectangular),
            "hann" => Ok(WindowKind::Hann),
            _ => Err(Error::Parse(format!("unknown window {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub kind: WindowKind,
}

impl WindowSpec {
    pub fn rectangular() -> Self {
        WindowSpec {
            kind: WindowKind::Rectangular,
        }
    }

    pub fn weight(&self, u: f64, t_window: f64) -> f64 {
        match self.kind {
            WindowKind::Rectangular => 1.0,
            WindowKind::Hann => {
                let c = (0.5 * PI * u / t_window).cos();
                (c * c).clamp(0.0, 1.0)
            }
        }
    }

    fn weights(&self, s: &CharFnSeries) -> Vec<f64> {
        (0..s.n_steps).map(|i| self.weight(s.time(i), s.t_window)).collect()
    }
}

/// p̄_Q(W_k) on W_k = kπ/T for k = k_min, k_min + 1, ...
#[derive(Clone, Debug, PartialEq)]
pub struct WorkDistEstimate {
    pub t_window: f64,
    pub n_steps: usize,
    pub k_min: i64,
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
    pub window: WindowKind,
    pub tag: Option<QuenchTag>,
}

impl WorkDistEstimate {
    pub fn spacing(&self) -> f64 {
        PI / self.t_window
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.values.len() as i64 - 1
    }

    pub fn w(&self, i: usize) -> f64 {
        (self.k_min + i as i64) as f64 * self.spacing()
    }

    pub fn w_grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.w(i)).collect()
    }

    pub fn index_of(&self, k: i64) -> Option<usize> {
        (k >= self.k_min && k <= self.k_max()).then(|| (k - self.k_min) as usize)
    }

    /// Σ_k p̄(W_k) π/T.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    /// Mean of the grid distribution Σ W_k p̄(W_k) / Σ p̄(W_k).
    pub fn grid_mean(&self) -> f64 {
        let s: f64 = self.values.iter().sum();
        self.values.iter().enumerate().map(|(i, p)| self.w(i) * p).sum::<f64>() / s
    }
}

/// Direct evaluation of (Δu/2π)(1 + 2 Re Σ_j e^{−iW_k u_j} χ(u_j) w(u_j)) for
/// k_min ≤ k ≤ k_max. Since W_k u_j = πkj/N the phases are looked up exactly.
pub fn work_distribution(series: &CharFnSeries, window: WindowSpec, k_range: (i64, i64)) -> Result<WorkDistEstimate> {
    series.validate()?;
    let (k_min, k_max) = k_range;
    if k_max < k_min {
        return Err(Error::Config(format!("empty k range [{k_min}, {k_max}]")));
    }
    let n = series.n_steps;
    let two_n = 2 * n as i64;
    let table: Vec<C64> = (0..two_n).map(|m| C64::from_polar(1.0, -PI * m as f64 / n as f64)).collect();
    let weighted: Vec<C64> = window.weights(series).iter().zip(&series.values).map(|(w, chi)| chi * w).collect();
    let pref = series.du() / (2.0 * PI);
    let var = variance_of_estimate(series, window, 0.0);
    let mut values = Vec::with_capacity((k_max - k_min + 1) as usize);
    for k in k_min..=k_max {
        let kk = k.rem_euclid(two_n);
        let mut acc = 0.0;
        let mut idx = 0i64;
        for z in &weighted {
            idx += kk;
            if idx >= two_n {
                idx -= two_n;
            }
            // Re(e^{-iθ} z)
            let e = table[idx as usize];
            acc += e.re * z.re - e.im * z.im;
        }
        values.push(pref * (1.0 + 2.0 * acc));
    }
    Ok(WorkDistEstimate {
        t_window: series.t_window,
        n_steps: n,
        k_min,
        variances: vec![var; values.len()],
        values,
        window: window.kind,
        tag: series.tag,
    })
}

/// Same sum at arbitrary work values (off the canonical grid).
pub fn work_distribution_at(series: &CharFnSeries, window: WindowSpec, ws: &[f64]) -> Vec<f64> {
    let pref = series.du() / (2.0 * PI);
    let weights = window.weights(series);
    ws.iter()
        .map(|&w| {
            let acc: f64 = (0..series.n_steps)
                .map(|i| (C64::from_polar(weights[i], -w * series.time(i)) * series.values[i]).re)
                .sum();
            pref * (1.0 + 2.0 * acc)
        })
        .collect()
}

/// Dominant-term variance 2(Δu/2π)² Σ_j w_j² Var[χ̄_j]; the same at every W.
pub fn variance_of_estimate(series: &CharFnSeries, window: WindowSpec, _w: f64) -> f64 {
    let pref = series.du() / (2.0 * PI);
    let s: f64 = window.weights(series).iter().zip(&series.variances).map(|(w, v)| w * w * v).sum();
    2.0 * pref * pref * s
}

/// Variance predicted from the true |χ| for a given shot count.
pub fn predicted_variance(exact: &CharFnSeries, window: WindowSpec, coherence: C64, n_meas: u64) -> f64 {
    let pref = exact.du() / (2.0 * PI);
    let s: f64 = window
        .weights(exact)
        .iter()
        .zip(&exact.values)
        .map(|(w, chi)| w * w * crate::measurement::estimator_variance(chi.norm(), coherence, n_meas))
        .sum();
    2.0 * pref * pref * s
}

/// Covariance of p̄(W1) and p̄(W2) under the shot-noise model, with
/// the kernel term and (optionally) the smaller term arising from the
/// Hermitian extension χ(−u) = χ*(u). Plug-in χ̄ values are used.
/// Diagnostic only; inference treats grid points as independent.
pub fn covariance(
    series: &CharFnSeries,
    qubit: &QubitConfig,
    tau: f64,
    window: WindowSpec,
    w1: f64,
    w2: f64,
    include_second_term: bool,
) -> Result<f64> {
    let n_meas = match series.provenance {
        Provenance::Sampled { n_meas, .. } => n_meas,
        Provenance::Exact => return Ok(0.0),
    };
    let n = n_meas as f64;
    let ct = qubit.s_down.conj() * qubit.s_up; // forward-map amplitude / 2
    let pref = series.du() / (2.0 * PI);
    let mut acc = 0.0;
    for i in 0..series.n_steps {
        let u = series.time(i);
        let w = window.weight(u, series.t_window);
        let phi = qubit.phase_of(tau, u);
        let z = 2.0 * ct * C64::from_polar(1.0, -phi) * series.values[i];
        let (sx, sy) = (z.re.clamp(-1.0, 1.0), z.im.clamp(-1.0, 1.0));
        let vx = (1.0 - sx * sx) / n;
        let vy = (1.0 - sy * sy) / n;
        // δχ̄ = b (e_x + i e_y) with b = e^{iφ}/(2 s*↓ s↑)
        let b = C64::from_polar(1.0, phi) / (2.0 * ct);
        let b1 = C64::from_polar(w, -w1 * u) * b;
        let b2 = C64::from_polar(w, -w2 * u) * b;
        let same = 0.5 * (vx + vy) * (b1 * b2.conj()).re;
        let cross = 0.5 * (vx - vy) * (b1 * b2).re;
        acc += same + if include_second_term { cross } else { 0.0 };
    }
    Ok(4.0 * pref * pref * acc)
}

/// T = πβ[1 + 4e^{−σβ}].
pub fn choose_window_size(beta_guess: f64, sigma_q: f64) -> f64 {
    PI * beta_guess * (1.0 + 4.0 * (-sigma_q * beta_guess).exp())
}

/// Symmetric k range [−K, K] such that W_K covers |μ| + 6σ of both
/// distributions; needed so every forward point W_k has its partner −W_k.
pub fn symmetric_k_range(t_window: f64, forward: (f64, f64), backward: (f64, f64)) -> (i64, i64) {
    let reach = (forward.0.abs() + 6.0 * forward.1).max(backward.0.abs() + 6.0 * backward.1);
    let k = (reach * t_window / PI).ceil().max(1.0) as i64;
    (-k, k)
}

/// Threshold applied to N_steps·τ_deph/T. The underlying requirement is only
/// "much larger than one"; 20 is a chosen cut.
pub const ALIASING_THRESHOLD: f64 = 20.0;
pub const WINDOW_THRESHOLD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeakageAliasingReport {
    /// N_steps τ_deph / T = τ_deph/Δu.
    pub aliasing_ratio: f64,
    /// T/(πβ_guess).
    pub window_ratio: f64,
    pub aliasing_pass: bool,
    pub window_pass: bool,
}

pub fn leakage_aliasing_report(series: &CharFnSeries, sigma_q: f64, beta_guess: f64) -> LeakageAliasingReport {
    let tau_deph = 1.0 / sigma_q;
    let aliasing_ratio = series.n_steps as f64 * tau_deph / series.t_window;
    let window_ratio = series.t_window / (PI * beta_guess);
    LeakageAliasingReport {
        aliasing_ratio,
        window_ratio,
        aliasing_pass: aliasing_ratio >= ALIASING_THRESHOLD,
        window_pass: window_ratio >= WINDOW_THRESHOLD,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShortTimeCumulants {
    pub mean: f64,
    pub variance: f64,
    pub kappa3: f64,
}

/// First three cumulants from central finite differences of ln χ at u = 0,
/// using χ(0) = 1 and χ(−u) = χ*(u) with the first three grid points.
pub fn short_time_cumulants(series: &CharFnSeries) -> Result<ShortTimeCumulants> {
    if series.n_steps < 3 {
        return Err(Error::Config("need at least three points for short-time cumulants".into()));
    }
    let h = series.du();
    // continuous branch of ln χ
    let mut prev = 0.0;
    let mut logs = [C64::new(0.0, 0.0); 3];
    for (i, l) in logs.iter_mut().enumerate() {
        let z = series.values[i];
        if z.norm() == 0.0 {
            return Err(Error::Numerical("characteristic function vanishes near u = 0".into()));
        }
        let mut arg = z.arg();
        while arg - prev > PI {
            arg -= 2.0 * PI;
        }
        while arg - prev < -PI {
            arg += 2.0 * PI;
        }
        prev = arg;
        *l = C64::new(z.norm().ln(), arg);
    }
    let (f1, f2, f3) = (logs[0], logs[1], logs[2]);
    let mean = (16.0 * f1.im - 2.0 * f2.im) / (12.0 * h);
    let variance = (2.0 * f2.re - 32.0 * f1.re) / (12.0 * h * h);
    let kappa3 = -2.0 * (-f3.im + 8.0 * f2.im - 13.0 * f1.im) / (8.0 * h * h * h);
    Ok(ShortTimeCumulants { mean, variance, kappa3 })
}
