//! Closed-form superfluid model: independent phonon modes linearly driven by
//! the impurity coupling.
//!
//! Everything is evaluated in the displaced frame of H(λ_Q(0)), where the
//! shifted coupling λ'(t) = λ(t) − λ(0) starts at zero. The displacement also
//! produces a constant energy that is common to H(λ_Q(0)) and H(λ_Q(τ)); it
//! cancels in χ_Q(u) exactly, so lab-frame and shifted-frame χ coincide.

use crate::error::{Error, Result};
use crate::measurement::CharFnSeries;
use crate::model::{BhmParams, QuenchShape, QuenchSpec, QuenchTag};
use crate::quadrature;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub k: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub eta_k: C64,
}

impl Mode {
    pub fn eta_sq(&self) -> f64 {
        self.eta_k.norm_sqr()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovModel {
    pub params: BhmParams,
    pub modes: Vec<Mode>,
}

/// Per-mode quench integrals in the shifted frame.
#[derive(Clone, Debug, PartialEq)]
pub struct QuenchIntegrals {
    pub lambda: Vec<C64>,
    pub h: Vec<f64>,
    pub g: Vec<C64>,
    /// λ_Q(0), the frame shift.
    pub lambda_0: f64,
    /// λ'_Q(τ) = λ_Q(τ) − λ_Q(0).
    pub lambda_tau_prime: f64,
    /// η n' = η n − 2 λ_Q(0) Σ_k |η_k|²/ω_k.
    pub eta_n_prime: f64,
}

impl QuenchIntegrals {
    /// Shifted density n'; undefined (None) when η = 0.
    pub fn n_prime(&self, eta: f64) -> Option<f64> {
        (eta != 0.0).then(|| self.eta_n_prime / eta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cumulants {
    pub mean: f64,
    pub variance: f64,
    pub kappa3: f64,
}

impl Cumulants {
    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub fn build_model(params: &BhmParams) -> Result<BogoliubovModel> {
    params.validate()?;
    let m = params.m_sites;
    let (j, u, n, eta) = (params.hopping, params.interaction, params.density, params.eta);
    let c = params.impurity_site as f64;
    let mut modes = Vec::with_capacity(m - 1);
    for idx in 1..m {
        let k = 2.0 * PI * idx as f64 / m as f64;
        let ka = k * BhmParams::LATTICE_CONST;
        // 1 − cos ka = 2 sin²(ka/2) avoids cancellation at small k
        let s = (0.5 * ka).sin();
        let epsilon = 4.0 * j * s * s;
        let omega = (epsilon * (epsilon + 2.0 * u * n)).sqrt();
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!(
                "phonon energy not positive for mode k = {k} (omega = {omega}); check U n"
            )));
        }
        let amp = eta * (n * epsilon / (m as f64 * omega)).sqrt();
        let eta_k = C64::from_polar(amp, -k * c);
        modes.push(Mode { k, epsilon, omega, eta_k });
    }
    Ok(BogoliubovModel {
        params: params.clone(),
        modes,
    })
}

impl BogoliubovModel {
    /// S = Σ_k |η_k|²/ω_k.
    pub fn displacement_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.eta_sq() / m.omega).sum()
    }

    pub fn eta_n(&self) -> f64 {
        self.params.eta * self.params.density
    }
}

/// ω ∫₀^τ A sin²(πt/2τ) e^{−iωt} dt in closed form, or None near the
/// removable singularity at ω = π/τ.
fn lambda_sin_squared(omega: f64, tau: f64, amp: f64) -> Option<C64> {
    let a = PI / tau;
    if (omega - a).abs() < 1e-3 * a {
        return None;
    }
    let x = omega * tau;
    let sx = x.sin();
    let sh = (0.5 * x).sin();
    let ch = (0.5 * x).cos();
    let one_minus = C64::new(2.0 * sh * sh, sx); // 1 − e^{−ix}
    let one_plus = C64::new(2.0 * ch * ch, -sx); // 1 + e^{−ix}
    let i = C64::i();
    let i0 = one_minus / (i * omega);
    let ic = i * omega * one_plus / (a * a - omega * omega);
    Some(omega * 0.5 * amp * (i0 - ic))
}

fn lambda_by_quadrature(q: &QuenchSpec, omega: f64, mode_index: usize) -> Result<C64> {
    let l0 = q.lambda_i;
    let breaks: Vec<f64> = match &q.shape {
        QuenchShape::PiecewiseTable { samples } => samples.iter().map(|s| s[0]).collect(),
        _ => Vec::new(),
    };
    let r = quadrature::integrate(
        |t| C64::from_polar(q.eval(t) - l0, -omega * t),
        0.0,
        q.tau,
        &breaks,
        1e-10 / omega.max(1.0),
    );
    if !r.converged {
        return Err(Error::Numerical(format!(
            "quadrature for mode {mode_index} did not converge (error estimate {:e})",
            r.error
        )));
    }
    Ok(omega * r.value)
}

/// Λ_k = ω_k ∫₀^τ λ'(t) e^{−iω_k t} dt by adaptive quadrature regardless of shape.
pub fn lambda_quadrature(model: &BogoliubovModel, q: &QuenchSpec) -> Result<Vec<C64>> {
    model
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| lambda_by_quadrature(q, m.omega, i))
        .collect()
}

pub fn quench_integrals(model: &BogoliubovModel, q: &QuenchSpec) -> Result<QuenchIntegrals> {
    q.validate()?;
    let lambda_0 = q.lambda_i;
    let lt = q.lambda_f - q.lambda_i;
    let tau = q.tau;
    let mut lambda = Vec::with_capacity(model.modes.len());
    for (i, m) in model.modes.iter().enumerate() {
        let analytic = match q.shape {
            QuenchShape::SinSquaredRamp => lambda_sin_squared(m.omega, tau, lt),
            _ => None,
        };
        lambda.push(match analytic {
            Some(v) => v,
            None => lambda_by_quadrature(q, m.omega, i)?,
        });
    }
    let mut h = Vec::with_capacity(lambda.len());
    let mut g = Vec::with_capacity(lambda.len());
    for (m, lam) in model.modes.iter().zip(&lambda) {
        let e = C64::from_polar(1.0, -m.omega * tau);
        h.push(-lam.norm_sqr() - 2.0 * lt * (lam.conj() * e).im);
        g.push(-lam + C64::i() * lt * e);
    }
    Ok(QuenchIntegrals {
        lambda,
        h,
        g,
        lambda_0,
        lambda_tau_prime: lt,
        eta_n_prime: model.eta_n() - 2.0 * lambda_0 * model.displacement_sum(),
    })
}

/// coth(x/2), equal to 1 in double precision once x > 700.
fn coth_half(x: f64) -> f64 {
    if x > 700.0 {
        1.0
    } else {
        1.0 / (0.5 * x).tanh()
    }
}

/// ln χ_Q(u) (the branch continuous from ln χ(0) = 0).
pub fn log_chi(model: &BogoliubovModel, ints: &QuenchIntegrals, beta: f64, u: f64) -> C64 {
    let lt = ints.lambda_tau_prime;
    let lt2 = lt * lt;
    let mut x = -ints.eta_n_prime * lt * u;
    let mut y = 0.0;
    for (i, m) in model.modes.iter().enumerate() {
        let w = m.eta_sq() / (m.omega * m.omega);
        let wu = m.omega * u;
        x += w * (lt2 * wu + (ints.h[i] - lt2) * wu.sin());
        let s = (0.5 * wu).sin();
        y += 2.0 * w * ints.g[i].norm_sqr() * s * s * coth_half(beta * m.omega);
    }
    C64::new(-y, -x)
}

pub fn chi_exact(model: &BogoliubovModel, ints: &QuenchIntegrals, beta: f64, u: f64) -> C64 {
    log_chi(model, ints, beta, u).exp()
}

pub fn cumulants(model: &BogoliubovModel, ints: &QuenchIntegrals, beta: f64) -> Cumulants {
    let lt = ints.lambda_tau_prime;
    let mut mean = lt * ints.eta_n_prime;
    let mut variance = 0.0;
    let mut kappa3 = 0.0;
    for (i, m) in model.modes.iter().enumerate() {
        let e2 = m.eta_sq();
        mean -= e2 * ints.h[i] / m.omega;
        variance += e2 * ints.g[i].norm_sqr() * coth_half(beta * m.omega);
        kappa3 -= e2 * m.omega * (ints.h[i] - lt * lt);
    }
    Cumulants { mean, variance, kappa3 }
}

/// F(λ) = λ η n − λ² Σ_k |η_k|²/ω_k + (1/β) Σ_k ln(1 − e^{−βω_k}).
pub fn free_energy(model: &BogoliubovModel, lambda: f64, beta: f64) -> f64 {
    let f0: f64 = model.modes.iter().map(|m| (-(-beta * m.omega).exp()).ln_1p()).sum::<f64>() / beta;
    lambda * model.eta_n() - lambda * lambda * model.displacement_sum() + f0
}

pub fn delta_free_energy(model: &BogoliubovModel, lambda_i: f64, lambda_f: f64) -> f64 {
    // the thermal part is λ independent and cancels exactly
    let s = model.displacement_sum();
    (lambda_f - lambda_i) * model.eta_n() - (lambda_f * lambda_f - lambda_i * lambda_i) * s
}

/// Closed-form engine bundling the model with forward/backward integrals.
#[derive(Clone, Debug)]
pub struct BogoliubovEngine {
    pub model: BogoliubovModel,
    pub quench: QuenchSpec,
    pub beta: f64,
    pub forward: QuenchIntegrals,
    pub backward: QuenchIntegrals,
}

impl BogoliubovEngine {
    pub fn new(params: &BhmParams, quench: &QuenchSpec, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        let model = build_model(params)?;
        let forward = quench_integrals(&model, quench)?;
        let backward = quench_integrals(&model, &quench.reverse())?;
        Ok(BogoliubovEngine {
            model,
            quench: quench.clone(),
            beta,
            forward,
            backward,
        })
    }

    pub fn integrals(&self, tag: QuenchTag) -> &QuenchIntegrals {
        match tag {
            QuenchTag::Forward => &self.forward,
            QuenchTag::Backward => &self.backward,
        }
    }

    pub fn chi(&self, tag: QuenchTag, u: f64) -> C64 {
        chi_exact(&self.model, self.integrals(tag), self.beta, u)
    }

    pub fn cumulants(&self, tag: QuenchTag) -> Cumulants {
        cumulants(&self.model, self.integrals(tag), self.beta)
    }

    pub fn delta_f(&self) -> f64 {
        delta_free_energy(&self.model, self.quench.lambda_i, self.quench.lambda_f)
    }

    pub fn series(&self, tag: QuenchTag, t_window: f64, n_steps: usize) -> Result<CharFnSeries> {
        CharFnSeries::from_fn(t_window, n_steps, Some(tag), |u| self.chi(tag, u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize, u: f64, eta: f64) -> BhmParams {
        BhmParams {
            m_sites: m,
            hopping: 1.0,
            interaction: u,
            chem_potential: 0.0,
            density: 1.0,
            eta,
            impurity_site: m / 2,
        }
    }

    #[test]
    fn free_particle_limit() {
        let model = build_model(&params(4, 0.0, 1.0)).unwrap();
        assert_eq!(model.modes.len(), 3);
        for m in &model.modes {
            assert!((m.omega - m.epsilon).abs() < 1e-15);
            assert!((m.eta_sq() - m.epsilon / (4.0 * m.omega)).abs() < 1e-15);
        }
    }

    #[test]
    fn smallest_phonon_energy() {
        let model = build_model(&params(1000, 0.1, 1.0)).unwrap();
        let w = model.modes.iter().map(|m| m.omega).fold(f64::INFINITY, f64::min);
        // 40-digit evaluation of sqrt(ε(ε + 0.2)), ε = 2(1 − cos(2π/1000))
        assert!((w - 0.002810198583792579037882449185).abs() < 1e-17);
    }

    #[test]
    fn zero_coupling() {
        let model = build_model(&params(8, 0.1, 0.0)).unwrap();
        assert!(model.modes.iter().all(|m| m.eta_k == C64::new(0.0, 0.0)));
        let q = QuenchSpec::sin_squared(0.0, 0.5, 1.0).unwrap();
        let ints = quench_integrals(&model, &q).unwrap();
        for u in [0.3, 1.0, 10.0] {
            assert!((chi_exact(&model, &ints, 1.0, u) - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn too_few_sites() {
        assert!(build_model(&params(1, 0.1, 1.0)).is_err());
    }

    #[test]
    fn constant_path_has_no_integrals() {
        let model = build_model(&params(6, 0.1, 1.0)).unwrap();
        let q = QuenchSpec::new(0.3, 0.3, 1.0, QuenchShape::Linear).unwrap();
        let ints = quench_integrals(&model, &q).unwrap();
        assert!(ints.lambda.iter().all(|l| l.norm() == 0.0));
        let c = cumulants(&model, &ints, 1.0);
        assert_eq!((c.mean, c.variance, c.kappa3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_coupling_closed_form() {
        // λ'(t) ≡ λ via a table holding the value after a vanishing initial step
        let model = build_model(&params(6, 0.1, 1.0)).unwrap();
        let lam = 0.4;
        let tau = 1.3;
        let eps = 1e-9;
        let shape = QuenchShape::PiecewiseTable {
            samples: vec![[0.0, 0.0], [eps, lam], [tau, lam]],
        };
        let q = QuenchSpec::new(0.0, lam, tau, shape).unwrap();
        let got = lambda_quadrature(&model, &q).unwrap();
        for (m, l) in model.modes.iter().zip(got) {
            let exact = -C64::i() * lam * (C64::new(1.0, 0.0) - C64::from_polar(1.0, -m.omega * tau));
            assert!((l - exact).norm() < 1e-8, "{l} vs {exact}");
        }
    }

    #[test]
    fn analytic_ramp_matches_quadrature() {
        let model = build_model(&params(64, 0.3, 1.0)).unwrap();
        for tau in [0.1, 1.0, 3.7] {
            let q = QuenchSpec::sin_squared(0.2, -0.7, tau).unwrap();
            let a = quench_integrals(&model, &q).unwrap();
            let b = lambda_quadrature(&model, &q).unwrap();
            for (x, y) in a.lambda.iter().zip(&b) {
                assert!((x - y).norm() < 1e-9, "{x} {y}");
            }
        }
    }

    #[test]
    fn resonant_mode_uses_fallback() {
        // ω exactly π/τ
        let tau = PI / 2.0;
        assert!(lambda_sin_squared(2.0, tau, 1.0).is_none());
        let q = QuenchSpec::sin_squared(0.0, 1.0, tau).unwrap();
        let v = lambda_by_quadrature(&q, 2.0, 0).unwrap();
        let near = lambda_sin_squared(2.0 * (1.0 + 2e-3), tau, 1.0).unwrap();
        assert!((v - near).norm() < 1e-2);
    }

    #[test]
    fn zero_temperature_limit() {
        let model = build_model(&params(16, 0.2, 1.0)).unwrap();
        let q = QuenchSpec::sin_squared(0.0, 0.5, 1.0).unwrap();
        let ints = quench_integrals(&model, &q).unwrap();
        let cold = cumulants(&model, &ints, 1e6).variance;
        let bare: f64 = model.modes.iter().zip(&ints.g).map(|(m, g)| m.eta_sq() * g.norm_sqr()).sum();
        assert!((cold - bare).abs() < 1e-14);
    }

    #[test]
    fn free_energy_endpoints() {
        let model = build_model(&params(10, 0.1, 1.0)).unwrap();
        let f0: f64 = model.modes.iter().map(|m| (1.0 - (-2.0 * m.omega).exp()).ln()).sum::<f64>() / 2.0;
        assert!((free_energy(&model, 0.0, 2.0) - f0).abs() < 1e-13);
        assert_eq!(delta_free_energy(&model, 0.3, 0.3), 0.0);
        let d = free_energy(&model, 0.5, 2.0) - free_energy(&model, 0.1, 2.0);
        assert!((d - delta_free_energy(&model, 0.1, 0.5)).abs() < 1e-13);
    }
}
