//! Reference computations that share no code path with the production
//! routines they check: dense diagonalization, Fock-space oscillators,
//! brute-force sums and direct quadrature.

pub mod dense;
pub mod oscillators;

use crate::model::QuenchSpec;
use crate::quadrature::integrate;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// ω Σ λ'(t_m) e^{−iωt_m} Δt over `n` midpoints.
pub fn lambda_riemann(q: &QuenchSpec, omega: f64, n: usize) -> C64 {
    let dt = q.tau / n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let t = (k as f64 + 0.5) * dt;
        acc += C64::from_polar(q.eval(t) - q.lambda_i, -omega * t);
    }
    omega * dt * acc
}

fn gauss(x: f64, mean: f64, sd: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
}

/// C² P(p̄_F, p̄_B | R) from its definition: the Gaussian measurement model
/// integrated against the flat prior restricted to p_F = R p_B. The delta
/// constraint removes the p_F integral; the normalization over the prior box is
/// computed by quadrature as well (box side 1, the result is C independent).
pub fn likelihood_quadrature(pf: f64, sf: f64, pb: f64, sb: f64, r: f64) -> f64 {
    let rr = r.exp();
    let f = |x: f64| C64::new(x * gauss(pf, rr * x, sf) * gauss(pb, x, sb), 0.0);
    // peak of the integrand and its width
    let s2 = (sf / rr).powi(2) + sb * sb;
    let m = ((pf / rr) * sb * sb + pb * (sf / rr).powi(2)) / s2;
    let v = (sf / rr) * sb / s2.sqrt();
    let hi = m.max(0.0) + 40.0 * v + 40.0 * (sb + sf / rr);
    let mut breaks: Vec<f64> = (-8..=8).map(|k| m + k as f64 * v).filter(|&x| x > 0.0 && x < hi).collect();
    breaks.sort_by(f64::total_cmp);
    let rough = integrate(f, 0.0, hi, &breaks, 0.0).value.re.abs().max(1e-300);
    let _ = rough;
    let num = integrate(f, 0.0, hi, &breaks, 1e-12 * rough).value.re;
    // ∫_0^1 ∫_0^1 p_B δ(R p_B − p_F) dp_F dp_B = ∫_0^{min(1, 1/R)} p_B dp_B
    let top = (1.0f64).min(1.0 / rr);
    let z = integrate(|x| C64::new(x, 0.0), 0.0, top, &[], 1e-16).value.re;
    num / z
}

/// Discrete reconstruction of a single-mode work distribution by summing
/// leakage-broadened peaks. χ(u) = e^{−c} Σ_n A_n e^{−i(a − nω)u} where A_n
/// are Fourier coefficients of exp(c cos θ − i b sin θ); each peak contributes a
/// Dirichlet sum over the sampling grid.
pub fn single_mode_distribution(a: f64, b: f64, c: f64, omega: f64, t_window: f64, n_steps: usize, ws: &[f64]) -> Vec<f64> {
    let n_theta = 4096usize;
    let n_peaks = 60i64;
    let coeffs: Vec<(i64, C64)> = (-n_peaks..=n_peaks)
        .map(|n| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n_theta {
                let th = 2.0 * PI * j as f64 / n_theta as f64;
                let g = C64::new(c * th.cos(), -b * th.sin()).exp();
                acc += g * C64::from_polar(1.0, -(n as f64) * th);
            }
            (n, acc / n_theta as f64 * (-c).exp())
        })
        .collect();
    let du = t_window / n_steps as f64;
    ws.iter()
        .map(|&w| {
            let mut acc = C64::new(0.0, 0.0);
            for &(n, an) in &coeffs {
                let x = (w + a - n as f64 * omega) * du;
                // Σ_{j=1}^{N} e^{−ixj}
                let dir = if x.rem_euclid(2.0 * PI).abs() < 1e-14 {
                    C64::new(n_steps as f64, 0.0)
                } else {
                    let e = C64::from_polar(1.0, -x);
                    e * (C64::new(1.0, 0.0) - C64::from_polar(1.0, -x * n_steps as f64)) / (C64::new(1.0, 0.0) - e)
                };
                acc += an * dir;
            }
            du / (2.0 * PI) * (1.0 + 2.0 * acc.re)
        })
        .collect()
}

/// Reference values from the routines above, as written by the `oracle`
/// subcommand. Each row names the quantity, its value and the method.
pub fn fixtures() -> crate::Result<crate::harness::io::Table> {
    use crate::bogoliubov::build_model;
    use crate::harness::io::{fmt_f64, Table};
    use crate::model::BhmParams;

    let mut t = Table::new("oracle_fixtures", &["name", "value", "method"]);
    let mut add = |name: String, v: f64, method: &str| t.push(vec![name, fmt_f64(v), method.to_string()]);
    let bhm = |m: usize, u: f64, mu: f64| BhmParams {
        m_sites: m,
        hopping: 1.0,
        interaction: u,
        chem_potential: mu,
        density: 1.0,
        eta: 1.0,
        impurity_site: m / 2,
    };

    add(
        "energy_m2_u4_beta1".into(),
        dense::thermal_energy(&bhm(2, 4.0, 0.0), 4, 0.0, 1.0)?,
        "dense d=4",
    );
    add(
        "ground_m3_u4_mu1".into(),
        dense::ground_energy(&bhm(3, 4.0, 1.0), 4, 0.0)?,
        "dense d=4",
    );
    let q = QuenchSpec::sin_squared(0.0, 2.0, 0.1)?;
    let us = [1.0, 2.0, 3.0, 4.0, 5.0];
    for (u, c) in us.iter().zip(dense::chi(&bhm(3, 4.0, 0.0), 4, &q, 1.0, &us, 4000)?) {
        add(format!("chi_m3_u4_re({u})"), c.re, "dense d=4, 4000 midpoint steps");
        add(format!("chi_m3_u4_im({u})"), c.im, "dense d=4, 4000 midpoint steps");
    }
    let sf = QuenchSpec::sin_squared(0.0, 0.5, 1.0)?;
    let model = build_model(&bhm(4, 0.5, 0.0))?;
    let us = [0.5, 1.0, 2.0];
    for (u, c) in us.iter().zip(oscillators::model_chi(&model, &sf, 1.0, &us, 40, 2000)?) {
        add(format!("chi_phonon_m4_re({u})"), c.re, "Fock space n<=40, 2000 midpoint steps");
        add(format!("chi_phonon_m4_im({u})"), c.im, "Fock space n<=40, 2000 midpoint steps");
    }
    for omega in [0.5, 1.0, 3.0] {
        let l = lambda_riemann(&sf, omega, 1_000_000);
        add(format!("lambda_re(omega={omega})"), l.re, "midpoint sum, 1e6 steps");
        add(format!("lambda_im(omega={omega})"), l.im, "midpoint sum, 1e6 steps");
    }
    for (i, &(pf, sf_, pb, sb, r)) in [
        (0.3, 0.05, 0.2, 0.04, 0.4),
        (0.01, 0.02, 0.2, 0.03, -1.5),
        (0.5, 0.1, 0.05, 0.01, 2.0),
    ]
    .iter()
    .enumerate()
    {
        add(
            format!("likelihood_case{i}"),
            likelihood_quadrature(pf, sf_, pb, sb, r),
            "adaptive Gauss-Kronrod",
        );
    }
    Ok(t)
}
