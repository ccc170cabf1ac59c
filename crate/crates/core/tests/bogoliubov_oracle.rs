use num_complex::Complex64 as C64;
use workthermo::bogoliubov::{build_model, chi_exact, cumulants, delta_free_energy, log_chi, quench_integrals, BogoliubovEngine};
use workthermo::model::{BhmParams, QuenchShape, QuenchSpec, QuenchTag};
use workthermo::oracle::{lambda_riemann, oscillators};

fn bhm(m: usize, u: f64) -> BhmParams {
    BhmParams {
        m_sites: m,
        hopping: 1.0,
        interaction: u,
        chem_potential: 0.0,
        density: 1.0,
        eta: 1.0,
        impurity_site: m / 2,
    }
}

#[test]
fn ramp_integrals_match_riemann_sums() {
    let model = build_model(&bhm(1000, 0.1)).unwrap();
    for q in [
        QuenchSpec::sin_squared(0.0, 0.5, 1.0).unwrap(),
        QuenchSpec::sin_squared(0.3, -0.2, 2.5).unwrap(),
        QuenchSpec::new(0.0, 1.0, 0.7, QuenchShape::Linear).unwrap(),
    ] {
        let ints = quench_integrals(&model, &q).unwrap();
        for i in [0usize, 1, 17, 250, 499, 998] {
            let m = &model.modes[i];
            let oracle = lambda_riemann(&q, m.omega, 1_000_000);
            let err = (ints.lambda[i] - oracle).norm();
            assert!(err <= 1e-9 * (1.0 + oracle.norm()), "mode {i} ω={}: {err:e}", m.omega);
        }
    }
}

#[test]
fn resonant_frequency_matches_riemann_sum() {
    let tau = 1.3;
    let q = QuenchSpec::sin_squared(0.0, 0.8, tau).unwrap();
    // a single-mode model is not available, so compare at ω = π/τ ± small
    let params = bhm(64, 0.2);
    let model = build_model(&params).unwrap();
    let ints = quench_integrals(&model, &q).unwrap();
    let (i, m) = model
        .modes
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.omega - std::f64::consts::PI / tau)
                .abs()
                .total_cmp(&(b.1.omega - std::f64::consts::PI / tau).abs())
        })
        .unwrap();
    let oracle = lambda_riemann(&q, m.omega, 1_000_000);
    assert!((ints.lambda[i] - oracle).norm() < 1e-9);
}

fn fock_comparison(m_sites: usize, u_int: f64, q: &QuenchSpec, beta: f64) {
    let model = build_model(&bhm(m_sites, u_int)).unwrap();
    let ints = quench_integrals(&model, q).unwrap();
    let us = [0.3, 1.0, 2.2, 4.0];
    let brute = oscillators::model_chi(&model, q, beta, &us, 40, 4000).unwrap();
    for (u, b) in us.iter().zip(brute) {
        let c = chi_exact(&model, &ints, beta, *u);
        assert!((c - b).norm() < 2e-6, "M={m_sites} u={u}: closed {c} vs Fock {b}");
    }
}

#[test]
fn closed_form_matches_fock_space_two_modes() {
    fock_comparison(3, 0.5, &QuenchSpec::sin_squared(0.0, 0.5, 1.0).unwrap(), 1.0);
}

#[test]
fn closed_form_matches_fock_space_three_modes() {
    fock_comparison(4, 1.0, &QuenchSpec::sin_squared(0.2, -0.4, 0.6).unwrap(), 0.5);
    fock_comparison(4, 0.3, &QuenchSpec::new(0.0, 0.6, 1.5, QuenchShape::Linear).unwrap(), 2.0);
}

#[test]
fn cumulants_are_log_chi_derivatives() {
    let model = build_model(&bhm(200, 0.2)).unwrap();
    let q = QuenchSpec::sin_squared(0.0, 0.5, 1.0).unwrap();
    let ints = quench_integrals(&model, &q).unwrap();
    let beta = 2.0;
    let c = cumulants(&model, &ints, beta);
    let l = |u: f64| log_chi(&model, &ints, beta, u);
    let h = 1e-3;
    // ln χ = iμu − σ²u²/2 − iκ₃u³/6 + ...
    let d1 = (l(h) - l(-h)) / (2.0 * h);
    let d2 = (l(h) - 2.0 * l(0.0) + l(-h)) / (h * h);
    let d3 = (l(2.0 * h) - 2.0 * l(h) + 2.0 * l(-h) - l(-2.0 * h)) / (2.0 * h * h * h);
    assert!((d1 - C64::new(0.0, c.mean)).norm() < 1e-6 * c.mean.abs());
    assert!((d2 + c.variance).norm() < 1e-5 * c.variance);
    assert!((d3.im + c.kappa3).abs() < 1e-4 * c.kappa3.abs().max(1e-3));
}

#[test]
fn forward_backward_relations() {
    for (m, u, lf, tau, beta) in [(1000, 0.1, 0.5, 1.0, 1.0), (300, 0.5, -0.3, 0.4, 3.0), (50, 1.0, 1.0, 2.0, 0.5)] {
        let q = QuenchSpec::sin_squared(0.0, lf, tau).unwrap();
        let e = BogoliubovEngine::new(&bhm(m, u), &q, beta).unwrap();
        let f = e.cumulants(QuenchTag::Forward);
        let b = e.cumulants(QuenchTag::Backward);
        assert!((f.mean - b.mean - 2.0 * e.delta_f()).abs() < 1e-12);
        assert!((f.variance - b.variance).abs() < 1e-12 * f.variance);
        // second law: dissipated work is non-negative in both directions
        assert!(f.mean >= e.delta_f() && b.mean >= -e.delta_f());
        assert!((e.delta_f() - delta_free_energy(&e.model, 0.0, lf)).abs() < 1e-15);
    }
}
