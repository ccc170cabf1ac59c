use num_complex::Complex64 as C64;
use proptest::prelude::*;
use workthermo::bayes::{log_likelihood_point, ObsRow};
use workthermo::bogoliubov::BogoliubovEngine;
use workthermo::harness::io::{fmt_f64, parse_f64};
use workthermo::measurement::CharFnSeries;
use workthermo::model::{BhmParams, QuenchSpec, QuenchTag};
use workthermo::oracle::likelihood_quadrature;
use workthermo::spectral::{work_distribution, WindowKind, WindowSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reverse_is_an_involution(li in -2.0..2.0f64, lf in -2.0..2.0f64, tau in 0.01..10.0f64, x in 0.0..1.0f64) {
        let q = QuenchSpec::sin_squared(li, lf, tau).unwrap();
        let t = x * tau;
        let rr = q.reverse().reverse();
        prop_assert!((rr.lambda_at(t).unwrap() - q.lambda_at(t).unwrap()).abs() <= 1e-14);
        let b = q.reverse().lambda_at(t).unwrap();
        prop_assert!((b - q.lambda_at(tau - t).unwrap()).abs() <= 1e-14);
        let c = (std::f64::consts::PI * t / (2.0 * tau)).cos();
        prop_assert!((b - (li + (lf - li) * c * c)).abs() <= 1e-13);
    }

    #[test]
    fn likelihood_is_scale_free(pf in -0.1..0.6f64, pb in -0.1..0.6f64, sf in 0.001..0.2f64, sb in 0.001..0.2f64,
                                 beta in 0.1..5.0f64, w in -3.0..3.0f64, scale in 0.01..100.0f64) {
        let row = ObsRow { w, pf, sf, pb, sb };
        let scaled = ObsRow { w, pf: pf * scale, sf: sf * scale, pb: pb * scale, sb: sb * scale };
        let a = log_likelihood_point(&row, beta, 0.2).unwrap();
        let b = log_likelihood_point(&scaled, beta, 0.2).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn likelihood_matches_quadrature(pf in 0.0..0.5f64, pb in 0.0..0.5f64, sf in 0.01..0.1f64, sb in 0.01..0.1f64, r in -2.0..2.0f64) {
        let row = ObsRow { w: r, pf, sf, pb, sb };
        let closed = log_likelihood_point(&row, 1.0, 0.0).unwrap();
        let oracle = likelihood_quadrature(pf, sf, pb, sb, r).ln();
        prop_assert!((closed - oracle).abs() <= 1e-6, "{} vs {}", closed, oracle);
    }

    #[test]
    fn floats_survive_result_files(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(parse_f64(&fmt_f64(x)).unwrap().to_bits(), bits);
    }

    #[test]
    fn full_period_mass_is_one(n in 4usize..80, t in 0.5..30.0f64, seed in any::<u64>(), hann in any::<bool>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let s = CharFnSeries::exact(t, values, None).unwrap();
        let kind = if hann { WindowKind::Hann } else { WindowKind::Rectangular };
        let e = work_distribution(&s, WindowSpec { kind }, (-(n as i64), n as i64 - 1)).unwrap();
        let mass = e.values.iter().sum::<f64>() * std::f64::consts::PI / t;
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phonon_forward_backward_symmetry(m in 8usize..400, u in 0.05..1.0f64, li in -0.5..0.5f64, lf in -0.5..0.5f64,
                                        tau in 0.2..3.0f64, beta in 0.2..5.0f64) {
        let p = BhmParams { m_sites: m, hopping: 1.0, interaction: u, chem_potential: 0.0, density: 1.0, eta: 1.0, impurity_site: m / 2 };
        let q = QuenchSpec::sin_squared(li, lf, tau).unwrap();
        let e = BogoliubovEngine::new(&p, &q, beta).unwrap();
        let f = e.cumulants(QuenchTag::Forward);
        let b = e.cumulants(QuenchTag::Backward);
        prop_assert!((f.mean - b.mean - 2.0 * e.delta_f()).abs() <= 1e-10 * (1.0 + f.mean.abs()));
        prop_assert!((f.variance - b.variance).abs() <= 1e-12 * (1.0 + f.variance));
    }
}
