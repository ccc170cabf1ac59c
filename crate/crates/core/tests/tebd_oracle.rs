use ndarray::Array2;
use num_complex::Complex64 as C64;
use workthermo::model::{BhmParams, QuenchSpec};
use workthermo::oracle::dense;
use workthermo::tebd::{Tebd, TrotterPlan};

fn params(m: usize, u: f64, mu: f64) -> BhmParams {
    BhmParams {
        m_sites: m,
        hopping: 1.0,
        interaction: u,
        chem_potential: mu,
        density: 1.0,
        eta: 1.0,
        impurity_site: m / 2,
    }
}

fn plan(dt: f64) -> TrotterPlan {
    TrotterPlan {
        dt_real: dt,
        dt_imag: dt,
        endpoint_sampling: false,
    }
}

fn frob(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn two_site_thermal_energy_matches_dense() {
    let p = params(2, 4.0, 0.0);
    let exact = dense::thermal_energy(&p, 4, 0.0, 1.0).unwrap();
    let mut t = Tebd::new(&p, 4, 64, plan(0.005)).unwrap();
    let rho = t.thermal_state(0.0, 1.0).unwrap();
    let e = t.energy(&rho, 0.0);
    println!("M=2 energy tebd {e} dense {exact}");
    assert!((e - exact).abs() < 1e-6);
}

#[test]
fn three_site_ground_state_limit() {
    // μ = J opens a gap of about 0.72 J above the ground state
    let p = params(3, 4.0, 1.0);
    let e0 = dense::ground_energy(&p, 4, 0.0).unwrap();
    let mut t = Tebd::new(&p, 4, 64, plan(0.005)).unwrap();
    let rho = t.thermal_state(0.0, 20.0).unwrap();
    let e = t.energy(&rho, 0.0);
    println!("M=3 beta=20 energy {e} ground {e0}");
    assert!((e - e0).abs() < 1e-4);
}

#[test]
fn trotter_error_is_second_order() {
    // two sites have no Trotter splitting, so three are needed
    let p = params(3, 4.0, 0.0);
    let exact = dense::thermal_energy(&p, 3, 0.0, 1.0).unwrap();
    let err = |dt: f64| {
        let mut t = Tebd::new(&p, 3, 64, plan(dt)).unwrap();
        let rho = t.thermal_state(0.0, 1.0).unwrap();
        (t.energy(&rho, 0.0) - exact).abs()
    };
    let e1 = err(0.05);
    let e2 = err(0.025);
    println!("trotter errors {e1:e} {e2:e} ratio {}", e1 / e2);
    assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5);
}

#[test]
fn thermal_state_is_hermitian_psd() {
    let p = params(4, 2.0, 0.3);
    // full bond dimension at M=4, d=3 is 81
    let mut t = Tebd::new(&p, 3, 81, plan(0.01)).unwrap();
    let rho = t.thermal_state(0.2, 1.0).unwrap();
    let r = rho.to_dense();
    let herm = &r - &r.t().mapv(|x| x.conj());
    assert!(frob(&herm) <= 1e-8 * frob(&r));
    let rn = &r / r.diag().iter().sum::<C64>();
    use ndarray_linalg::{Eigh, UPLO};
    let (ev, _) = rn.eigh(UPLO::Lower).unwrap();
    assert!(ev.iter().all(|&x| x > -1e-8));
}

#[test]
fn three_site_quench_matches_dense_evolution() {
    let p = params(3, 4.0, 0.0);
    let q = QuenchSpec::sin_squared(0.0, 2.0, 0.1).unwrap();
    let rho0 = dense::thermal_operator(&p, 4, 0.0, 1.0).unwrap();
    let u = dense::quench_unitary(&p, 4, &q, 2000).unwrap();
    let exact = u.dot(&rho0).dot(&u.t().mapv(|x| x.conj()));
    let mut t = Tebd::new(&p, 4, 16, plan(0.005)).unwrap();
    let rho = t.thermal_state(0.0, 1.0).unwrap();
    let out = t.evolve_quench(&rho, &q).unwrap();
    let dense_out = out.to_dense();
    let dense_out = &dense_out / dense_out.diag().iter().sum::<C64>();
    let dist = frob(&(&dense_out - &exact));
    println!("M=3 evolve distance {dist:e}");
    assert!(dist <= 1e-5);
}

#[test]
fn bond_cap_monotone() {
    let p = params(3, 4.0, 0.0);
    let exact = dense::thermal_operator(&p, 4, 0.0, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for dmax in 1..=16 {
        let mut t = Tebd::new(&p, 4, dmax, plan(0.01)).unwrap();
        let r = t.thermal_state(0.0, 1.0).unwrap().to_dense();
        let r = &r / r.diag().iter().sum::<C64>();
        let err = frob(&(&r - &exact));
        assert!(err <= last, "D={dmax}: {err:e} > {last:e}");
        last = err;
    }
    assert!(last < 1e-4);
}

#[test]
fn three_site_chi_matches_dense() {
    let p = params(3, 4.0, 0.0);
    let q = QuenchSpec::sin_squared(0.0, 2.0, 0.1).unwrap();
    let n = 50;
    let us: Vec<f64> = (1..=n).map(|j| 5.0 * j as f64 / n as f64).collect();
    let exact = dense::chi(&p, 4, &q, 1.0, &us, 4000).unwrap();
    let mut t = Tebd::new(&p, 4, 16, plan(0.01)).unwrap();
    let (v, _) = t.chi_values(&q, 1.0, 0.1, n).unwrap();
    let err = v.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("M=3 chi max err {err:e}");
    assert!(err <= 1e-3);
}

#[test]
#[ignore = "several hours on one core"]
fn weak_coupling_approaches_bogoliubov() {
    use workthermo::bogoliubov::BogoliubovEngine;
    use workthermo::model::QuenchTag;
    let plan = TrotterPlan {
        dt_real: 0.01,
        dt_imag: 0.005,
        endpoint_sampling: false,
    };
    let mut p = params(9, 0.1, 0.0);
    // unit filling on the impurity site; open ends leave the profile non-uniform
    let mut excess = |mu: f64| {
        p.chem_potential = mu;
        let mut t = Tebd::new(&p, 4, 16, plan).unwrap();
        let rho = t.thermal_state(0.0, 1.0).unwrap();
        t.densities(&rho)[p.impurity_site] - 1.0
    };
    let (mut a, mut b) = (-1.5, -1.3);
    let (mut fa, mut fb) = (excess(a), excess(b));
    while fb.abs() > 1e-4 {
        let c = b - fb * (b - a) / (fb - fa);
        (a, fa) = (b, fb);
        b = c;
        fb = excess(c);
    }
    p.chem_potential = b;
    let q = QuenchSpec::sin_squared(0.0, 0.5, 1.0).unwrap();
    let mut t = Tebd::new(&p, 4, 64, plan).unwrap();
    let (v, _) = t.chi_values(&q, 1.0, 0.25, 8).unwrap();
    let e = BogoliubovEngine::new(&p, &q, 1.0).unwrap();
    for (j, c) in v.iter().enumerate() {
        let u = 0.25 * (j + 1) as f64;
        let bg = e.chi(QuenchTag::Forward, u);
        println!("u {u}: tebd {c} bogoliubov {bg}");
        assert!((c - bg).norm() <= 0.05, "u={u}");
    }
}
