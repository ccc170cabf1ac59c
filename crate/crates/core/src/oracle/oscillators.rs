//! Independent driven harmonic oscillators in a truncated Fock space; the
//! brute-force counterpart of the closed-form phonon model.

use crate::bogoliubov::BogoliubovModel;
use crate::error::{Error, Result};
use crate::model::QuenchSpec;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

/// H(λ) = ω b†b + λ(g* b† + g b) on occupations 0..n_max.
fn mode_hamiltonian(omega: f64, g: C64, lambda: f64, n_max: usize) -> Array2<C64> {
    let dim = n_max + 1;
    let mut h = Array2::zeros((dim, dim));
    for n in 0..dim {
        h[[n, n]] = C64::new(omega * n as f64, 0.0);
        if n + 1 < dim {
            let s = ((n + 1) as f64).sqrt();
            h[[n + 1, n]] = lambda * g.conj() * s;
            h[[n, n + 1]] = lambda * g * s;
        }
    }
    h
}

fn eig(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    h.eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("oscillator eigh failed: {e}")))
}

/// χ_k(u) for one mode, propagating with `n_steps` midpoint steps.
pub fn mode_chi(omega: f64, g: C64, q: &QuenchSpec, beta: f64, us: &[f64], n_max: usize, n_steps: usize) -> Result<Vec<C64>> {
    let (e0, v0) = eig(&mode_hamiltonian(omega, g, q.lambda_i, n_max))?;
    let (et, vt) = eig(&mode_hamiltonian(omega, g, q.lambda_f, n_max))?;
    let dim = n_max + 1;
    let dt = q.tau / n_steps as f64;
    let mut u = Array2::<C64>::eye(dim);
    for k in 0..n_steps {
        let lam = q.eval((k as f64 + 0.5) * dt);
        let (e, v) = eig(&mode_hamiltonian(omega, g, lam, n_max))?;
        let mut vd = v.clone();
        for (j, ej) in e.iter().enumerate() {
            let f = C64::from_polar(1.0, -dt * ej);
            vd.column_mut(j).mapv_inplace(|x| x * f);
        }
        u = vd.dot(&v.t().mapv(|x| x.conj())).dot(&u);
    }
    let ut = vt.t().mapv(|x| x.conj()).dot(&u).dot(&v0);
    let emin = e0.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = e0.iter().map(|e| (-beta * (e - emin)).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(us
        .iter()
        .map(|&x| {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..dim {
                for n in 0..dim {
                    acc += ut[[m, n]].norm_sqr() * (w[n] / z) * C64::from_polar(1.0, x * (et[m] - e0[n]));
                }
            }
            acc
        })
        .collect())
}

/// Product over modes times the condensate phase e^{iuηn(λ_f − λ_i)}.
pub fn model_chi(model: &BogoliubovModel, q: &QuenchSpec, beta: f64, us: &[f64], n_max: usize, n_steps: usize) -> Result<Vec<C64>> {
    let eta_n = model.eta_n();
    let mut out: Vec<C64> = us
        .iter()
        .map(|&x| C64::from_polar(1.0, x * eta_n * (q.lambda_f - q.lambda_i)))
        .collect();
    for m in &model.modes {
        let c = mode_chi(m.omega, m.eta_k, q, beta, us, n_max, n_steps)?;
        for (o, v) in out.iter_mut().zip(c) {
            *o *= v;
        }
    }
    Ok(out)
}
