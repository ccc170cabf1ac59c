//! Exact diagonalization of small Bose-Hubbard chains in the truncated
//! occupation basis, built by enumerating basis states.

use crate::error::{Error, Result};
use crate::model::{BhmParams, QuenchSpec};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

/// Basis index ↔ occupations (site 0 most significant).
fn occupations(mut idx: usize, m: usize, d: usize) -> Vec<usize> {
    let mut occ = vec![0; m];
    for s in (0..m).rev() {
        occ[s] = idx % d;
        idx /= d;
    }
    occ
}

fn index_of(occ: &[usize], d: usize) -> usize {
    occ.iter().fold(0, |acc, &n| acc * d + n)
}

/// H(λ) = −J Σ_l (a†_l a_{l+1} + h.c.) + Σ_s [U/2 n_s(n_s−1) − μ n_s] + λη n_c.
pub fn hamiltonian(p: &BhmParams, d: usize, lambda: f64) -> Array2<f64> {
    let m = p.m_sites;
    let dim = d.pow(m as u32);
    let mut h = Array2::zeros((dim, dim));
    for idx in 0..dim {
        let occ = occupations(idx, m, d);
        let mut diag = 0.0;
        for (s, &n) in occ.iter().enumerate() {
            let nf = n as f64;
            diag += 0.5 * p.interaction * nf * (nf - 1.0) - p.chem_potential * nf;
            if s == p.impurity_site {
                diag += lambda * p.eta * nf;
            }
        }
        h[[idx, idx]] = diag;
        for l in 0..m - 1 {
            // a†_l a_{l+1} and a†_{l+1} a_l
            for (to, from) in [(l, l + 1), (l + 1, l)] {
                if occ[from] > 0 && occ[to] + 1 < d {
                    let amp = ((occ[from] as f64) * (occ[to] + 1) as f64).sqrt();
                    let mut new = occ.clone();
                    new[from] -= 1;
                    new[to] += 1;
                    h[[index_of(&new, d), idx]] += -p.hopping * amp;
                }
            }
        }
    }
    h
}

pub struct Spectrum {
    pub energies: Array1<f64>,
    pub vectors: Array2<C64>,
}

pub fn spectrum(h: &Array2<f64>) -> Result<Spectrum> {
    let (energies, vectors) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("dense eigendecomposition failed: {e}")))?;
    Ok(Spectrum {
        energies,
        vectors: vectors.mapv(|x| C64::new(x, 0.0)),
    })
}

fn boltzmann(e: &Array1<f64>, beta: f64) -> Vec<f64> {
    let e0 = e.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = e.iter().map(|x| (-beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn thermal_energy(p: &BhmParams, d: usize, lambda: f64, beta: f64) -> Result<f64> {
    let s = spectrum(&hamiltonian(p, d, lambda))?;
    let w = boltzmann(&s.energies, beta);
    Ok(w.iter().zip(s.energies.iter()).map(|(a, b)| a * b).sum())
}

pub fn ground_energy(p: &BhmParams, d: usize, lambda: f64) -> Result<f64> {
    let s = spectrum(&hamiltonian(p, d, lambda))?;
    Ok(s.energies.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Thermal mean occupation per site.
pub fn thermal_density(p: &BhmParams, d: usize, lambda: f64, beta: f64) -> Result<f64> {
    let s = spectrum(&hamiltonian(p, d, lambda))?;
    let w = boltzmann(&s.energies, beta);
    let m = p.m_sites;
    let dim = d.pow(m as u32);
    let ntot: Vec<f64> = (0..dim).map(|i| occupations(i, m, d).iter().sum::<usize>() as f64).collect();
    let mut n = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let v = s.vectors.column(k);
        n += wk * v.iter().zip(&ntot).map(|(c, nt)| c.norm_sqr() * nt).sum::<f64>();
    }
    Ok(n / m as f64)
}

/// Normalized e^{−βH}/Z as a dense matrix.
pub fn thermal_operator(p: &BhmParams, d: usize, lambda: f64, beta: f64) -> Result<Array2<C64>> {
    let s = spectrum(&hamiltonian(p, d, lambda))?;
    let w = boltzmann(&s.energies, beta);
    let mut vw = s.vectors.clone();
    for (j, wj) in w.iter().enumerate() {
        vw.column_mut(j).mapv_inplace(|x| x * *wj);
    }
    Ok(vw.dot(&s.vectors.t().mapv(|x| x.conj())))
}

fn expm_i(s: &Spectrum, t: f64) -> Array2<C64> {
    let mut vd = s.vectors.clone();
    for (j, e) in s.energies.iter().enumerate() {
        let f = C64::from_polar(1.0, -t * e);
        vd.column_mut(j).mapv_inplace(|x| x * f);
    }
    vd.dot(&s.vectors.t().mapv(|x| x.conj()))
}

/// Time-ordered evolution over the quench by `n` midpoint steps.
pub fn quench_unitary(p: &BhmParams, d: usize, q: &QuenchSpec, n: usize) -> Result<Array2<C64>> {
    let dim = d.pow(p.m_sites as u32);
    let dt = q.tau / n as f64;
    let mut u = Array2::from_diag(&Array1::from_elem(dim, C64::new(1.0, 0.0)));
    for k in 0..n {
        let lam = q.eval((k as f64 + 0.5) * dt);
        let s = spectrum(&hamiltonian(p, d, lam))?;
        u = expm_i(&s, dt).dot(&u);
    }
    Ok(u)
}

/// χ(u) = Σ_{m,n} |⟨m_τ|U|n_0⟩|² p_n e^{iu(E_m^τ − E_n^0)} for each u.
pub fn chi(p: &BhmParams, d: usize, q: &QuenchSpec, beta: f64, us: &[f64], n_quench: usize) -> Result<Vec<C64>> {
    let s0 = spectrum(&hamiltonian(p, d, q.lambda_i))?;
    let st = spectrum(&hamiltonian(p, d, q.lambda_f))?;
    let u = quench_unitary(p, d, q, n_quench)?;
    let ut = st.vectors.t().mapv(|x| x.conj()).dot(&u).dot(&s0.vectors);
    let pn = boltzmann(&s0.energies, beta);
    let dim = pn.len();
    Ok(us
        .iter()
        .map(|&x| {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..dim {
                let em = C64::from_polar(1.0, x * st.energies[m]);
                let mut row = C64::new(0.0, 0.0);
                for n in 0..dim {
                    if pn[n] < 1e-300 {
                        continue;
                    }
                    row += ut[[m, n]].norm_sqr() * pn[n] * C64::from_polar(1.0, -x * s0.energies[n]);
                }
                acc += em * row;
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_hopping_spectrum() {
        // one boson on two sites: ±J
        let p = BhmParams {
            m_sites: 2,
            hopping: 1.0,
            interaction: 0.0,
            chem_potential: 0.0,
            density: 1.0,
            eta: 1.0,
            impurity_site: 0,
        };
        let h = hamiltonian(&p, 2, 0.0);
        let s = spectrum(&h).unwrap();
        let mut e: Vec<f64> = s.energies.to_vec();
        e.sort_by(f64::total_cmp);
        let expect = [-1.0, 0.0, 1.0, 0.0];
        let mut ex = expect.to_vec();
        ex.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(ex) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_at_zero_is_one() {
        let p = BhmParams {
            m_sites: 2,
            hopping: 1.0,
            interaction: 2.0,
            chem_potential: 0.5,
            density: 1.0,
            eta: 1.0,
            impurity_site: 1,
        };
        let q = QuenchSpec::sin_squared(0.0, 1.0, 0.5).unwrap();
        let c = chi(&p, 3, &q, 1.0, &[0.0, 0.7], 200).unwrap();
        assert!((c[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(c[1].norm() <= 1.0 + 1e-12);
    }
}
