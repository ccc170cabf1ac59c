//! Local operators, bond Hamiltonians and two-site gates for the truncated
//! Bose-Hubbard chain.

use crate::error::{Error, Result};
use crate::model::BhmParams;
use ndarray::{Array2, Array4};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use std::collections::hash_map::Entry;
use std::collections::HashMap;

/// Annihilation operator truncated to occupations 0..d−1.
pub fn annihilation(d: usize) -> Array2<f64> {
    let mut a = Array2::zeros((d, d));
    for n in 1..d {
        a[[n - 1, n]] = (n as f64).sqrt();
    }
    a
}

pub fn number(d: usize) -> Array2<f64> {
    Array2::from_diag(&ndarray::Array1::from_iter((0..d).map(|n| n as f64)))
}

/// U/2 n(n−1) − μ n + λη δ_{s,c} n on site `s`.
pub fn site_hamiltonian(p: &BhmParams, d: usize, site: usize, lambda: f64) -> Array2<f64> {
    let mut h = Array2::zeros((d, d));
    for n in 0..d {
        let nf = n as f64;
        let mut e = 0.5 * p.interaction * nf * (nf - 1.0) - p.chem_potential * nf;
        if site == p.impurity_site {
            e += lambda * p.eta * nf;
        }
        h[[n, n]] = e;
    }
    h
}

pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let x = a[[i, j]];
            if x == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = x * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Weight of site `s` in each of its bonds: interior sites are split evenly
/// between their two bonds, boundary sites belong to their only bond.
fn site_weight(m: usize, s: usize) -> f64 {
    if s == 0 || s == m - 1 {
        1.0
    } else {
        0.5
    }
}

/// h_l on sites (l, l+1), basis index n_l·d + n_{l+1}; Σ_l h_l = H(λ).
pub fn bond_hamiltonian(p: &BhmParams, d: usize, l: usize, lambda: f64) -> Array2<f64> {
    let m = p.m_sites;
    let a = annihilation(d);
    let ad = a.t().to_owned();
    let id = Array2::<f64>::eye(d);
    let hop = kron(&ad, &a) + kron(&a, &ad);
    let hl = site_hamiltonian(p, d, l, lambda) * site_weight(m, l);
    let hr = site_hamiltonian(p, d, l + 1, lambda) * site_weight(m, l + 1);
    hop * (-p.hopping) + kron(&hl, &id) + kron(&id, &hr)
}

/// exp(−i z h) for a real symmetric h and complex z.
pub fn exp_hermitian(h: &Array2<f64>, z: C64) -> Result<Array2<C64>> {
    let hc = h.mapv(|x| C64::new(x, 0.0));
    let (e, v) = hc
        .eigh(UPLO::Lower)
        .map_err(|err| Error::Numerical(format!("eigendecomposition failed: {err}")))?;
    let mut vd = v.clone();
    for (j, &ej) in e.iter().enumerate() {
        let f = (-C64::i() * z * ej).exp();
        vd.column_mut(j).mapv_inplace(|x| x * f);
    }
    let vh = v.t().mapv(|x| x.conj());
    Ok(vd.dot(&vh))
}

/// Reshapes a d²×d² gate into G[o1, o2, i1, i2].
pub fn gate_tensor(g: &Array2<C64>, d: usize) -> Array4<C64> {
    g.clone().into_shape_with_order((d, d, d, d)).expect("gate shape")
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
struct GateKey {
    bond: usize,
    lambda: u64,
    z_re: u64,
    z_im: u64,
}

/// Memoized two-site gates keyed by (bond, λ, complex step).
#[derive(Default)]
pub struct GateCache {
    map: HashMap<GateKey, Array2<C64>>,
}

impl GateCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// exp(−i z h_bond(λ)).
    pub fn gate(&mut self, p: &BhmParams, d: usize, bond: usize, lambda: f64, z: C64) -> Result<&Array2<C64>> {
        // only bonds touching the impurity depend on λ
        let touches = bond == p.impurity_site || bond + 1 == p.impurity_site;
        let lam = if touches { lambda } else { 0.0 };
        let key = GateKey {
            bond,
            lambda: lam.to_bits(),
            z_re: z.re.to_bits(),
            z_im: z.im.to_bits(),
        };
        match self.map.entry(key) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => Ok(e.insert(exp_hermitian(&bond_hamiltonian(p, d, bond, lam), z)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutator_of_truncated_ladder() {
        let a = annihilation(5);
        let ad = a.t().to_owned();
        let c = a.dot(&ad) - ad.dot(&a);
        for n in 0..4 {
            assert!((c[[n, n]] - 1.0).abs() < 1e-14);
        }
        assert!((number(5) - ad.dot(&a)).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gate_is_unitary_and_composes() {
        let p = BhmParams {
            m_sites: 3,
            hopping: 1.0,
            interaction: 4.0,
            chem_potential: 0.3,
            density: 1.0,
            eta: 1.0,
            impurity_site: 1,
        };
        let h = bond_hamiltonian(&p, 3, 0, 0.7);
        let g = exp_hermitian(&h, C64::new(0.2, 0.0)).unwrap();
        let gh = g.t().mapv(|x| x.conj());
        let id = g.dot(&gh);
        for ((i, j), v) in id.indexed_iter() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((v - C64::new(e, 0.0)).norm() < 1e-13);
        }
        let half = exp_hermitian(&h, C64::new(0.1, 0.0)).unwrap();
        assert!((half.dot(&half) - &g).iter().all(|x| x.norm() < 1e-13));
    }
}
