//! Matrix-product operators with tensors A[left, out, right, in].

use crate::error::{Error, Result};
use ndarray::{s, Array1, Array2, Array4, Axis};
use ndarray_linalg::{JobSvd, SVD, SVDDC};
use num_complex::Complex64 as C64;

/// Relative singular-value cutoff applied on top of the bond-dimension cap.
pub const SVD_REL_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Leave the orthogonality center on the right tensor.
    Right,
    /// Leave the orthogonality center on the left tensor.
    Left,
}

#[derive(Clone, Debug)]
pub struct Mpo {
    pub tensors: Vec<Array4<C64>>,
    /// The represented operator is exp(log_norm) times the tensor contraction.
    pub log_norm: f64,
    pub d: usize,
    /// Sum of relative discarded weights over all truncations.
    pub discarded_weight: f64,
}

/// Complex logarithm ln|z| + i arg z of a scalar carried as (log scale, mantissa).
fn log_of(log_scale: f64, z: C64) -> C64 {
    if z.norm() == 0.0 {
        return C64::new(f64::NEG_INFINITY, 0.0);
    }
    C64::new(log_scale + z.norm().ln(), z.arg())
}

fn matrix(a: ndarray::ArrayViewD<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows, cols))
        .expect("reshape")
}

impl Mpo {
    pub fn identity(m: usize, d: usize) -> Mpo {
        let mut a = Array4::zeros((1, d, 1, d));
        for i in 0..d {
            a[[0, i, 0, i]] = C64::new(1.0, 0.0);
        }
        Mpo {
            tensors: vec![a; m],
            log_norm: 0.0,
            d,
            discarded_weight: 0.0,
        }
    }

    /// ⊗_s O_s.
    pub fn product(ops: &[Array2<C64>]) -> Mpo {
        let d = ops[0].nrows();
        let tensors = ops
            .iter()
            .map(|o| {
                let mut a = Array4::zeros((1, d, 1, d));
                for i in 0..d {
                    for j in 0..d {
                        a[[0, i, 0, j]] = o[[i, j]];
                    }
                }
                a
            })
            .collect();
        Mpo {
            tensors,
            log_norm: 0.0,
            d,
            discarded_weight: 0.0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Internal bond dimensions (M − 1 entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.n_sites() - 1].iter().map(|t| t.dim().2).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Divides each tensor by its Frobenius norm, moving the scale into log_norm.
    pub fn normalize(&mut self) {
        for t in &mut self.tensors {
            let n = t.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 && n.is_finite() {
                t.mapv_inplace(|x| x / n);
                self.log_norm += n.ln();
            }
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (i, t) in self.tensors.iter().enumerate() {
            if t.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite MPO tensor at site {i}")));
            }
        }
        Ok(())
    }

    /// ln tr{ρ ⊗_s O_s}, with O_s = 1 where `ops[s]` is None.
    pub fn log_trace_with(&self, ops: &[Option<&Array2<C64>>]) -> C64 {
        let mut v = Array1::from_elem(1, C64::new(1.0, 0.0));
        let mut scale = self.log_norm;
        for (s, t) in self.tensors.iter().enumerate() {
            let (dl, d, dr, _) = t.dim();
            let mut m = Array2::<C64>::zeros((dl, dr));
            for a in 0..dl {
                for b in 0..dr {
                    let mut acc = C64::new(0.0, 0.0);
                    match ops.get(s).copied().flatten() {
                        None => {
                            for i in 0..d {
                                acc += t[[a, i, b, i]];
                            }
                        }
                        Some(o) => {
                            for out in 0..d {
                                for inn in 0..d {
                                    acc += t[[a, out, b, inn]] * o[[inn, out]];
                                }
                            }
                        }
                    }
                    m[[a, b]] = acc;
                }
            }
            v = v.dot(&m);
            let mx = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if mx > 0.0 {
                v.mapv_inplace(|x| x / mx);
                scale += mx.ln();
            }
        }
        log_of(scale, v[0])
    }

    pub fn log_trace(&self) -> C64 {
        self.log_trace_with(&[])
    }

    pub fn trace(&self) -> C64 {
        self.log_trace().exp()
    }

    /// Dense d^M × d^M matrix; row index (o_0, ..., o_{M−1}) in row-major order.
    pub fn to_dense(&self) -> Array2<C64> {
        let d = self.d;
        // acc[(o), (i), bond]
        let t0 = &self.tensors[0];
        let mut rows = d;
        let mut acc: Array2<C64> = {
            let dr = t0.dim().2;
            let mut a = Array2::zeros((d * d, dr));
            for o in 0..d {
                for i in 0..d {
                    for b in 0..dr {
                        a[[o * d + i, b]] = t0[[0, o, b, i]];
                    }
                }
            }
            a
        };
        for t in &self.tensors[1..] {
            let (dl, _, dr, _) = t.dim();
            let nr = rows * d;
            let mut next = Array2::zeros((nr * nr, dr));
            for ro in 0..rows {
                for ri in 0..rows {
                    for o in 0..d {
                        for i in 0..d {
                            let row = (ro * d + o) * nr + ri * d + i;
                            for c in 0..dl {
                                let x = acc[[ro * rows + ri, c]];
                                if x == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                for b in 0..dr {
                                    next[[row, b]] += x * t[[c, o, b, i]];
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
            rows = nr;
        }
        let f = self.log_norm.exp();
        acc.column(0).mapv(|x| x * f).into_shape_with_order((rows, rows)).unwrap()
    }

    /// Applies optional two-site gates on bond (l, l+1): `left` multiplies the
    /// output indices (G·X), `right` multiplies from the right (X·G). The block
    /// is re-split by SVD, keeping at most `d_max` values.
    pub fn apply_bond(
        &mut self,
        l: usize,
        left: Option<&Array2<C64>>,
        right: Option<&Array2<C64>>,
        sweep: Sweep,
        d_max: usize,
    ) -> Result<()> {
        let d = self.d;
        let dd = d * d;
        let a = &self.tensors[l];
        let b = &self.tensors[l + 1];
        let (dl, _, dc, _) = a.dim();
        let dr = b.dim().2;
        let am = matrix(a.view().permuted_axes([0, 1, 3, 2]).into_dyn(), dl * dd, dc);
        let bm = matrix(b.view().permuted_axes([0, 1, 3, 2]).into_dyn(), dc, dd * dr);
        // theta[a, o1, i1, o2, i2, b]
        let mut theta = am.dot(&bm).into_shape_with_order((dl, d, d, d, d, dr)).unwrap();
        if let Some(g) = left {
            let x = matrix(theta.view().permuted_axes([1, 3, 0, 2, 4, 5]).into_dyn(), dd, dl * dd * dr);
            theta = g
                .dot(&x)
                .into_shape_with_order((d, d, dl, d, d, dr))
                .unwrap()
                .permuted_axes([2, 0, 3, 1, 4, 5]);
        }
        if let Some(g) = right {
            let x = matrix(theta.view().permuted_axes([0, 1, 3, 5, 2, 4]).into_dyn(), dl * dd * dr, dd);
            theta = x
                .dot(g)
                .into_shape_with_order((dl, d, d, dr, d, d))
                .unwrap()
                .permuted_axes([0, 1, 4, 2, 5, 3]);
        }
        let tm = matrix(theta.view().into_dyn(), dl * dd, dd * dr);
        if tm.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite two-site block on bond {l}")));
        }
        let (u, sv, vt) = match tm.svddc(JobSvd::Some) {
            Ok((Some(u), s, Some(vt))) => (u, s, vt),
            _ => match tm.svd(true, true) {
                Ok((Some(u), s, Some(vt))) => {
                    let k = s.len();
                    (u.slice(s![.., ..k]).to_owned(), s, vt.slice(s![..k, ..]).to_owned())
                }
                _ => return Err(Error::Numerical(format!("SVD failed on bond {l} (site {l})"))),
            },
        };
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let s0 = sv.first().copied().unwrap_or(0.0);
        let mut k = sv.iter().take_while(|&&x| x > SVD_REL_CUTOFF * s0).count().min(d_max).max(1);
        k = k.min(sv.len());
        if total > 0.0 {
            let kept: f64 = sv.iter().take(k).map(|x| x * x).sum();
            self.discarded_weight += ((total - kept) / total).max(0.0);
        }
        let mut uk = u.slice(s![.., ..k]).to_owned();
        let mut vk = vt.slice(s![..k, ..]).to_owned();
        match sweep {
            Sweep::Right => {
                for (mut row, &x) in vk.axis_iter_mut(Axis(0)).zip(sv.iter()) {
                    row.mapv_inplace(|v| v * x);
                }
            }
            Sweep::Left => {
                for (mut col, &x) in uk.axis_iter_mut(Axis(1)).zip(sv.iter()) {
                    col.mapv_inplace(|v| v * x);
                }
            }
        }
        let na = uk
            .into_shape_with_order((dl, d, d, k))
            .unwrap()
            .permuted_axes([0, 1, 3, 2])
            .as_standard_layout()
            .into_owned();
        let nb = vk
            .into_shape_with_order((k, d, d, dr))
            .unwrap()
            .permuted_axes([0, 1, 3, 2])
            .as_standard_layout()
            .into_owned();
        self.tensors[l] = na;
        self.tensors[l + 1] = nb;
        self.check_finite_pair(l)
    }

    fn check_finite_pair(&self, l: usize) -> Result<()> {
        for s in [l, l + 1] {
            if self.tensors[s].iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite MPO tensor at site {s}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_sites();
        if m == 0 || self.tensors[0].dim().0 != 1 || self.tensors[m - 1].dim().2 != 1 {
            return Err(Error::Config("MPO boundary bonds must have dimension 1".into()));
        }
        for w in self.tensors.windows(2) {
            if w[0].dim().2 != w[1].dim().0 {
                return Err(Error::Config("MPO bond dimensions do not match".into()));
            }
        }
        self.check_finite()
    }
}

/// ln tr{A B} for two MPOs on the same chain.
pub fn log_trace_product(a: &Mpo, b: &Mpo) -> C64 {
    let d = a.d;
    let mut v = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    let mut scale = a.log_norm + b.log_norm;
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        let (da, _, da2, _) = ta.dim();
        let (db, _, db2, _) = tb.dim();
        // T1[b, o, a', i] = Σ_a v[a, b] A[a, o, a', i]
        let am = ta.view().into_shape_with_order((da, d * da2 * d)).unwrap();
        let t1 = v.t().dot(&am).into_shape_with_order((db, d, da2, d)).unwrap();
        // v'[a', b'] = Σ_{b,o,i} T1[b, o, a', i] B[b, i, b', o]
        let t1p = matrix(t1.view().permuted_axes([2, 0, 1, 3]).into_dyn(), da2, db * d * d);
        let bp = matrix(tb.view().permuted_axes([0, 3, 1, 2]).into_dyn(), db * d * d, db2);
        v = t1p.dot(&bp);
        let mx = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            v.mapv_inplace(|x| x / mx);
            scale += mx.ln();
        }
    }
    log_of(scale, v[[0, 0]])
}
