//! Second-order staircase TEBD for Bose-Hubbard chains in operator space.
//!
//! The characteristic function is evaluated as
//! χ_Q(u) = tr{K(u) U_Q}/tr{ρ}, K(u) = e^{−iuH(λ_Q(0))} ρ U_Q† e^{iuH(λ_Q(τ))},
//! which is tr{U_Q† e^{iuH(λ_Q(τ))} U_Q e^{−iuH(λ_Q(0))} ρ}/tr{ρ} by cyclicity.
//! K is advanced in u with left and right gates; U_Q is kept as its own MPO.

pub mod hamiltonian;
pub mod mpo;

use crate::error::{Error, Result};
use crate::measurement::CharFnSeries;
use crate::model::{BhmParams, QuenchSpec, QuenchTag};
use hamiltonian::{annihilation, site_hamiltonian, GateCache};
pub use mpo::{log_trace_product, Mpo, Sweep};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Cumulative discarded weight above which a series carries a warning note.
pub const DISCARDED_WEIGHT_WARNING: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub dt_real: f64,
    pub dt_imag: f64,
    /// Sample λ at the end of each step instead of its midpoint.
    #[serde(default)]
    pub endpoint_sampling: bool,
}

impl Default for TrotterPlan {
    fn default() -> Self {
        TrotterPlan {
            dt_real: 0.01,
            dt_imag: 0.005,
            endpoint_sampling: false,
        }
    }
}

impl TrotterPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_real > 0.0 && self.dt_imag > 0.0) {
            return Err(Error::Config("Trotter steps must be positive".into()));
        }
        Ok(())
    }

    /// λ for step m (1-based) of `n` across the quench.
    fn lambda_for_step(&self, q: &QuenchSpec, m: usize, n: usize) -> f64 {
        let dt = q.tau / n as f64;
        let t = if self.endpoint_sampling {
            m as f64 * dt
        } else {
            (m as f64 - 0.5) * dt
        };
        q.eval(t)
    }
}

/// Number of equal substeps no longer than `dt` covering `span`.
fn substeps(span: f64, dt: f64) -> usize {
    let n = (span / dt - 1e-9).ceil();
    (n as usize).max(1)
}

type Side = Option<(f64, C64)>;

pub struct Tebd {
    pub params: BhmParams,
    pub d: usize,
    pub d_max: usize,
    pub plan: TrotterPlan,
    cache: GateCache,
    /// Thermal states already built, keyed by the bits of (λ, β).
    thermal_cache: Vec<((u64, u64), Mpo)>,
}

impl Tebd {
    pub fn new(params: &BhmParams, d: usize, d_max: usize, plan: TrotterPlan) -> Result<Self> {
        params.validate()?;
        plan.validate()?;
        if d < 2 || d_max < 1 {
            return Err(Error::Config(format!("invalid local dimension {d} or bond cap {d_max}")));
        }
        Ok(Tebd {
            params: params.clone(),
            d,
            d_max,
            plan,
            cache: GateCache::new(),
            thermal_cache: Vec::new(),
        })
    }

    pub fn gate_count(&self) -> usize {
        self.cache.len()
    }

    fn gates(&mut self, bond: usize, side: Side, scale: f64) -> Result<Option<Array2<C64>>> {
        match side {
            None => Ok(None),
            Some((lam, z)) => Ok(Some(self.cache.gate(&self.params, self.d, bond, lam, z * scale)?.clone())),
        }
    }

    /// One symmetric staircase step: left side multiplies by exp(−i z_L H(λ_L)),
    /// right side by exp(−i z_R H(λ_R)) from the right.
    pub fn step(&mut self, x: &mut Mpo, left: Side, right: Side) -> Result<()> {
        let m = self.params.m_sites;
        let last = m - 2;
        for l in 0..=last {
            let scale = if l == last { 1.0 } else { 0.5 };
            let gl = self.gates(l, left, scale)?;
            let gr = self.gates(l, right, scale)?;
            let sweep = if l == last { Sweep::Left } else { Sweep::Right };
            x.apply_bond(l, gl.as_ref(), gr.as_ref(), sweep, self.d_max)?;
        }
        for l in (0..last).rev() {
            let gl = self.gates(l, left, 0.5)?;
            let gr = self.gates(l, right, 0.5)?;
            x.apply_bond(l, gl.as_ref(), gr.as_ref(), Sweep::Left, self.d_max)?;
        }
        x.normalize();
        Ok(())
    }

    /// Unnormalized e^{−βH(λ)/2} 1 e^{−βH(λ)/2}.
    pub fn thermal_state(&mut self, lambda: f64, beta: f64) -> Result<Mpo> {
        if !(beta >= 0.0) {
            return Err(Error::Config(format!("beta must be non-negative, got {beta}")));
        }
        let key = (lambda.to_bits(), beta.to_bits());
        if let Some((_, rho)) = self.thermal_cache.iter().find(|(k, _)| *k == key) {
            return Ok(rho.clone());
        }
        let mut rho = Mpo::identity(self.params.m_sites, self.d);
        if beta == 0.0 {
            return Ok(rho);
        }
        let n = substeps(0.5 * beta, self.plan.dt_imag);
        let z = C64::new(0.0, -0.5 * beta / n as f64);
        for _ in 0..n {
            self.step(&mut rho, Some((lambda, z)), Some((lambda, z)))?;
        }
        self.thermal_cache.push((key, rho.clone()));
        Ok(rho)
    }

    fn quench_steps(&self, q: &QuenchSpec) -> usize {
        substeps(q.tau, self.plan.dt_real)
    }

    /// U_Q ρ U_Q†.
    pub fn evolve_quench(&mut self, rho: &Mpo, q: &QuenchSpec) -> Result<Mpo> {
        let n = self.quench_steps(q);
        let dt = q.tau / n as f64;
        let mut x = rho.clone();
        for m in 1..=n {
            let lam = self.plan.lambda_for_step(q, m, n);
            self.step(&mut x, Some((lam, C64::new(dt, 0.0))), Some((lam, C64::new(-dt, 0.0))))?;
        }
        Ok(x)
    }

    /// U_Q as an MPO.
    pub fn quench_unitary(&mut self, q: &QuenchSpec) -> Result<Mpo> {
        let n = self.quench_steps(q);
        let dt = q.tau / n as f64;
        let mut x = Mpo::identity(self.params.m_sites, self.d);
        for m in 1..=n {
            let lam = self.plan.lambda_for_step(q, m, n);
            self.step(&mut x, Some((lam, C64::new(dt, 0.0))), None)?;
        }
        Ok(x)
    }

    /// ρ U_Q†.
    fn times_quench_adjoint(&mut self, rho: &Mpo, q: &QuenchSpec) -> Result<Mpo> {
        let n = self.quench_steps(q);
        let dt = q.tau / n as f64;
        let mut x = rho.clone();
        for m in 1..=n {
            let lam = self.plan.lambda_for_step(q, m, n);
            self.step(&mut x, None, Some((lam, C64::new(-dt, 0.0))))?;
        }
        Ok(x)
    }

    /// χ_Q(u) on u_j = jT/N_steps for the quench `q` from the thermal state of H(λ_Q(0)).
    pub fn chi_series(&mut self, q: &QuenchSpec, beta: f64, t_window: f64, n_steps: usize, tag: Option<QuenchTag>) -> Result<CharFnSeries> {
        let (values, discarded) = self.chi_values(q, beta, t_window / n_steps as f64, n_steps)?;
        let mut s = CharFnSeries::exact(t_window, values, tag)?;
        s.notes.push(format!("discarded_weight = {discarded:e}"));
        if discarded > DISCARDED_WEIGHT_WARNING {
            log::warn!("TEBD cumulative discarded weight {discarded:e} exceeds {DISCARDED_WEIGHT_WARNING:e}");
            s.notes.push("warning: truncation error above tolerance".into());
        }
        Ok(s)
    }

    /// χ at u = du, 2du, ..., n·du together with the cumulative discarded weight.
    pub fn chi_values(&mut self, q: &QuenchSpec, beta: f64, du: f64, n: usize) -> Result<(Vec<C64>, f64)> {
        q.validate()?;
        if !(du > 0.0) {
            return Err(Error::Config("u spacing must be positive".into()));
        }
        let rho = self.thermal_state(q.lambda_i, beta)?;
        let log_z = rho.log_trace();
        let uq = self.quench_unitary(q)?;
        let mut k = self.times_quench_adjoint(&rho, q)?;
        let sub = substeps(du, self.plan.dt_real);
        let ds = du / sub as f64;
        let left = Some((q.lambda_i, C64::new(ds, 0.0)));
        let right = Some((q.lambda_f, C64::new(-ds, 0.0)));
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..sub {
                self.step(&mut k, left, right)?;
            }
            let v = (log_trace_product(&k, &uq) - log_z).exp();
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Numerical("non-finite characteristic function".into()));
            }
            out.push(v);
        }
        let discarded = rho.discarded_weight + uq.discarded_weight + k.discarded_weight;
        Ok((out, discarded))
    }

    fn complex(op: &Array2<f64>) -> Array2<C64> {
        op.mapv(|x| C64::new(x, 0.0))
    }

    /// tr{H(λ) ρ}/tr{ρ}.
    pub fn energy(&self, rho: &Mpo, lambda: f64) -> f64 {
        let m = self.params.m_sites;
        let a = Self::complex(&annihilation(self.d));
        let ad = a.t().to_owned();
        let log_z = rho.log_trace();
        let expect = |ops: Vec<Option<&Array2<C64>>>| (rho.log_trace_with(&ops) - log_z).exp().re;
        let mut e = 0.0;
        for l in 0..m - 1 {
            let mut ops = vec![None; m];
            ops[l] = Some(&ad);
            ops[l + 1] = Some(&a);
            e -= self.params.hopping * expect(ops.clone());
            ops[l] = Some(&a);
            ops[l + 1] = Some(&ad);
            e -= self.params.hopping * expect(ops);
        }
        for s in 0..m {
            let h = Self::complex(&site_hamiltonian(&self.params, self.d, s, lambda));
            let mut ops = vec![None; m];
            ops[s] = Some(&h);
            e += expect(ops);
        }
        e
    }

    /// ⟨n_s⟩ for every site.
    pub fn densities(&self, rho: &Mpo) -> Vec<f64> {
        let m = self.params.m_sites;
        let n = Self::complex(&hamiltonian::number(self.d));
        let log_z = rho.log_trace();
        (0..m)
            .map(|s| {
                let mut ops = vec![None; m];
                ops[s] = Some(&n);
                (rho.log_trace_with(&ops) - log_z).exp().re
            })
            .collect()
    }
}

pub fn thermal_state(params: &BhmParams, lambda: f64, beta: f64, plan: TrotterPlan, d: usize, d_max: usize) -> Result<Mpo> {
    Tebd::new(params, d, d_max, plan)?.thermal_state(lambda, beta)
}

pub fn evolve_quench(rho: &Mpo, params: &BhmParams, q: &QuenchSpec, plan: TrotterPlan, d_max: usize) -> Result<Mpo> {
    Tebd::new(params, rho.d, d_max, plan)?.evolve_quench(rho, q)
}

pub fn chi_series_tebd(
    params: &BhmParams,
    q: &QuenchSpec,
    beta: f64,
    t_window: f64,
    n_steps: usize,
    plan: TrotterPlan,
    d: usize,
    d_max: usize,
) -> Result<CharFnSeries> {
    Tebd::new(params, d, d_max, plan)?.chi_series(q, beta, t_window, n_steps, None)
}

pub fn trace_mpo(rho: &Mpo) -> C64 {
    rho.trace()
}
