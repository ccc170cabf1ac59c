//! Finite-shot simulation of the interferometric readout.

use crate::error::{Error, Result};
use crate::model::{QubitConfig, QuenchTag};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Sampled { seed: u64, n_meas: u64 },
}

/// χ(u_j) on the grid u_j = jT/N_steps, j = 1..N_steps.
#[derive(Clone, Debug, PartialEq)]
pub struct CharFnSeries {
    pub t_window: f64,
    pub n_steps: usize,
    pub values: Vec<C64>,
    /// Generalized complex variance E|χ̄ − χ|² per point.
    pub variances: Vec<f64>,
    pub provenance: Provenance,
    pub tag: Option<QuenchTag>,
    /// Free-form diagnostics attached by the producer (e.g. truncation warnings).
    pub notes: Vec<String>,
}

impl CharFnSeries {
    pub fn exact(t_window: f64, values: Vec<C64>, tag: Option<QuenchTag>) -> Result<Self> {
        let s = CharFnSeries {
            t_window,
            n_steps: values.len(),
            variances: vec![0.0; values.len()],
            values,
            provenance: Provenance::Exact,
            tag,
            notes: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Tabulates `f` on the grid.
    pub fn from_fn<F: Fn(f64) -> C64>(t_window: f64, n_steps: usize, tag: Option<QuenchTag>, f: F) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        let du = t_window / n_steps as f64;
        let values = (1..=n_steps).map(|j| f(j as f64 * du)).collect();
        Self::exact(t_window, values, tag)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_window > 0.0 && self.t_window.is_finite()) {
            return Err(Error::Config(format!("window T must be positive, got {}", self.t_window)));
        }
        if self.n_steps == 0 || self.values.len() != self.n_steps || self.variances.len() != self.n_steps {
            return Err(Error::Config("series length mismatch".into()));
        }
        if self.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite characteristic function value".into()));
        }
        if self.variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Numerical("negative or non-finite variance".into()));
        }
        if self.provenance == Provenance::Exact && self.variances.iter().any(|&v| v != 0.0) {
            return Err(Error::Config("exact series must carry zero variances".into()));
        }
        Ok(())
    }

    pub fn du(&self) -> f64 {
        self.t_window / self.n_steps as f64
    }

    /// u for zero-based index `i` (grid point j = i + 1).
    pub fn time(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.du()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_steps).map(|i| self.time(i)).collect()
    }

    pub fn n_meas(&self) -> Option<u64> {
        match self.provenance {
            Provenance::Exact => None,
            Provenance::Sampled { n_meas, .. } => Some(n_meas),
        }
    }
}

/// Generalized variance of χ̄ for a given |χ|, coherence c = s*↑s↓ and shot count.
pub fn estimator_variance(chi_abs: f64, coherence: C64, n_meas: u64) -> f64 {
    let c2 = coherence.norm_sqr();
    (2.0 - 4.0 * c2 * chi_abs * chi_abs) / (4.0 * c2 * n_meas as f64)
}

fn clamp_expectation(x: f64, what: &str, u: f64) -> f64 {
    if x.abs() > 1.0 {
        log::warn!("<{what}> = {x} at u = {u} exceeds 1 in magnitude; clamped");
        x.clamp(-1.0, 1.0)
    } else {
        x
    }
}

fn sample_mean_spin<R: rand::Rng>(rng: &mut R, expectation: f64, n_meas: u64) -> Result<f64> {
    let p = 0.5 * (1.0 + expectation);
    let b = Binomial::new(n_meas, p).map_err(|e| Error::Numerical(format!("binomial: {e}")))?;
    let ups = b.sample(rng);
    Ok((2.0 * ups as f64 - n_meas as f64) / n_meas as f64)
}

/// Simulates N_meas σx and N_meas σy shots at every grid point.
///
/// Each point draws from its own ChaCha8 stream (stream index = j), so the
/// record is reproducible from `seed` alone and independent of evaluation order.
pub fn sample_series(exact: &CharFnSeries, qubit: &QubitConfig, tau: f64, n_meas: u64, seed: u64) -> Result<CharFnSeries> {
    exact.validate()?;
    qubit.validate()?;
    if exact.provenance != Provenance::Exact {
        return Err(Error::Config("sample_series expects an exact series".into()));
    }
    if n_meas == 0 {
        return Err(Error::Config("n_meas must be at least 1".into()));
    }
    // forward map: <σx> + i<σy> = 2 s*↓ s↑ e^{-iφ} χ
    let amp = 2.0 * qubit.s_down.conj() * qubit.s_up;
    let coherence = qubit.coherence();
    let mut values = Vec::with_capacity(exact.n_steps);
    let mut variances = Vec::with_capacity(exact.n_steps);
    for (i, chi) in exact.values.iter().enumerate() {
        let u = exact.time(i);
        let phase = C64::from_polar(1.0, qubit.phase_of(tau, u));
        let z = amp * chi / phase;
        let sx = clamp_expectation(z.re, "sigma_x", u);
        let sy = clamp_expectation(z.im, "sigma_y", u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let mx = sample_mean_spin(&mut rng, sx, n_meas)?;
        let my = sample_mean_spin(&mut rng, sy, n_meas)?;
        let est = phase * C64::new(mx, my) / amp;
        values.push(est);
        variances.push(estimator_variance(est.norm(), coherence, n_meas).max(0.0));
    }
    Ok(CharFnSeries {
        t_window: exact.t_window,
        n_steps: exact.n_steps,
        values,
        variances,
        provenance: Provenance::Sampled { seed, n_meas },
        tag: exact.tag,
        notes: exact.notes.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(chi: C64, n: usize) -> CharFnSeries {
        CharFnSeries::from_fn(1.0, n, None, |_| chi).unwrap()
    }

    #[test]
    fn deterministic_outcome_at_unit_coherence() {
        let s = sample_series(&constant(C64::new(1.0, 0.0), 4), &QubitConfig::default(), 1.0, 500, 7).unwrap();
        // σx shots are all +1; σy remains a fair coin since <σy> = 0
        for (v, var) in s.values.iter().zip(&s.variances) {
            assert!((v.re - 1.0).abs() < 1e-15);
            assert!((var - (1.0 - v.im * v.im) / 500.0).abs() < 1e-15);
        }
    }

    #[test]
    fn same_seed_same_record() {
        let e = constant(C64::new(0.3, -0.2), 50);
        let q = QubitConfig::default();
        let a = sample_series(&e, &q, 1.0, 100, 42).unwrap();
        let b = sample_series(&e, &q, 1.0, 100, 42).unwrap();
        let c = sample_series(&e, &q, 1.0, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn phase_and_complex_amplitudes_invert() {
        // large shot count: estimate must track χ through the readout phase
        let s_down = C64::new(0.6, 0.0);
        let s_up = C64::from_polar(0.8, 0.7);
        let q = QubitConfig::new(s_down, s_up, 0.9).unwrap();
        let chi = C64::new(0.4, 0.3);
        let s = sample_series(&constant(chi, 20), &q, 1.0, 10_000_000, 1).unwrap();
        for v in &s.values {
            assert!((v - chi).norm() < 2e-3, "{v}");
        }
    }

    #[test]
    fn rejects_zero_shots() {
        assert!(sample_series(&constant(C64::new(1.0, 0.0), 2), &QubitConfig::default(), 1.0, 0, 1).is_err());
    }
}
