//! Protocol objects shared by both simulators: quench paths, qubit
//! preparation, and Bose-Hubbard parameters.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Path family for the coupling schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuenchShape {
    /// λ_i + (λ_f − λ_i) sin²(πt/2τ)
    SinSquaredRamp,
    Linear,
    /// Linearly interpolated (t, λ) samples covering [0, τ].
    PiecewiseTable {
        samples: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuenchTag {
    Forward,
    Backward,
}

impl QuenchTag {
    pub fn as_str(self) -> &'static str {
        match self {
            QuenchTag::Forward => "forward",
            QuenchTag::Backward => "backward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(QuenchTag::Forward),
            "backward" => Ok(QuenchTag::Backward),
            _ => Err(Error::Parse(format!("unknown quench tag {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub lambda_i: f64,
    pub lambda_f: f64,
    pub tau: f64,
    pub shape: QuenchShape,
}

impl QuenchSpec {
    pub fn new(lambda_i: f64, lambda_f: f64, tau: f64, shape: QuenchShape) -> Result<Self> {
        let q = QuenchSpec {
            lambda_i,
            lambda_f,
            tau,
            shape,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn sin_squared(lambda_i: f64, lambda_f: f64, tau: f64) -> Result<Self> {
        Self::new(lambda_i, lambda_f, tau, QuenchShape::SinSquaredRamp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("quench duration must be positive, got {}", self.tau)));
        }
        if !self.lambda_i.is_finite() || !self.lambda_f.is_finite() {
            return Err(Error::Config("quench endpoints must be finite".into()));
        }
        if let QuenchShape::PiecewiseTable { samples } = &self.shape {
            if samples.len() < 2 {
                return Err(Error::Config("piecewise table needs at least two samples".into()));
            }
            if samples.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                return Err(Error::Config("piecewise table times must be strictly increasing".into()));
            }
            let (first, last) = (samples[0], samples[samples.len() - 1]);
            let tol = 1e-12 * self.tau;
            if first[0].abs() > tol || (last[0] - self.tau).abs() > tol {
                return Err(Error::Config("piecewise table must cover [0, tau]".into()));
            }
            if first[1] != self.lambda_i || last[1] != self.lambda_f {
                return Err(Error::Config("piecewise table endpoints must equal lambda_i and lambda_f".into()));
            }
            if samples.iter().any(|s| !s[1].is_finite()) {
                return Err(Error::Config("piecewise table values must be finite".into()));
            }
        }
        Ok(())
    }

    /// λ_Q(t) for 0 ≤ t ≤ τ.
    pub fn lambda_at(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.tau;
        if !(t >= -slack && t <= self.tau + slack) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.tau)));
        }
        Ok(self.eval(t.clamp(0.0, self.tau)))
    }

    /// Unchecked evaluation; `t` is clamped into [0, τ].
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.tau);
        if t == 0.0 {
            return self.lambda_i;
        }
        if t == self.tau {
            return self.lambda_f;
        }
        let dl = self.lambda_f - self.lambda_i;
        match &self.shape {
            QuenchShape::SinSquaredRamp => {
                let s = (PI * t / (2.0 * self.tau)).sin();
                self.lambda_i + dl * s * s
            }
            QuenchShape::Linear => self.lambda_i + dl * t / self.tau,
            QuenchShape::PiecewiseTable { samples } => {
                let i = samples.partition_point(|s| s[0] <= t).clamp(1, samples.len() - 1);
                let (a, b) = (samples[i - 1], samples[i]);
                let f = (t - a[0]) / (b[0] - a[0]);
                a[1] + f * (b[1] - a[1])
            }
        }
    }

    /// Time-mirrored path λ_B(t) = λ_F(τ − t).
    pub fn reverse(&self) -> QuenchSpec {
        let shape = match &self.shape {
            QuenchShape::PiecewiseTable { samples } => QuenchShape::PiecewiseTable {
                samples: samples.iter().rev().map(|s| [self.tau - s[0], s[1]]).collect(),
            },
            other => other.clone(),
        };
        let mut r = QuenchSpec {
            lambda_i: self.lambda_f,
            lambda_f: self.lambda_i,
            tau: self.tau,
            shape,
        };
        if let QuenchShape::PiecewiseTable { samples } = &mut r.shape {
            // keep the endpoints exact after the subtraction
            samples[0][0] = 0.0;
            let n = samples.len();
            samples[n - 1][0] = self.tau;
        }
        r
    }

    pub fn for_tag(&self, tag: QuenchTag) -> QuenchSpec {
        match tag {
            QuenchTag::Forward => self.clone(),
            QuenchTag::Backward => self.reverse(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitConfig {
    pub s_down: C64,
    pub s_up: C64,
    /// Qubit splitting Δ.
    #[serde(default)]
    pub delta: f64,
}

impl Default for QubitConfig {
    fn default() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        QubitConfig {
            s_down: a,
            s_up: a,
            delta: 0.0,
        }
    }
}

impl QubitConfig {
    pub fn new(s_down: C64, s_up: C64, delta: f64) -> Result<Self> {
        let q = QubitConfig { s_down, s_up, delta };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.s_down.norm_sqr() + self.s_up.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("qubit amplitudes not normalized: {norm}")));
        }
        if self.coherence().norm() == 0.0 {
            return Err(Error::Config("qubit superposition has zero visibility".into()));
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("qubit splitting must be finite".into()));
        }
        Ok(())
    }

    /// s*↑ s↓
    pub fn coherence(&self) -> C64 {
        self.s_up.conj() * self.s_down
    }

    /// Readout phase φ(u) = Δ(τ + u).
    pub fn phase_of(&self, tau: f64, u: f64) -> f64 {
        self.delta * (tau + u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhmParams {
    pub m_sites: usize,
    pub hopping: f64,
    pub interaction: f64,
    #[serde(default)]
    pub chem_potential: f64,
    pub density: f64,
    #[serde(default = "one")]
    pub eta: f64,
    pub impurity_site: usize,
}

fn one() -> f64 {
    1.0
}

impl BhmParams {
    /// Lattice constant; wavenumbers are measured in units of 1/a.
    pub const LATTICE_CONST: f64 = 1.0;

    pub fn validate(&self) -> Result<()> {
        if self.m_sites < 2 {
            return Err(Error::Config(format!("need at least 2 sites, got {}", self.m_sites)));
        }
        if !(self.hopping > 0.0) {
            return Err(Error::Config("hopping must be positive".into()));
        }
        if !(self.density > 0.0) {
            return Err(Error::Config("density must be positive".into()));
        }
        if self.impurity_site >= self.m_sites {
            return Err(Error::Config(format!(
                "impurity site {} outside lattice of {} sites",
                self.impurity_site, self.m_sites
            )));
        }
        let all = [self.hopping, self.interaction, self.chem_potential, self.density, self.eta];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("Bose-Hubbard parameters must be finite".into()));
        }
        Ok(())
    }
}
