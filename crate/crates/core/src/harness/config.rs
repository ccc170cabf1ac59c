//! Experiment configuration, read from a single TOML file with optional
//! `key.path=value` overrides.

use crate::bayes::GridSettings;
use crate::error::{Error, Result};
use crate::model::{BhmParams, QubitConfig, QuenchSpec};
use crate::spectral::{WindowKind, WindowSpec};
use crate::tebd::TrotterPlan;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Bogoliubov,
    Tebd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceKind {
    Bayes,
    Freq,
    #[default]
    Both,
}

impl InferenceKind {
    pub fn bayes(self) -> bool {
        matches!(self, InferenceKind::Bayes | InferenceKind::Both)
    }

    pub fn freq(self) -> bool {
        matches!(self, InferenceKind::Freq | InferenceKind::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TebdSettings {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_d_max")]
    pub d_max: usize,
    #[serde(default)]
    pub plan: TrotterPlan,
    /// Number of u points (spacing `pilot_du`) used to estimate the work
    /// cumulants before the window is chosen.
    #[serde(default = "default_pilot_du")]
    pub pilot_du: f64,
}

fn default_d() -> usize {
    4
}
fn default_d_max() -> usize {
    200
}
fn default_pilot_du() -> f64 {
    0.01
}

impl Default for TebdSettings {
    fn default() -> Self {
        TebdSettings {
            d: default_d(),
            d_max: default_d_max(),
            plan: TrotterPlan::default(),
            pilot_du: default_pilot_du(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_coarse")]
    pub coarse_points: usize,
    #[serde(default = "default_fine")]
    pub fine_points: usize,
    #[serde(default = "default_zoom")]
    pub zoom_nats: f64,
    #[serde(default = "default_passes")]
    pub max_zoom_passes: usize,
}

fn default_coarse() -> usize {
    GridSettings::default().coarse_points
}
fn default_fine() -> usize {
    GridSettings::default().fine_points
}
fn default_zoom() -> f64 {
    GridSettings::default().zoom_nats
}
fn default_passes() -> usize {
    GridSettings::default().max_zoom_passes
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSettings::default();
        GridConfig {
            coarse_points: g.coarse_points,
            fine_points: g.fine_points,
            zoom_nats: g.zoom_nats,
            max_zoom_passes: g.max_zoom_passes,
        }
    }
}

impl From<GridConfig> for GridSettings {
    fn from(g: GridConfig) -> Self {
        GridSettings {
            coarse_points: g.coarse_points,
            fine_points: g.fine_points,
            zoom_nats: g.zoom_nats,
            max_zoom_passes: g.max_zoom_passes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub engine: EngineKind,
    pub bhm: BhmParams,
    pub quench: QuenchSpec,
    #[serde(default)]
    pub qubit: QubitConfig,
    pub beta_true: f64,
    /// β used to size the window and seed the posterior grid; defaults to `beta_true`.
    #[serde(default)]
    pub beta_guess: Option<f64>,
    /// Window length T; chosen from the work-distribution width when absent.
    #[serde(default)]
    pub t_window: Option<f64>,
    pub n_steps: usize,
    /// Shots per point and quadrature; exact series when absent.
    #[serde(default)]
    pub n_meas: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inference: InferenceKind,
    #[serde(default = "one_usize")]
    pub n_experiments: usize,
    #[serde(default)]
    pub window: WindowKind,
    #[serde(default = "default_resample")]
    pub n_resample: usize,
    /// Shot count whose predicted variances stand in for the noise model when
    /// the Bayesian route runs on an exact series.
    #[serde(default = "default_nominal")]
    pub exact_nominal_n_meas: u64,
    #[serde(default)]
    pub tebd: TebdSettings,
    #[serde(default)]
    pub grid: GridConfig,
}

fn one_usize() -> usize {
    1
}
fn default_resample() -> usize {
    2000
}
fn default_nominal() -> u64 {
    1_000_000
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.bhm.validate()?;
        self.quench.validate()?;
        self.qubit.validate()?;
        if !(self.beta_true > 0.0 && self.beta_true.is_finite()) {
            return Err(Error::Config(format!("beta_true must be positive, got {}", self.beta_true)));
        }
        if let Some(b) = self.beta_guess {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("beta_guess must be positive, got {b}")));
            }
        }
        if let Some(t) = self.t_window {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_window must be positive, got {t}")));
            }
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if self.n_meas == Some(0) {
            return Err(Error::Config("n_meas must be positive".into()));
        }
        if self.n_experiments == 0 {
            return Err(Error::Config("n_experiments must be positive".into()));
        }
        if self.exact_nominal_n_meas == 0 {
            return Err(Error::Config("exact_nominal_n_meas must be positive".into()));
        }
        if self.engine == EngineKind::Tebd {
            self.tebd.plan.validate()?;
            if self.tebd.d < 2 || self.tebd.d_max == 0 || !(self.tebd.pilot_du > 0.0) {
                return Err(Error::Config("invalid TEBD settings".into()));
            }
        }
        Ok(())
    }

    pub fn beta_guess(&self) -> f64 {
        self.beta_guess.unwrap_or(self.beta_true)
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec { kind: self.window }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `s`, applies `key.path=value` overrides, then validates.
    pub fn from_toml_with_overrides(s: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&s, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML serialization, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = self.to_toml().unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    // parse the value as TOML, falling back to a bare string
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{key}' crosses a non-table value")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Superfluid configuration used throughout the tests and examples: 1000 sites,
/// U/J = 0.1, unit density, sin² ramp 0 → 0.5 over τJ = 1, βJ = 1,
/// 500 points over TJ = 2.9π and 500 shots.
pub fn superfluid_default() -> ExperimentConfig {
    ExperimentConfig {
        engine: EngineKind::Bogoliubov,
        bhm: BhmParams {
            m_sites: 1000,
            hopping: 1.0,
            interaction: 0.1,
            chem_potential: 0.0,
            density: 1.0,
            eta: 1.0,
            impurity_site: 500,
        },
        quench: QuenchSpec::sin_squared(0.0, 0.5, 1.0).expect("valid quench"),
        qubit: QubitConfig::default(),
        beta_true: 1.0,
        beta_guess: None,
        t_window: Some(2.9 * std::f64::consts::PI),
        n_steps: 500,
        n_meas: Some(500),
        seed: 1,
        inference: InferenceKind::Both,
        n_experiments: 1,
        window: WindowKind::Rectangular,
        n_resample: default_resample(),
        exact_nominal_n_meas: default_nominal(),
        tebd: TebdSettings::default(),
        grid: GridConfig::default(),
    }
}
