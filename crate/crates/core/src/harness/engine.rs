//! Exact characteristic-function generation for either simulator, together
//! with the reference quantities the pipeline needs (cumulants, window, k range).

use super::config::{EngineKind, ExperimentConfig};
use crate::bogoliubov::BogoliubovEngine;
use crate::error::{Result, StageExt};
use crate::measurement::CharFnSeries;
use crate::model::QuenchTag;
use crate::spectral::{choose_window_size, short_time_cumulants, symmetric_k_range};
use crate::tebd::Tebd;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkCumulants {
    pub mean: f64,
    pub variance: f64,
    pub kappa3: f64,
}

impl WorkCumulants {
    pub fn sigma(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Everything shared by the experiments of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub t_window: f64,
    pub forward: CharFnSeries,
    pub backward: CharFnSeries,
    pub cumulants_f: WorkCumulants,
    pub cumulants_b: WorkCumulants,
    /// ΔF from the engine's own free energies.
    pub delta_f: f64,
    pub k_range: (i64, i64),
    pub notes: Vec<String>,
}

impl Prepared {
    pub fn sigma_q(&self) -> f64 {
        self.cumulants_f.sigma().max(self.cumulants_b.sigma())
    }
}

fn finish(
    cfg: &ExperimentConfig,
    cf: WorkCumulants,
    cb: WorkCumulants,
    delta_f: f64,
    mut series: impl FnMut(QuenchTag, f64) -> Result<CharFnSeries>,
) -> Result<Prepared> {
    let sigma = cf.sigma().max(cb.sigma());
    let t_window = cfg.t_window.unwrap_or_else(|| choose_window_size(cfg.beta_guess(), sigma));
    let (lo, hi) = symmetric_k_range(t_window, (cf.mean, cf.sigma()), (cb.mean, cb.sigma()));
    // keep the grid inside one aliasing period
    let kmax = (cfg.n_steps as i64 - 1).max(1);
    let k_range = (lo.max(-kmax), hi.min(kmax));
    let forward = series(QuenchTag::Forward, t_window).stage("chi forward")?;
    let backward = series(QuenchTag::Backward, t_window).stage("chi backward")?;
    let mut notes: Vec<String> = Vec::new();
    notes.extend(forward.notes.iter().map(|n| format!("forward: {n}")));
    notes.extend(backward.notes.iter().map(|n| format!("backward: {n}")));
    Ok(Prepared {
        t_window,
        forward,
        backward,
        cumulants_f: cf,
        cumulants_b: cb,
        delta_f,
        k_range,
        notes,
    })
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    match cfg.engine {
        EngineKind::Bogoliubov => {
            let e = BogoliubovEngine::new(&cfg.bhm, &cfg.quench, cfg.beta_true).stage("bogoliubov")?;
            let conv = |c: crate::bogoliubov::Cumulants| WorkCumulants {
                mean: c.mean,
                variance: c.variance,
                kappa3: c.kappa3,
            };
            let cf = conv(e.cumulants(QuenchTag::Forward));
            let cb = conv(e.cumulants(QuenchTag::Backward));
            finish(cfg, cf, cb, e.delta_f(), |tag, t| e.series(tag, t, cfg.n_steps))
        }
        EngineKind::Tebd => {
            let s = &cfg.tebd;
            let mut t = Tebd::new(&cfg.bhm, s.d, s.d_max, s.plan).stage("tebd")?;
            let mut pilot = |tag: QuenchTag| -> Result<WorkCumulants> {
                let q = cfg.quench.for_tag(tag);
                let (v, _) = t.chi_values(&q, cfg.beta_true, s.pilot_du, 3)?;
                let series = CharFnSeries::exact(3.0 * s.pilot_du, v, Some(tag))?;
                let c = short_time_cumulants(&series)?;
                Ok(WorkCumulants {
                    mean: c.mean,
                    variance: c.variance,
                    kappa3: c.kappa3,
                })
            };
            let cf = pilot(QuenchTag::Forward).stage("tebd pilot")?;
            let cb = pilot(QuenchTag::Backward).stage("tebd pilot")?;
            let log_z = |t: &mut Tebd, lam: f64| -> Result<f64> { Ok(t.thermal_state(lam, cfg.beta_true)?.log_trace().re) };
            let zi = log_z(&mut t, cfg.quench.lambda_i).stage("tebd free energy")?;
            let zf = log_z(&mut t, cfg.quench.lambda_f).stage("tebd free energy")?;
            let delta_f = -(zf - zi) / cfg.beta_true;
            finish(cfg, cf, cb, delta_f, |tag, tw| {
                t.chi_series(&cfg.quench.for_tag(tag), cfg.beta_true, tw, cfg.n_steps, Some(tag))
            })
        }
    }
}
