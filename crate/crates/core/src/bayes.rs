//! Grid posterior over (β, ΔF) from paired work-distribution estimates.
//!
//! For one grid point the true values obey p_F = R p_B with R = e^{β(W−ΔF)}.
//! With flat priors on p_F, p_B over [0, C) the conditional density of the
//! estimates is
//!
//!   C² P(p̄_F, p̄_B | R) = 2 max(1, R²)/R · J(p̄_F/R, σ_F/R, p̄_B, σ_B),
//!   J(a, s₁, b, s₂) = ∫₀^∞ x N(a; x, s₁) N(b; x, s₂) dx.
//!
//! J is invariant under a common rescaling of its four arguments, which keeps
//! the evaluation balanced for R far from one.

use crate::error::{Error, Result};
use crate::special::{ln_g, ln_gauss, log_sum_exp};
use crate::spectral::WorkDistEstimate;
use ndarray::Array2;
use rayon::prelude::*;
use std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObsRow {
    pub w: f64,
    pub pf: f64,
    pub sf: f64,
    pub pb: f64,
    pub sb: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub rows: Vec<ObsRow>,
}

impl Observation {
    pub fn new(rows: Vec<ObsRow>) -> Result<Self> {
        for r in &rows {
            let vals = [r.w, r.pf, r.sf, r.pb, r.sb];
            if vals.iter().any(|x| !x.is_finite()) {
                return Err(Error::Inference("non-finite observation".into()));
            }
            if !(r.sf > 0.0 && r.sb > 0.0) {
                return Err(Error::Inference(format!("non-positive standard deviation at W = {}", r.w)));
            }
        }
        if rows.is_empty() {
            return Err(Error::Inference("empty observation".into()));
        }
        Ok(Observation { rows })
    }

    /// Pairs p̄_F(W_k) with p̄_B(−W_k) over every k where both exist.
    pub fn from_estimates(f: &WorkDistEstimate, b: &WorkDistEstimate) -> Result<Self> {
        check_pairable(f, b)?;
        let mut rows = Vec::new();
        for (i, (&pf, &vf)) in f.values.iter().zip(&f.variances).enumerate() {
            let k = f.k_min + i as i64;
            if let Some(j) = b.index_of(-k) {
                rows.push(ObsRow {
                    w: f.w(i),
                    pf,
                    sf: vf.sqrt(),
                    pb: b.values[j],
                    sb: b.variances[j].sqrt(),
                });
            }
        }
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub(crate) fn check_pairable(f: &WorkDistEstimate, b: &WorkDistEstimate) -> Result<()> {
    let rel = (f.t_window - b.t_window).abs() / f.t_window;
    if rel > 1e-12 {
        return Err(Error::Config(format!(
            "forward and backward grids differ: T = {} vs {}",
            f.t_window, b.t_window
        )));
    }
    Ok(())
}

/// ln J(a, s₁, b, s₂).
pub fn ln_overlap(a: f64, s1: f64, b: f64, s2: f64) -> f64 {
    let s = s1.hypot(s2);
    let m = (a * (s2 / s) * (s2 / s)) + (b * (s1 / s) * (s1 / s));
    let v = (s1 / s) * s2;
    ln_gauss(a, b, s) + v.ln() + ln_g(m / v)
}

/// ln(C² P(p̄_F, p̄_B | β, ΔF)) for one observation row.
pub fn log_likelihood_point(row: &ObsRow, beta: f64, df: f64) -> Result<f64> {
    if !beta.is_finite() || !df.is_finite() {
        return Err(Error::Inference(format!("non-finite parameters (beta={beta}, dF={df})")));
    }
    let vals = [row.w, row.pf, row.sf, row.pb, row.sb];
    if vals.iter().any(|x| x.is_nan()) {
        return Err(Error::Inference("NaN in observation".into()));
    }
    let v = ll_unchecked(row, beta * (row.w - df));
    if v.is_nan() {
        return Err(Error::Numerical(format!("likelihood evaluated to NaN at W = {}", row.w)));
    }
    Ok(v)
}

#[inline]
fn ll_unchecked(row: &ObsRow, r: f64) -> f64 {
    // ln 2 + ln max(1, R²) − ln R = ln 2 + |r|
    let rc = r.clamp(-700.0, 700.0);
    let h = (-0.5 * rc).exp();
    let hi = 1.0 / h;
    // beyond |r| = 700 the likelihood has saturated to double precision
    LN_2 + rc.abs() + ln_overlap(row.pf * h, row.sf * h, row.pb * hi, row.sb * hi)
}

/// Total log likelihood Σ_k ln P(O_k | β, ΔF).
pub fn log_likelihood(obs: &Observation, beta: f64, df: f64) -> f64 {
    obs.rows.iter().map(|row| ll_unchecked(row, beta * (row.w - df))).sum()
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub beta_grid: Vec<f64>,
    pub df_grid: Vec<f64>,
    /// Normalized log density over (β_i, ΔF_j).
    pub log_density: Array2<f64>,
    /// ln of the trapezoidal integral of the unnormalized density.
    pub log_evidence: f64,
    /// Probability mass on the outermost grid lines.
    pub boundary_mass: f64,
}

impl Posterior {
    pub fn boundary_warning(&self) -> bool {
        self.boundary_mass > 0.01
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.log_density[[i, j]].exp()
    }

    pub fn marginal_beta(&self) -> Vec<f64> {
        let wd = trapezoid_weights(&self.df_grid);
        (0..self.beta_grid.len())
            .map(|i| (0..self.df_grid.len()).map(|j| self.density(i, j) * wd[j]).sum())
            .collect()
    }

    pub fn marginal_df(&self) -> Vec<f64> {
        let wb = trapezoid_weights(&self.beta_grid);
        (0..self.df_grid.len())
            .map(|j| (0..self.beta_grid.len()).map(|i| self.density(i, j) * wb[i]).sum())
            .collect()
    }

    /// Trapezoidal ∫∫ density.
    pub fn total_mass(&self) -> f64 {
        let wb = trapezoid_weights(&self.beta_grid);
        self.marginal_beta().iter().zip(&wb).map(|(m, w)| m * w).sum()
    }

    /// Marginal CDF of β at `x` (piecewise-linear between grid nodes).
    pub fn beta_cdf(&self, x: f64) -> f64 {
        cdf_at(&self.beta_grid, &self.marginal_beta(), x)
    }

    /// Decile index 0..=9 containing `beta`.
    pub fn decile_of(&self, beta: f64) -> usize {
        ((10.0 * self.beta_cdf(beta)).floor() as isize).clamp(0, 9) as usize
    }
}

fn cumulative(x: &[f64], p: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; x.len()];
    for i in 1..x.len() {
        c[i] = c[i - 1] + 0.5 * (p[i] + p[i - 1]) * (x[i] - x[i - 1]);
    }
    let total = *c.last().unwrap();
    if total > 0.0 {
        c.iter_mut().for_each(|v| *v /= total);
    }
    c
}

fn cdf_at(x: &[f64], p: &[f64], at: f64) -> f64 {
    let c = cumulative(x, p);
    if at <= x[0] {
        return 0.0;
    }
    if at >= x[x.len() - 1] {
        return 1.0;
    }
    let i = x.partition_point(|&v| v <= at);
    let f = (at - x[i - 1]) / (x[i] - x[i - 1]);
    c[i - 1] + f * (c[i] - c[i - 1])
}

fn quantile(x: &[f64], p: &[f64], q: f64) -> f64 {
    let c = cumulative(x, p);
    let i = c.partition_point(|&v| v < q).clamp(1, x.len() - 1);
    let dc = c[i] - c[i - 1];
    if dc <= 0.0 {
        return x[i];
    }
    x[i - 1] + (q - c[i - 1]) / dc * (x[i] - x[i - 1])
}

fn check_grid(g: &[f64], name: &str) -> Result<()> {
    if g.len() < 2 || g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} grid must be finite and strictly increasing")));
    }
    Ok(())
}

/// Posterior under the flat prior.
pub fn posterior(obs: &Observation, beta_grid: &[f64], df_grid: &[f64]) -> Result<Posterior> {
    posterior_with_prior(obs, beta_grid, df_grid, &|_, _| 0.0)
}

/// Posterior with a user log-prior ln P(β, ΔF) (up to a constant).
pub fn posterior_with_prior(
    obs: &Observation,
    beta_grid: &[f64],
    df_grid: &[f64],
    log_prior: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<Posterior> {
    check_grid(beta_grid, "beta")?;
    check_grid(df_grid, "dF")?;
    let nb = beta_grid.len();
    let nd = df_grid.len();
    let rows: Vec<Vec<f64>> = beta_grid
        .par_iter()
        .map(|&b| df_grid.iter().map(|&d| log_likelihood(obs, b, d) + log_prior(b, d)).collect())
        .collect();
    let mut ld = Array2::zeros((nb, nd));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::Numerical(format!(
                    "log posterior is NaN at beta={}, dF={}",
                    beta_grid[i], df_grid[j]
                )));
            }
            ld[[i, j]] = *v;
        }
    }
    let wb = trapezoid_weights(beta_grid);
    let wd = trapezoid_weights(df_grid);
    let log_evidence = log_sum_exp(
        (0..nb)
            .flat_map(|i| (0..nd).map(move |j| (i, j)))
            .map(|(i, j)| ld[[i, j]] + wb[i].ln() + wd[j].ln())
            .collect::<Vec<_>>(),
    );
    if !log_evidence.is_finite() {
        return Err(Error::Numerical("posterior has no finite mass on the grid".into()));
    }
    ld.mapv_inplace(|v| v - log_evidence);
    let mut boundary_mass = 0.0;
    for i in 0..nb {
        for j in 0..nd {
            if i == 0 || j == 0 || i == nb - 1 || j == nd - 1 {
                boundary_mass += ld[[i, j]].exp() * wb[i] * wd[j];
            }
        }
    }
    let post = Posterior {
        beta_grid: beta_grid.to_vec(),
        df_grid: df_grid.to_vec(),
        log_density: ld,
        log_evidence,
        boundary_mass,
    };
    if post.boundary_warning() {
        log::warn!("posterior mass {:.3} on grid boundary; grid may be too small", post.boundary_mass);
    }
    Ok(post)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean_beta: f64,
    pub std_beta: f64,
    /// β at CDF = 0.1, 0.2, ..., 0.9.
    pub beta_deciles: [f64; 9],
    pub mean_df: f64,
    pub std_df: f64,
}

fn moments(x: &[f64], p: &[f64]) -> (f64, f64) {
    let w = trapezoid_weights(x);
    let norm: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
    let mean = x.iter().zip(p).zip(&w).map(|((x, p), w)| x * p * w).sum::<f64>() / norm;
    let var = x
        .iter()
        .zip(p)
        .zip(&w)
        .map(|((x, p), w)| (x - mean) * (x - mean) * p * w)
        .sum::<f64>()
        / norm;
    (mean, var.max(0.0).sqrt())
}

pub fn marginals_and_summary(post: &Posterior) -> PosteriorSummary {
    let mb = post.marginal_beta();
    let md = post.marginal_df();
    let (mean_beta, std_beta) = moments(&post.beta_grid, &mb);
    let (mean_df, std_df) = moments(&post.df_grid, &md);
    let mut beta_deciles = [0.0; 9];
    for (q, d) in beta_deciles.iter_mut().enumerate() {
        *d = quantile(&post.beta_grid, &mb, (q + 1) as f64 / 10.0);
    }
    PosteriorSummary {
        mean_beta,
        std_beta,
        beta_deciles,
        mean_df,
        std_df,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSettings {
    pub coarse_points: usize,
    pub fine_points: usize,
    /// Cells whose log density is within this many nats of the maximum define
    /// the zoom box.
    pub zoom_nats: f64,
    pub max_zoom_passes: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            coarse_points: 120,
            fine_points: 400,
            zoom_nats: 30.0,
            max_zoom_passes: 3,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

const MAX_COARSE_SHIFTS: usize = 4;

fn argmax(a: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut v = f64::NEG_INFINITY;
    for ((i, j), &x) in a.indexed_iter() {
        if x > v {
            v = x;
            best = (i, j);
        }
    }
    best
}

/// Index box (inclusive) of cells within `nats` of the maximum, widened by one cell.
fn significant_box(p: &Posterior, nats: f64) -> (usize, usize, usize, usize) {
    let max = p.log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (nb, nd) = p.log_density.dim();
    let (mut i0, mut i1, mut j0, mut j1) = (nb, 0, nd, 0);
    for ((i, j), &v) in p.log_density.indexed_iter() {
        if v >= max - nats {
            i0 = i0.min(i);
            i1 = i1.max(i);
            j0 = j0.min(j);
            j1 = j1.max(j);
        }
    }
    (
        i0.saturating_sub(1),
        (i1 + 1).min(nb - 1),
        j0.saturating_sub(1),
        (j1 + 1).min(nd - 1),
    )
}

/// Posterior on an automatically placed grid.
///
/// A coarse pass spans β ∈ [β₀/10, 10β₀] (log spaced, moved by decades while
/// the peak lies on its edge) and ΔF over the range of observed work values;
/// subsequent passes zoom onto the box holding every cell
/// within `zoom_nats` of the peak, on a linear `fine_points`² grid.
pub fn auto_posterior(obs: &Observation, beta_pilot: f64, settings: &GridSettings) -> Result<Posterior> {
    if !(beta_pilot > 0.0 && beta_pilot.is_finite()) {
        return Err(Error::Inference(format!("invalid pilot beta {beta_pilot}")));
    }
    let wmin = obs.rows.iter().map(|r| r.w).fold(f64::INFINITY, f64::min);
    let wmax = obs.rows.iter().map(|r| r.w).fold(f64::NEG_INFINITY, f64::max);
    if !(wmax > wmin) {
        return Err(Error::Inference("observation spans a single work value".into()));
    }
    let nc = settings.coarse_points.max(3);
    let df_grid = linspace(wmin, wmax, nc);
    let mut centre = beta_pilot;
    let mut post = posterior(obs, &logspace(centre / 10.0, centre * 10.0, nc), &df_grid)?;
    // move the coarse window a decade at a time while the peak sits on its edge
    for _ in 0..MAX_COARSE_SHIFTS {
        let (imax, _) = argmax(&post.log_density);
        let shift = if imax + 1 >= nc {
            10.0
        } else if imax == 0 {
            0.1
        } else {
            break;
        };
        centre *= shift;
        log::debug!("posterior peak on the coarse β edge; recentring at {centre}");
        post = posterior(obs, &logspace(centre / 10.0, centre * 10.0, nc), &df_grid)?;
    }
    for pass in 0..settings.max_zoom_passes {
        let (i0, i1, j0, j1) = significant_box(&post, settings.zoom_nats);
        let (nb, nd) = post.log_density.dim();
        let span_b = i1 - i0;
        let span_d = j1 - j0;
        // stop once the significant region is well resolved on the current grid
        if pass > 0 && span_b * 4 >= nb && span_d * 4 >= nd {
            break;
        }
        let nf = settings.fine_points.max(3);
        let bg = linspace(post.beta_grid[i0], post.beta_grid[i1], nf);
        let dg = linspace(post.df_grid[j0], post.df_grid[j1], nf);
        let next = posterior(obs, &bg, &dg)?;
        post = next;
        let _ = (nb, nd);
    }
    Ok(post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use num_complex::Complex64 as C64;

    fn oracle(row: &ObsRow, r: f64) -> f64 {
        // ∫₀^∞ N(p̄_F; R x, σ_F) N(p̄_B; x, σ_B) x dx · 2 max(1, R²)
        let rr = r.exp();
        let f = |x: f64| {
            let a = (-(row.pf - rr * x).powi(2) / (2.0 * row.sf * row.sf)).exp() / (row.sf * (2.0 * std::f64::consts::PI).sqrt());
            let b = (-(row.pb - x).powi(2) / (2.0 * row.sb * row.sb)).exp() / (row.sb * (2.0 * std::f64::consts::PI).sqrt());
            C64::new(a * b * x, 0.0)
        };
        let hi = 50.0 * (row.sb + row.pb.abs() + (row.pf.abs() + row.sf) / rr);
        let v = integrate(f, 0.0, hi, &[], 1e-16).value.re;
        (2.0 * rr.max(1.0) * rr.max(1.0) * v).ln()
    }

    #[test]
    fn matches_direct_integral() {
        let row = ObsRow {
            w: 0.0,
            pf: 0.3,
            sf: 0.05,
            pb: 0.2,
            sb: 0.04,
        };
        for r in [-1.0, -0.2, 0.0, 0.4, 1.3] {
            let v = ll_unchecked(&row, r);
            assert!((v - oracle(&row, r)).abs() < 1e-8, "r={r}: {v} vs {}", oracle(&row, r));
        }
    }

    #[test]
    fn symmetric_at_unit_ratio() {
        let row = ObsRow {
            w: 0.2,
            pf: 0.1,
            sf: 0.03,
            pb: 0.1,
            sb: 0.03,
        };
        let swapped = ObsRow {
            pf: row.pb,
            sf: row.sb,
            pb: row.pf,
            sb: row.sf,
            ..row
        };
        assert!((ll_unchecked(&row, 0.0) - ll_unchecked(&swapped, 0.0)).abs() < 1e-14);
        // the likelihood at r and at −r with F and B exchanged coincide
        assert!((ll_unchecked(&row, 0.7) - ll_unchecked(&swapped, -0.7)).abs() < 1e-12);
    }

    #[test]
    fn extreme_ratios_saturate() {
        let row = ObsRow {
            w: 0.0,
            pf: 0.02,
            sf: 0.01,
            pb: -0.01,
            sb: 0.01,
        };
        let a = ll_unchecked(&row, 300.0);
        let b = ll_unchecked(&row, 600.0);
        let c = ll_unchecked(&row, 2000.0);
        assert!(a.is_finite() && b.is_finite() && c.is_finite());
        assert!((a - b).abs() < 1e-8 && (b - c).abs() < 1e-8);
        let d = ll_unchecked(&row, -300.0);
        let e = ll_unchecked(&row, -2000.0);
        assert!(d.is_finite() && (d - e).abs() < 1e-8);
    }

    #[test]
    fn nan_rejected() {
        let row = ObsRow {
            w: 0.0,
            pf: f64::NAN,
            sf: 0.1,
            pb: 0.1,
            sb: 0.1,
        };
        assert!(log_likelihood_point(&row, 1.0, 0.0).is_err());
        assert!(Observation::new(vec![row]).is_err());
    }

    fn uniform_posterior(a: f64, b: f64) -> Posterior {
        let bg = linspace(a, b, 201);
        let dg = linspace(-1.0, 1.0, 11);
        let mut ld = Array2::zeros((bg.len(), dg.len()));
        ld.fill(-((b - a) * 2.0f64).ln());
        Posterior {
            beta_grid: bg,
            df_grid: dg,
            log_density: ld,
            log_evidence: 0.0,
            boundary_mass: 0.0,
        }
    }

    #[test]
    fn uniform_deciles() {
        let p = uniform_posterior(2.0, 3.0);
        let s = marginals_and_summary(&p);
        for (j, d) in s.beta_deciles.iter().enumerate() {
            assert!((d - (2.0 + (j + 1) as f64 / 10.0)).abs() < 1e-12);
        }
        assert!((s.mean_beta - 2.5).abs() < 1e-12);
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(p.decile_of(2.05), 0);
        assert_eq!(p.decile_of(2.95), 9);
        assert_eq!(p.decile_of(2.55), 5);
    }

    #[test]
    fn trapezoid_on_nonuniform_grid() {
        let x = [0.0, 0.1, 0.5, 1.0];
        let w = trapezoid_weights(&x);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| x * w).sum();
        assert!((integral - 0.5).abs() < 1e-15);
    }
}
