//! Sample → reconstruct → infer for one experiment, and sweeps of experiments.

use super::config::ExperimentConfig;
use super::engine::{prepare, Prepared};
use super::io::{estimate_table, fmt_f64, series_table, Table};
use crate::bayes::{auto_posterior, marginals_and_summary, Observation, Posterior};
use crate::error::{Error, Result, StageExt};
use crate::freq::{log_ratio_points, weighted_fit, FitReport, LogRatioPoints};
use crate::measurement::{sample_series, CharFnSeries};
use crate::spectral::{leakage_aliasing_report, predicted_variance, work_distribution, LeakageAliasingReport, WorkDistEstimate};
use rayon::prelude::*;
use std::path::Path;

/// Environment variable holding the calibration pool size.
pub const THREADS_ENV: &str = "WORKTHERMO_THREADS";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of experiment `index` under the base seed.
pub fn experiment_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

fn sub_seed(seed: u64, lane: u64) -> u64 {
    splitmix64(seed.wrapping_add(lane.wrapping_mul(0x632b_e59b_d9b4_e019)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesRecord {
    pub mean_beta: f64,
    pub std_beta: f64,
    pub mean_df: f64,
    pub std_df: f64,
    /// Decile (0..=9) of the posterior β marginal holding the true β.
    pub decile_true: usize,
    pub boundary_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqRecord {
    pub beta: f64,
    pub sigma_beta: f64,
    pub delta_f: f64,
    pub sigma_delta_f: f64,
    pub n_points: usize,
}

impl From<FitReport> for FreqRecord {
    fn from(f: FitReport) -> Self {
        FreqRecord {
            beta: f.beta,
            sigma_beta: f.sigma_beta(),
            delta_f: f.delta_f,
            sigma_delta_f: f.sigma_delta_f(),
            n_points: f.n_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub index: usize,
    pub seed: u64,
    pub bayes: Option<BayesRecord>,
    pub freq: Option<FreqRecord>,
    pub diagnostics: LeakageAliasingReport,
}

/// Full intermediate products of one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentProducts {
    pub record: ExperimentRecord,
    pub series_f: CharFnSeries,
    pub series_b: CharFnSeries,
    pub estimate_f: WorkDistEstimate,
    pub estimate_b: WorkDistEstimate,
    pub log_ratio: Option<LogRatioPoints>,
    pub posterior: Option<Posterior>,
}

fn reconstruct(cfg: &ExperimentConfig, prep: &Prepared, s: &CharFnSeries, exact: &CharFnSeries) -> Result<WorkDistEstimate> {
    let mut e = work_distribution(s, cfg.window_spec(), prep.k_range)?;
    if cfg.n_meas.is_none() {
        let v = predicted_variance(exact, cfg.window_spec(), cfg.qubit.coherence(), cfg.exact_nominal_n_meas);
        e.variances = vec![v; e.values.len()];
    }
    Ok(e)
}

/// Runs experiment `index` against prepared exact data.
pub fn analyze(cfg: &ExperimentConfig, prep: &Prepared, index: usize) -> Result<ExperimentProducts> {
    let seed = experiment_seed(cfg.seed, index);
    let (series_f, series_b) = match cfg.n_meas {
        Some(n) => (
            sample_series(&prep.forward, &cfg.qubit, cfg.quench.tau, n, sub_seed(seed, 1)).stage("sample forward")?,
            sample_series(&prep.backward, &cfg.qubit, cfg.quench.tau, n, sub_seed(seed, 2)).stage("sample backward")?,
        ),
        None => (prep.forward.clone(), prep.backward.clone()),
    };
    let estimate_f = reconstruct(cfg, prep, &series_f, &prep.forward).stage("reconstruct forward")?;
    let estimate_b = reconstruct(cfg, prep, &series_b, &prep.backward).stage("reconstruct backward")?;
    let diagnostics = leakage_aliasing_report(&prep.forward, prep.sigma_q(), cfg.beta_guess());

    let mut log_ratio = None;
    let mut freq = None;
    if cfg.inference.freq() || cfg.inference.bayes() {
        // the frequentist slope also seeds the Bayesian grid
        let lr = log_ratio_points(&estimate_f, &estimate_b, cfg.n_resample, sub_seed(seed, 3)).stage("freq")?;
        match weighted_fit(&lr) {
            Ok(f) => freq = Some(FreqRecord::from(f)),
            Err(e) if cfg.inference.bayes() => log::debug!("experiment {index}: frequentist fit unavailable: {e}"),
            Err(e) => return Err(e.at("freq")),
        }
        log_ratio = Some(lr);
    }
    let mut posterior = None;
    let mut bayes = None;
    if cfg.inference.bayes() {
        let obs = Observation::from_estimates(&estimate_f, &estimate_b).stage("bayes")?;
        let pilot = freq
            .map(|f| f.beta)
            .filter(|b| b.is_finite() && *b > 0.0)
            .unwrap_or(cfg.beta_guess());
        let post = auto_posterior(&obs, pilot, &cfg.grid.into()).stage("bayes")?;
        if post.boundary_warning() {
            log::warn!("experiment {index}: posterior mass {:.2e} at the grid boundary", post.boundary_mass);
        }
        let s = marginals_and_summary(&post);
        bayes = Some(BayesRecord {
            mean_beta: s.mean_beta,
            std_beta: s.std_beta,
            mean_df: s.mean_df,
            std_df: s.std_df,
            decile_true: post.decile_of(cfg.beta_true),
            boundary_mass: post.boundary_mass,
        });
        posterior = Some(post);
    }
    if !cfg.inference.freq() {
        freq = None;
    }
    Ok(ExperimentProducts {
        record: ExperimentRecord {
            index,
            seed,
            bayes,
            freq,
            diagnostics,
        },
        series_f,
        series_b,
        estimate_f,
        estimate_b,
        log_ratio,
        posterior,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregates {
    pub n: usize,
    /// Mean of the posterior means.
    pub mu_beta: f64,
    /// Spread of the posterior means.
    pub sigma_beta: f64,
    pub bias: f64,
    pub mean_posterior_std: f64,
    pub decile_counts: [usize; 10],
    /// Fraction of runs with |posterior mean − β| ≤ 3 posterior std.
    pub coverage_3sigma: f64,
    pub freq_mu_beta: f64,
    pub freq_sigma_beta: f64,
    pub freq_failures: usize,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

pub fn aggregate(records: &[ExperimentRecord], beta_true: f64) -> Aggregates {
    let bm: Vec<f64> = records.iter().filter_map(|r| r.bayes.map(|b| b.mean_beta)).collect();
    let bs: Vec<f64> = records.iter().filter_map(|r| r.bayes.map(|b| b.std_beta)).collect();
    let fm: Vec<f64> = records.iter().filter_map(|r| r.freq.map(|f| f.beta)).collect();
    let (mu_beta, sigma_beta) = mean_std(&bm);
    let (freq_mu_beta, freq_sigma_beta) = mean_std(&fm);
    let mut decile_counts = [0usize; 10];
    let mut covered = 0usize;
    for b in records.iter().filter_map(|r| r.bayes) {
        decile_counts[b.decile_true.min(9)] += 1;
        if (b.mean_beta - beta_true).abs() <= 3.0 * b.std_beta {
            covered += 1;
        }
    }
    Aggregates {
        n: records.len(),
        mu_beta,
        sigma_beta,
        bias: mu_beta - beta_true,
        mean_posterior_std: mean_std(&bs).0,
        decile_counts,
        coverage_3sigma: if bm.is_empty() {
            f64::NAN
        } else {
            covered as f64 / bm.len() as f64
        },
        freq_mu_beta,
        freq_sigma_beta,
        freq_failures: records.iter().filter(|r| r.freq.is_none()).count(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub config_hash: String,
    pub beta_true: f64,
    pub t_window: f64,
    pub delta_f_reference: f64,
    pub records: Vec<ExperimentRecord>,
    pub aggregates: Aggregates,
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn result_of(cfg: &ExperimentConfig, prep: &Prepared, records: Vec<ExperimentRecord>) -> RunResult {
    RunResult {
        config_hash: cfg.hash(),
        beta_true: cfg.beta_true,
        t_window: prep.t_window,
        delta_f_reference: prep.delta_f,
        aggregates: aggregate(&records, cfg.beta_true),
        records,
    }
}

/// One experiment (index 0); writes every intermediate product when `out` is given.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(RunResult, ExperimentProducts)> {
    let prep = prepare(cfg)?;
    let products = analyze(cfg, &prep, 0)?;
    let result = result_of(cfg, &prep, vec![products.record.clone()]);
    if let Some(dir) = out {
        write_products(dir, cfg, &prep, &products)?;
        records_table(&result).write(&dir.join("summary.tsv"))?;
    }
    Ok((result, products))
}

/// `cfg.n_experiments` independent experiments on a shared exact series.
pub fn run_calibration_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<RunResult> {
    let pool = pool()?;
    let records: Result<Vec<ExperimentRecord>> = pool.install(|| {
        (0..cfg.n_experiments)
            .into_par_iter()
            .map(|i| analyze(cfg, prep, i).map(|p| p.record))
            .collect()
    });
    Ok(result_of(cfg, prep, records?))
}

pub fn run_calibration(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunResult> {
    let prep = prepare(cfg)?;
    let result = run_calibration_prepared(cfg, &prep)?;
    if let Some(dir) = out {
        records_table(&result).write(&dir.join("experiments.tsv"))?;
        aggregates_table(std::slice::from_ref(&result)).write(&dir.join("aggregates.tsv"))?;
    }
    Ok(result)
}

/// Calibration at each β with the window re-chosen per β.
pub fn run_beta_sweep(cfg: &ExperimentConfig, betas: &[f64], out: Option<&Path>) -> Result<Vec<RunResult>> {
    let mut results = Vec::with_capacity(betas.len());
    for &b in betas {
        let mut c = cfg.clone();
        c.beta_true = b;
        c.beta_guess = None;
        c.t_window = None;
        results.push(run_calibration(&c, None)?);
    }
    if let Some(dir) = out {
        aggregates_table(&results).write(&dir.join("beta_sweep.tsv"))?;
    }
    Ok(results)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "nan".into())
}

pub const RECORD_COLUMNS: [&str; 16] = [
    "index",
    "seed",
    "bayes_mean_beta",
    "bayes_std_beta",
    "bayes_mean_df",
    "bayes_std_df",
    "bayes_decile",
    "boundary_mass",
    "freq_beta",
    "freq_sigma_beta",
    "freq_df",
    "freq_sigma_df",
    "freq_points",
    "aliasing_ratio",
    "window_ratio",
    "diagnostics_pass",
];

pub fn records_table(r: &RunResult) -> Table {
    let mut t = Table::new("experiments", &RECORD_COLUMNS);
    t.set_meta("config_hash", &r.config_hash);
    t.set_meta("beta_true", fmt_f64(r.beta_true));
    t.set_meta("t_window", fmt_f64(r.t_window));
    t.set_meta("delta_f_reference", fmt_f64(r.delta_f_reference));
    for rec in &r.records {
        let b = rec.bayes;
        let f = rec.freq;
        let d = rec.diagnostics;
        t.push(vec![
            rec.index.to_string(),
            rec.seed.to_string(),
            opt(b.map(|b| b.mean_beta)),
            opt(b.map(|b| b.std_beta)),
            opt(b.map(|b| b.mean_df)),
            opt(b.map(|b| b.std_df)),
            b.map(|b| b.decile_true.to_string()).unwrap_or_else(|| "-".into()),
            opt(b.map(|b| b.boundary_mass)),
            opt(f.map(|f| f.beta)),
            opt(f.map(|f| f.sigma_beta)),
            opt(f.map(|f| f.delta_f)),
            opt(f.map(|f| f.sigma_delta_f)),
            f.map(|f| f.n_points.to_string()).unwrap_or_else(|| "-".into()),
            fmt_f64(d.aliasing_ratio),
            fmt_f64(d.window_ratio),
            (d.aliasing_pass && d.window_pass).to_string(),
        ]);
    }
    t
}

/// Inverse of [`records_table`].
pub fn records_from_table(t: &Table) -> Result<RunResult> {
    let col = |name: &str| t.column(name);
    let f = |row: &Vec<String>, name: &str| -> Result<f64> { super::io::parse_f64(&row[col(name)?]) };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("bad integer '{s}': {e}")));
    let parse_bool = |s: &str| s.parse::<bool>().map_err(|e| Error::Parse(format!("bad flag '{s}': {e}")));
    let beta_true = super::io::parse_f64(t.require_meta("beta_true")?)?;
    let mut records = Vec::new();
    for row in &t.rows {
        let decile = &row[col("bayes_decile")?];
        let bayes = if decile == "-" {
            None
        } else {
            Some(BayesRecord {
                mean_beta: f(row, "bayes_mean_beta")?,
                std_beta: f(row, "bayes_std_beta")?,
                mean_df: f(row, "bayes_mean_df")?,
                std_df: f(row, "bayes_std_df")?,
                decile_true: parse_usize(decile)?,
                boundary_mass: f(row, "boundary_mass")?,
            })
        };
        let npts = &row[col("freq_points")?];
        let freq = if npts == "-" {
            None
        } else {
            Some(FreqRecord {
                beta: f(row, "freq_beta")?,
                sigma_beta: f(row, "freq_sigma_beta")?,
                delta_f: f(row, "freq_df")?,
                sigma_delta_f: f(row, "freq_sigma_df")?,
                n_points: parse_usize(npts)?,
            })
        };
        let aliasing_ratio = f(row, "aliasing_ratio")?;
        let window_ratio = f(row, "window_ratio")?;
        let pass = parse_bool(&row[col("diagnostics_pass")?])?;
        let diagnostics = LeakageAliasingReport {
            aliasing_ratio,
            window_ratio,
            aliasing_pass: aliasing_ratio >= crate::spectral::ALIASING_THRESHOLD,
            window_pass: window_ratio >= crate::spectral::WINDOW_THRESHOLD,
        };
        if pass != (diagnostics.aliasing_pass && diagnostics.window_pass) {
            return Err(Error::Parse("diagnostics flag disagrees with ratios".into()));
        }
        records.push(ExperimentRecord {
            index: parse_usize(&row[col("index")?])?,
            seed: row[col("seed")?].parse().map_err(|e| Error::Parse(format!("bad seed: {e}")))?,
            bayes,
            freq,
            diagnostics,
        });
    }
    Ok(RunResult {
        config_hash: t.require_meta("config_hash")?.to_string(),
        beta_true,
        t_window: super::io::parse_f64(t.require_meta("t_window")?)?,
        delta_f_reference: super::io::parse_f64(t.require_meta("delta_f_reference")?)?,
        aggregates: aggregate(&records, beta_true),
        records,
    })
}

/// One row per run: β, T and the sweep statistics, including the fractional
/// spread σ_β/β and bias (μ_β − β)/β.
pub fn aggregates_table(results: &[RunResult]) -> Table {
    let mut cols = vec![
        "beta",
        "t_window",
        "n",
        "mu_beta",
        "sigma_beta",
        "bias",
        "sigma_over_beta",
        "bias_over_beta",
        "mean_posterior_std",
        "coverage_3sigma",
        "freq_mu_beta",
        "freq_sigma_beta",
    ];
    let deciles: Vec<String> = (0..10).map(|i| format!("decile{i}")).collect();
    cols.extend(deciles.iter().map(String::as_str));
    let mut t = Table::new("aggregates", &cols);
    if let Some(r) = results.first() {
        t.set_meta("config_hash", &r.config_hash);
    }
    for r in results {
        let a = &r.aggregates;
        let mut row = vec![
            fmt_f64(r.beta_true),
            fmt_f64(r.t_window),
            a.n.to_string(),
            fmt_f64(a.mu_beta),
            fmt_f64(a.sigma_beta),
            fmt_f64(a.bias),
            fmt_f64(a.sigma_beta / r.beta_true),
            fmt_f64(a.bias / r.beta_true),
            fmt_f64(a.mean_posterior_std),
            fmt_f64(a.coverage_3sigma),
            fmt_f64(a.freq_mu_beta),
            fmt_f64(a.freq_sigma_beta),
        ];
        row.extend(a.decile_counts.iter().map(|c| c.to_string()));
        t.push(row);
    }
    t
}

pub fn write_products(dir: &Path, cfg: &ExperimentConfig, prep: &Prepared, p: &ExperimentProducts) -> Result<()> {
    let hash = cfg.hash();
    let write = |mut t: Table, name: &str| -> Result<()> {
        t.set_meta("config_hash", &hash);
        t.write(&dir.join(name))
    };
    write(series_table(&prep.forward), "chi_forward_exact.tsv")?;
    write(series_table(&prep.backward), "chi_backward_exact.tsv")?;
    if cfg.n_meas.is_some() {
        write(series_table(&p.series_f), "chi_forward.tsv")?;
        write(series_table(&p.series_b), "chi_backward.tsv")?;
    }
    write(estimate_table(&p.estimate_f), "work_forward.tsv")?;
    write(estimate_table(&p.estimate_b), "work_backward.tsv")?;
    if let Some(lr) = &p.log_ratio {
        write(log_ratio_table(lr), "log_ratio.tsv")?;
    }
    if let Some(post) = &p.posterior {
        write(posterior_marginal_table(post), "posterior_beta.tsv")?;
    }
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

/// Crooks plot data: W against ln p_F(W)/p_B(−W) with error bars.
pub fn log_ratio_table(lr: &LogRatioPoints) -> Table {
    let mut t = Table::new("log_ratio", &["w", "l_raw", "l_bar", "variance", "included"]);
    for p in &lr.points {
        t.push(vec![
            fmt_f64(p.w),
            fmt_f64(p.l_raw),
            fmt_f64(p.l_bar),
            fmt_f64(p.variance),
            p.included().to_string(),
        ]);
    }
    t
}

pub fn posterior_marginal_table(post: &Posterior) -> Table {
    let mut t = Table::new("posterior_beta", &["beta", "density", "cdf"]);
    t.set_meta("log_evidence", fmt_f64(post.log_evidence));
    t.set_meta("boundary_mass", fmt_f64(post.boundary_mass));
    let m = post.marginal_beta();
    for (b, d) in post.beta_grid.iter().zip(m) {
        t.push(vec![fmt_f64(*b), fmt_f64(d), fmt_f64(post.beta_cdf(*b))]);
    }
    t
}
