use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use workthermo::bayes::{auto_posterior, marginals_and_summary, GridSettings, Observation};
use workthermo::freq::{log_ratio_points, weighted_fit};
use workthermo::harness::io::{estimate_from_table, estimate_table, series_from_table, series_table, Table};
use workthermo::harness::pipeline::{aggregates_table, log_ratio_table, posterior_marginal_table};
use workthermo::harness::{prepare, run_beta_sweep, run_calibration, run_experiment, ExperimentConfig, RunResult};
use workthermo::measurement::sample_series;
use workthermo::model::QubitConfig;
use workthermo::spectral::{short_time_cumulants, work_distribution, WindowKind, WindowSpec};
use workthermo::{Error, Result};

/// Work-distribution thermometry: simulate, reconstruct, infer.
#[derive(Parser)]
#[command(name = "workthermo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set beta_true=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(&self.config, &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact forward and backward characteristic functions.
    Chi {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-shot estimate of an exact series.
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_meas: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Quench duration, needed for the readout phase when Δ ≠ 0.
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
    },
    /// Work distribution on the W_k = kπ/T grid.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid covers −K..=K; estimated from the short-time cumulants when absent.
        #[arg(long)]
        k_max: Option<i64>,
        #[arg(long, default_value = "rectangular")]
        window: String,
    },
    /// β and ΔF from forward and backward work distributions.
    Infer {
        #[arg(long)]
        forward: PathBuf,
        #[arg(long)]
        backward: PathBuf,
        #[arg(long, default_value = "both")]
        method: String,
        /// Centre of the initial β grid; the frequentist slope when absent.
        #[arg(long)]
        beta_pilot: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        n_resample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One end-to-end experiment with every intermediate file.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated experiments; optionally over several β values.
    Calibrate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated β values; the window is re-chosen for each.
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
        /// Exit with status 4 unless deciles, bias and spread meet the thresholds.
        #[arg(long)]
        check: bool,
    },
    /// Reference values from the independent oracles.
    Oracle {
        #[arg(long)]
        out: PathBuf,
    },
}

fn k_range_from_series(s: &workthermo::measurement::CharFnSeries) -> Result<(i64, i64)> {
    let c = short_time_cumulants(s)?;
    let sigma = c.variance.max(0.0).sqrt();
    let k = ((c.mean.abs() + 6.0 * sigma) * s.t_window / std::f64::consts::PI).ceil() as i64;
    let k = k.clamp(1, s.n_steps as i64 - 1);
    Ok((-k, k))
}

fn print_result(r: &RunResult) {
    let a = &r.aggregates;
    println!("config_hash {}", r.config_hash);
    println!(
        "beta_true {} t_window {} delta_f_reference {}",
        r.beta_true, r.t_window, r.delta_f_reference
    );
    if a.n == 1 {
        let rec = &r.records[0];
        if let Some(b) = rec.bayes {
            println!(
                "bayes beta {:.6} ± {:.6}  delta_f {:.6} ± {:.6}",
                b.mean_beta, b.std_beta, b.mean_df, b.std_df
            );
        }
        if let Some(f) = rec.freq {
            println!(
                "freq  beta {:.6} ± {:.6}  delta_f {:.6} ± {:.6}  ({} points)",
                f.beta, f.sigma_beta, f.delta_f, f.sigma_delta_f, f.n_points
            );
        }
        let d = rec.diagnostics;
        println!("aliasing ratio {:.2} window ratio {:.2}", d.aliasing_ratio, d.window_ratio);
    } else {
        println!(
            "n {} mu_beta {:.6} sigma_beta {:.6} bias {:.6} mean posterior std {:.6} coverage {:.3}",
            a.n, a.mu_beta, a.sigma_beta, a.bias, a.mean_posterior_std, a.coverage_3sigma
        );
        println!("decile counts {:?}", a.decile_counts);
    }
}

/// Decile frequencies in [0.04, 0.17], |bias|/β ≤ 5%, σ_β/β ≤ 15%.
fn passes_check(r: &RunResult) -> bool {
    let a = &r.aggregates;
    let n: usize = a.decile_counts.iter().sum();
    let deciles_ok = n > 0
        && a.decile_counts.iter().all(|&c| {
            let f = c as f64 / n as f64;
            (0.04..=0.17).contains(&f)
        });
    deciles_ok && (a.bias / r.beta_true).abs() <= 0.05 && a.sigma_beta / r.beta_true <= 0.15
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Chi { cfg, out } => {
            let cfg = cfg.load()?;
            let prep = prepare(&cfg)?;
            let hash = cfg.hash();
            for (s, name) in [(&prep.forward, "chi_forward_exact.tsv"), (&prep.backward, "chi_backward_exact.tsv")] {
                let mut t = series_table(s);
                t.set_meta("config_hash", &hash);
                t.write(&out.join(name))?;
            }
            println!("T {} k range {:?} delta_f {}", prep.t_window, prep.k_range, prep.delta_f);
            println!("forward {:?}\nbackward {:?}", prep.cumulants_f, prep.cumulants_b);
        }
        Command::Sample {
            input,
            out,
            n_meas,
            seed,
            tau,
            delta,
        } => {
            let exact = series_from_table(&Table::read(&input)?)?;
            let qubit = QubitConfig {
                delta,
                ..QubitConfig::default()
            };
            let s = sample_series(&exact, &qubit, tau, n_meas, seed)?;
            series_table(&s).write(&out)?;
        }
        Command::Reconstruct { input, out, k_max, window } => {
            let s = series_from_table(&Table::read(&input)?)?;
            let range = match k_max {
                Some(k) if k > 0 => (-k, k),
                Some(k) => return Err(Error::Config(format!("k_max must be positive, got {k}"))),
                None => k_range_from_series(&s)?,
            };
            let spec = WindowSpec {
                kind: WindowKind::parse(&window)?,
            };
            estimate_table(&work_distribution(&s, spec, range)?).write(&out)?;
        }
        Command::Infer {
            forward,
            backward,
            method,
            beta_pilot,
            n_resample,
            seed,
            out,
        } => {
            let f = estimate_from_table(&Table::read(&forward)?)?;
            let b = estimate_from_table(&Table::read(&backward)?)?;
            let (want_bayes, want_freq) = match method.as_str() {
                "bayes" => (true, false),
                "freq" => (false, true),
                "both" => (true, true),
                m => return Err(Error::Config(format!("unknown method '{m}'"))),
            };
            let lr = log_ratio_points(&f, &b, n_resample, seed)?;
            let fit = weighted_fit(&lr);
            if want_freq {
                let fit = fit.as_ref().map_err(|e| Error::Inference(e.to_string()))?;
                println!(
                    "freq  beta {:.6} ± {:.6}  delta_f {:.6} ± {:.6}",
                    fit.beta,
                    fit.sigma_beta(),
                    fit.delta_f,
                    fit.sigma_delta_f()
                );
            }
            if let Some(dir) = &out {
                log_ratio_table(&lr).write(&dir.join("log_ratio.tsv"))?;
            }
            if want_bayes {
                let pilot = beta_pilot
                    .or_else(|| fit.as_ref().ok().map(|f| f.beta).filter(|b| *b > 0.0))
                    .ok_or_else(|| Error::Config("no usable β pilot; pass --beta-pilot".into()))?;
                let obs = Observation::from_estimates(&f, &b)?;
                let post = auto_posterior(&obs, pilot, &GridSettings::default())?;
                let s = marginals_and_summary(&post);
                println!(
                    "bayes beta {:.6} ± {:.6}  delta_f {:.6} ± {:.6}",
                    s.mean_beta, s.std_beta, s.mean_df, s.std_df
                );
                if post.boundary_warning() {
                    log::warn!("posterior mass {:.2e} lies on the grid boundary", post.boundary_mass);
                }
                if let Some(dir) = &out {
                    posterior_marginal_table(&post).write(&dir.join("posterior_beta.tsv"))?;
                }
            }
        }
        Command::Run { cfg, out } => {
            let cfg = cfg.load()?;
            let (r, _) = run_experiment(&cfg, Some(&out))?;
            print_result(&r);
        }
        Command::Calibrate { cfg, out, betas, check } => {
            let cfg = cfg.load()?;
            let results = if betas.is_empty() {
                vec![run_calibration(&cfg, Some(&out))?]
            } else {
                run_beta_sweep(&cfg, &betas, Some(&out))?
            };
            aggregates_table(&results).write(&out.join("aggregates.tsv"))?;
            for r in &results {
                print_result(r);
            }
            if check {
                let failed: Vec<f64> = results.iter().filter(|r| !passes_check(r)).map(|r| r.beta_true).collect();
                if !failed.is_empty() {
                    eprintln!("calibration check failed at beta {failed:?}");
                    return Ok(ExitCode::from(4));
                }
                println!("calibration check passed");
            }
        }
        Command::Oracle { out } => {
            let t = workthermo::oracle::fixtures()?;
            t.write(&out)?;
            for row in &t.rows {
                println!("{}", row.join("\t"));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
