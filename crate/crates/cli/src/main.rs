//! Command line front end: configuration ingestion, reference presets, and
//! CSV/JSON/gnuplot output around the core toolkit.

mod config;
mod presets;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sfde_core::{
    certify, compute_resolvent, em_solve, equilibrium_residual, mc_moments, moment_bounds,
    pullback, sample_path, spectral_abscissa, stationary_segment, synchronize, CoreError,
    ResolventTable, Segment, StabilityCertificate, SystemSpec,
};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "sfde", version, about = "Stochastic delay differential equation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Path to a JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: example61 (affine) or example62 (nonlinear).
    #[arg(long)]
    preset: Option<String>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spectral abscissa and exponential-contraction certificate (JSON).
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the fundamental solution (CSV).
    Resolvent {
        #[command(flatten)]
        common: Common,
        /// Table horizon.
        #[arg(long = "T")]
        t: Option<f64>,
    },
    /// One forward solution from the zero history (CSV).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Simulation horizon.
        #[arg(long = "T")]
        t: Option<f64>,
    },
    /// Distance of finite-time pullbacks to a long reference pullback (CSV).
    Pullback {
        #[command(flatten)]
        common: Common,
        /// Pullback times, comma separated.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Invariance residual of the approximate stationary segment (CSV).
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Evaluation time for the residual.
        #[arg(long = "T")]
        t: Option<f64>,
    },
    /// Monte Carlo moment estimates with closed-form bounds (JSON).
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
        /// Truncation horizon for the stationary segment.
        #[arg(long = "T")]
        t: Option<f64>,
    },
    /// Co-simulate two initial histories on one noise path (CSV).
    Synchronize {
        #[command(flatten)]
        common: Common,
        /// Simulation horizon.
        #[arg(long = "T")]
        t: Option<f64>,
        /// Also write a gnuplot script rendering the run (needs --out).
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
}

enum CliError {
    Core(CoreError),
    Config(String),
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

fn describe(e: &CliError) -> (&'static str, String, u8) {
    match e {
        CliError::Config(msg) => ("config", msg.clone(), 1),
        CliError::Io(msg) => ("io", msg.clone(), 1),
        CliError::Core(e) => {
            let kind = match e {
                CoreError::Alignment(_) => "alignment",
                CoreError::Shape(_) => "shape",
                CoreError::Range(_) => "range",
                CoreError::Precondition(_) => "precondition",
                CoreError::Parse { .. } => "parse",
                CoreError::Statistics(_) => "statistics",
                CoreError::Overflow { .. } => "overflow",
                CoreError::RootOnContour { .. } => "root_on_contour",
                CoreError::NonConvergence(_) => "non_convergence",
                CoreError::Evaluation(_) => "evaluation",
                CoreError::Certification(_) => "certification",
            };
            let code = match e {
                CoreError::Overflow { .. }
                | CoreError::RootOnContour { .. }
                | CoreError::NonConvergence(_)
                | CoreError::Evaluation(_)
                | CoreError::Certification(_) => 2,
                _ => 1,
            };
            (kind, e.to_string(), code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, message, code) = describe(&e);
            let payload = json!({ "error": { "kind": kind, "message": message } });
            eprintln!("{payload}");
            ExitCode::from(code)
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?
        }
        (None, Some(name)) => presets::preset(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset `{name}`; available: {}",
                presets::PRESET_NAMES.join(", ")
            ))
        })?,
        _ => {
            return Err(CliError::Config(
                "exactly one of --config and --preset is required".into(),
            ))
        }
    };
    if let Some(seed) = common.seed {
        cfg.rng.master_seed = seed;
    }
    Ok(cfg)
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write as _;
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Io(format!("cannot write to standard output: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

struct Analysis {
    sys: SystemSpec,
    alpha0: f64,
    cert: StabilityCertificate,
    diagnostics: Vec<String>,
    table: ResolventTable,
}

fn analyze_config(cfg: &RunConfig) -> Result<Analysis, CliError> {
    let (sys, mut diagnostics) = cfg.build_system()?;
    let m = &sys.measure;
    let alpha0 = spectral_abscissa(m, 1e-6)?;
    if alpha0 >= 0.0 {
        return Err(CoreError::Certification(format!(
            "spectral abscissa {alpha0} is nonnegative; the linear part is not exponentially stable"
        ))
        .into());
    }
    let grid = cfg.numerics.alpha_grid.clone().unwrap_or_default();
    let alpha_min = grid
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(0.05 * -alpha0);
    let horizon = (10.0 / alpha_min).clamp(m.tau().max(1.0), 200.0);
    let table = compute_resolvent(m, cfg.numerics.h, horizon)?;
    let lipschitz = sys.nonlinearity.as_ref().map_or(0.0, |nl| nl.lipschitz());
    let (cert, cert_diags) = certify(m, lipschitz, alpha0, &grid, cfg.safety(), &table)?;
    diagnostics.extend(cert_diags);
    Ok(Analysis { sys, alpha0, cert, diagnostics, table })
}

/// Truncation horizon: configured value, or enough e-folds of the certified
/// contraction to push the tail below every tolerance in use.
fn t_trunc(cfg: &RunConfig, a: &Analysis) -> f64 {
    if let Some(t) = cfg.numerics.t_trunc {
        return t;
    }
    let rate = if a.sys.nonlinearity.is_some() {
        a.cert.rate.abs()
    } else {
        a.cert.alpha_star
    };
    let h = cfg.numerics.h;
    let t = (40.0 / rate).min(1e4);
    (t / h).ceil() * h
}

fn csv_trajectory(t0: f64, h: f64, values: &[nalgebra::DVector<f64>]) -> String {
    let n = values.first().map_or(0, |v| v.len());
    let mut out = String::from("t");
    for c in 1..=n {
        let _ = write!(out, ",x_{c}");
    }
    out.push('\n');
    for (i, v) in values.iter().enumerate() {
        let _ = write!(out, "{}", t0 + i as f64 * h);
        for c in 0..n {
            let _ = write!(out, ",{}", v[c]);
        }
        out.push('\n');
    }
    out
}

fn default_pair(sys: &SystemSpec, h: f64) -> Result<(Segment, Segment), CliError> {
    if sys.measure.dim() != 1 {
        return Err(CliError::Config(
            "built-in initial histories sin(t) and 2cos(t) are defined for scalar systems only"
                .into(),
        ));
    }
    let tau = sys.measure.tau();
    let xi = Segment::from_fn(tau, h, 1, |u| nalgebra::dvector![u.sin()])?;
    let eta = Segment::from_fn(tau, h, 1, |u| nalgebra::dvector![2.0 * u.cos()])?;
    Ok((xi, eta))
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Analyze { common } => {
            let cfg = load(&common)?;
            let a = analyze_config(&cfg)?;
            let payload = json!({
                "alpha0": a.alpha0,
                "alpha": a.cert.alpha_star,
                "c_alpha": a.cert.c_alpha,
                "lipschitz": a.cert.lipschitz,
                "k": a.cert.k_const,
                "rate": a.cert.rate,
                "certified": a.cert.certified,
                "diagnostics": a.diagnostics,
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&payload).unwrap()))
        }
        Cmd::Resolvent { common, t } => {
            let cfg = load(&common)?;
            let (sys, _) = cfg.build_system()?;
            let horizon = t.unwrap_or_else(|| 10.0 * sys.measure.tau().max(1.0));
            let table = compute_resolvent(&sys.measure, cfg.numerics.h, horizon)?;
            let n = table.dim();
            let mut out = String::from("t");
            for i in 1..=n {
                for j in 1..=n {
                    let _ = write!(out, ",r_{i}_{j}");
                }
            }
            out.push('\n');
            for (time, r) in table.nodes() {
                let _ = write!(out, "{time}");
                for i in 0..n {
                    for j in 0..n {
                        let _ = write!(out, ",{}", r[(i, j)]);
                    }
                }
                out.push('\n');
            }
            emit(&common, &out)
        }
        Cmd::Simulate { common, t } => {
            let cfg = load(&common)?;
            let (sys, _) = cfg.build_system()?;
            let horizon = t.unwrap_or(10.0);
            let h = cfg.numerics.h;
            let path = sample_path(cfg.rng.master_seed, h, 0.0, horizon.max(h), sys.noise_dim())?;
            let xi = Segment::zero(sys.measure.tau(), h, sys.measure.dim())?;
            let (traj, _) = em_solve(&sys, &path, &xi, 0.0, horizon)?;
            emit(&common, &csv_trajectory(traj.t0, traj.h, &traj.values))
        }
        Cmd::Pullback { common, times } => {
            let cfg = load(&common)?;
            let a = analyze_config(&cfg)?;
            let t_ref = t_trunc(&cfg, &a);
            let times = times.unwrap_or_else(|| vec![5.0, 10.0, 15.0]);
            if let Some(&bad) = times.iter().find(|&&t| t < 0.0 || t > t_ref) {
                return Err(CoreError::Range(format!(
                    "pullback time {bad} is outside [0, {t_ref}]"
                ))
                .into());
            }
            let h = cfg.numerics.h;
            let path = sample_path(cfg.rng.master_seed, h, -t_ref, 0.0, a.sys.noise_dim())?;
            let xi = Segment::zero(a.sys.measure.tau(), h, a.sys.measure.dim())?;
            let reference = pullback(&a.sys, &path, &xi, t_ref)?;
            let mut out = String::from("t,dist\n");
            for &t in &times {
                let d = pullback(&a.sys, &path, &xi, t)?.sup_distance(&reference)?;
                let _ = writeln!(out, "{t},{d}");
            }
            emit(&common, &out)
        }
        Cmd::Equilibrium { common, t } => {
            let cfg = load(&common)?;
            let a = analyze_config(&cfg)?;
            let horizon = t_trunc(&cfg, &a);
            let t_eval = t.unwrap_or(5.0);
            let h = cfg.numerics.h;
            let path =
                sample_path(cfg.rng.master_seed, h, -horizon, t_eval.max(h), a.sys.noise_dim())?;
            let st = stationary_segment(&a.sys, &path, horizon, &a.cert)?;
            let res = equilibrium_residual(&a.sys, &path, &st, t_eval)?;
            let mut out = String::from("t,residual,tail_bound\n");
            let _ = writeln!(out, "{t_eval},{res},{}", st.tail_bound);
            emit(&common, &out)
        }
        Cmd::Moments { common, replicas, t } => {
            let cfg = load(&common)?;
            let a = analyze_config(&cfg)?;
            let horizon = t.unwrap_or_else(|| t_trunc(&cfg, &a));
            let replicas = replicas.or(cfg.rng.replicas).unwrap_or(1000);
            let est = mc_moments(
                &a.sys,
                &a.cert,
                replicas,
                cfg.rng.master_seed,
                cfg.numerics.h,
                horizon,
            )?;
            let bounds = moment_bounds(
                &a.sys.measure,
                &a.sys.sigma,
                a.cert.alpha_star,
                a.cert.c_alpha,
                a.sys.noise_dim(),
            )?;
            let (quad_var, quad_low) = sfde_core::variance_quadrature(&a.table, &a.sys.sigma, 0.0)?;
            let payload = json!({
                "replicas": est.replicas,
                "master_seed": est.master_seed,
                "mean": est.mean,
                "var": est.second_moment,
                "sup_mean": est.sup_mean,
                "sup_sq_mean": est.sup_sq_mean,
                "se": {
                    "mean": est.mean_se,
                    "var": est.second_moment_se,
                    "sup_mean": est.sup_mean_se,
                    "sup_sq_mean": est.sup_sq_mean_se,
                },
                "bounds": {
                    "variance": bounds.variance,
                    "std_dev": bounds.std_dev,
                    "sup_mean": bounds.sup_mean,
                    "sup_sq_mean": bounds.sup_second_moment,
                },
                "variance_quadrature": quad_var,
                "variance_quadrature_truncated": quad_low,
            });
            emit(&common, &format!("{}\n", serde_json::to_string_pretty(&payload).unwrap()))
        }
        Cmd::Synchronize { common, t, gnuplot } => {
            let cfg = load(&common)?;
            if gnuplot.is_some() && common.out.is_none() {
                return Err(CliError::Config("--gnuplot requires --out".into()));
            }
            let (sys, _) = cfg.build_system()?;
            let horizon = t.unwrap_or(30.0);
            let h = cfg.numerics.h;
            let (xi, eta) = default_pair(&sys, h)?;
            let path = sample_path(cfg.rng.master_seed, h, 0.0, horizon.max(h), sys.noise_dim())?;
            let (ta, tb, series) = synchronize(&sys, &path, &xi, &eta, horizon)?;
            let n = sys.measure.dim();
            let mut out = String::from("t");
            for c in 1..=n {
                let _ = write!(out, ",x_{c}");
            }
            for c in 1..=n {
                let _ = write!(out, ",y_{c}");
            }
            out.push_str(",dist\n");
            for (i, (time, d)) in series.iter().enumerate() {
                let _ = write!(out, "{time}");
                for c in 0..n {
                    let _ = write!(out, ",{}", ta.values[i][c]);
                }
                for c in 0..n {
                    let _ = write!(out, ",{}", tb.values[i][c]);
                }
                let _ = writeln!(out, ",{d}");
            }
            emit(&common, &out)?;
            if let Some(script) = gnuplot {
                let csv = common.out.as_ref().unwrap();
                let text = format!(
                    "set datafile separator ','\n\
                     set key autotitle columnhead\n\
                     set xlabel 't'\n\
                     plot '{0}' using 1:2 with lines, \\\n\
                          '{0}' using 1:{1} with lines, \\\n\
                          '{0}' using 1:{2} with lines\n",
                    csv.display(),
                    n + 2,
                    2 * n + 2,
                );
                std::fs::write(&script, text)
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", script.display())))?;
            }
            Ok(())
        }
    }
}
