//! Batch front end behind the `ctar` binary.
//!
//! Every command reads a [`RunConfig`], writes its artifacts plus the
//! effective config (`config.toml`) into the output directory, and prints a
//! short summary. Failures end the process with exit code 1 and a single
//! diagnostic line on stderr.

pub mod config;
mod verify;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{Command, PathKind, RunConfig};
pub use verify::{verify_suite, Check};

use crate::closed_forms::arma_level_inputs;
use crate::error::{Error, Result};
use crate::kernel::{fmt_f64, SampledKernel};
use crate::measure::SignedMeasure;
use crate::simulation::{
    euler_sdde_path, fractional_noise_increments_stream, moving_average_path, run_replicates,
    simulate_increments_stream, trim_kernel, EulerConfig, FractionalConfig, MaConfig, PathSample,
};
use crate::solver::{
    domination_mass, find_strip, fractional_integral, increment_level_inputs, level_kernel_series,
    level_kernel_transform, level_residual, mass_identity, resolvent_residual, scan_level_denominator, solve_x0_with,
    InversionConfig, InversionGrid, ScanConfig, StripReport,
};
use crate::stats::{empirical_acf, log_spaced_lags, long_memory_fit, theoretical_acf};

#[derive(Debug, Parser)]
#[command(
    name = "ctar",
    version,
    about = "Kernels, paths and autocovariances of continuous-time autoregressions"
)]
pub struct Cli {
    /// Command to run; overrides `command` in the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default `ctar-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config key, e.g. `--set numerics.dt=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!(
                "ctar: {}",
                text.lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: ")
            );
            return 1;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ctar: {e}");
            1
        }
    }
}

/// Resolves the effective config from the parsed flags.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(c) = cli.command {
        cfg.command = Some(c);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if cfg.command.is_none() {
        return Err(Error::Config(
            "no command given on the command line or in the config".into(),
        ));
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = effective_config(cli)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("ctar-out"));
    let outcome = run(&cfg)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    write_file(&out, "config.toml", &cfg.to_toml())?;
    for (name, body) in &outcome.artifacts {
        write_file(&out, name, body)?;
    }
    print!("{}", outcome.summary);
    if outcome.failed > 0 {
        eprintln!("ctar: verify: {} check(s) failed", outcome.failed);
        return Ok(1);
    }
    Ok(0)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

/// Artifacts of one command, named relative to the output directory.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, String)>,
    pub summary: String,
    /// Failed checks (only `verify` reports any).
    pub failed: usize,
}

impl Outcome {
    fn add(&mut self, name: impl Into<String>, body: String) {
        self.artifacts.push((name.into(), body));
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }
}

/// Runs the configured command without touching the file system (except
/// for reading measure and kernel files named in the config).
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Some(Command::SolveX0) => cmd_solve_x0(cfg),
        Some(Command::SolveLevel) => cmd_solve_level(cfg),
        Some(Command::Simulate) => cmd_simulate(cfg),
        Some(Command::Acf) => cmd_acf(cfg),
        Some(Command::Verify) => Ok(cmd_verify()),
        None => Err(Error::Config("no command given".into())),
    }
}

fn scan_config(cfg: &RunConfig) -> ScanConfig {
    let n = &cfg.numerics;
    ScanConfig {
        zero_tol: n.zero_tol,
        points: n.scan_points,
        a_cap: n.a_cap,
        b_cap: n.b_cap,
        ..ScanConfig::default()
    }
}

fn x0_for(cfg: &RunConfig, eta: &SignedMeasure) -> Result<(StripReport, SampledKernel)> {
    let n = &cfg.numerics;
    let strip = find_strip(eta, &scan_config(cfg))?;
    let inv = InversionConfig {
        alias_tol: n.alias_tol,
        causality_tol: n.causality_tol,
        max_tilt: n.max_tilt,
    };
    let x0 = solve_x0_with(eta, &strip, InversionGrid { n: n.n, dt: n.dt }, &inv)?;
    Ok((strip, x0))
}

fn cmd_solve_x0(cfg: &RunConfig) -> Result<Outcome> {
    let eta = cfg.delay_measure()?;
    let (strip, x0) = x0_for(cfg, &eta)?;
    let mut id = String::new();
    let resolvent = resolvent_residual(&x0, &eta);
    let _ = writeln!(id, "resolvent_residual = {}", fmt_f64(resolvent));
    let mass = eta
        .moment(1, true)
        .is_ok_and(f64::is_finite)
        .then(|| mass_identity(&x0, &eta));
    match mass {
        Some(m) => {
            let _ = writeln!(id, "mass_identity = {}", fmt_f64(m));
        }
        None => id.push_str("mass_identity = not applicable (no first moment)\n"),
    }
    let _ = writeln!(id, "domination_mass = {}", fmt_f64(domination_mass(&x0, &eta)));
    let _ = writeln!(
        id,
        "negative_time_l2_fraction = {}",
        fmt_f64(x0.negative_time_l2_fraction())
    );

    let mut o = Outcome::default();
    o.line(format!(
        "solve-x0: causal = {}, c = {}, |x0|_2 = {}",
        strip.causal,
        fmt_f64(strip.c),
        fmt_f64(x0.l2_norm())
    ));
    o.line(format!("resolvent residual {}", fmt_f64(resolvent)));
    if let Some(m) = mass {
        o.line(format!("mass identity {}", fmt_f64(m)));
    }
    o.add("x0.csv", x0.to_csv());
    o.add("strip.txt", strip.to_text());
    o.add("identities.txt", id);
    Ok(o)
}

/// `(θ, φ)` of the configured level model.
fn level_inputs(cfg: &RunConfig) -> Result<(SampledKernel, SignedMeasure)> {
    let nm = &cfg.numerics;
    if let Some(spec) = cfg.arma() {
        if cfg.model.phi.is_some() || cfg.model.theta.is_some() {
            return Err(Error::Config(
                "model.arma cannot be combined with model.phi or model.theta".into(),
            ));
        }
        let (phi, theta) = arma_level_inputs(&spec, nm.dt, (nm.horizon / nm.dt).round() as usize)?;
        return Ok((theta, phi));
    }
    if let Some(s) = cfg.model.increment_shift {
        if cfg.model.phi.is_some() {
            return Err(Error::Config(
                "model.increment_shift derives phi from the delay measure; drop model.phi".into(),
            ));
        }
        return increment_level_inputs(&cfg.theta()?, &cfg.delay_measure()?, s);
    }
    let phi = cfg
        .model
        .phi
        .as_ref()
        .ok_or_else(|| Error::Config("level model needs model.phi, model.arma or model.increment_shift".into()))?
        .build()?;
    Ok((cfg.theta()?, phi))
}

struct LevelSolution {
    series: Option<SampledKernel>,
    transform: std::result::Result<SampledKernel, Error>,
    theta: SampledKernel,
    phi: SignedMeasure,
    series_note: String,
}

impl LevelSolution {
    /// Series kernel when available, else the transform kernel.
    fn preferred(&self) -> Result<SampledKernel> {
        match (&self.series, &self.transform) {
            (Some(s), _) => Ok(s.clone()),
            (None, Ok(t)) => Ok(t.clone()),
            (None, Err(e)) => Err(e.clone()),
        }
    }
}

fn solve_level(cfg: &RunConfig) -> Result<LevelSolution> {
    let (theta, phi) = level_inputs(cfg)?;
    let nm = &cfg.numerics;
    let (series, series_note) = match level_kernel_series(&theta, &phi, nm.series_tol) {
        Ok(k) => (Some(k), "ok".to_string()),
        Err(e @ Error::ContractionViolated { .. }) => (None, format!("not applicable ({e})")),
        Err(e) => return Err(e),
    };
    let transform = level_kernel_transform(&theta, &phi, nm.level_c);
    if let (None, Err(e)) = (&series, &transform) {
        return Err(e.clone());
    }
    Ok(LevelSolution {
        series,
        transform,
        theta,
        phi,
        series_note,
    })
}

fn cmd_solve_level(cfg: &RunConfig) -> Result<Outcome> {
    let sol = solve_level(cfg)?;
    let mut o = Outcome::default();
    let mut rep = String::new();
    let _ = writeln!(rep, "series_route = {}", sol.series_note);
    if let Some(s) = &sol.series {
        let r = level_residual(s, &sol.theta, &sol.phi)?;
        let _ = writeln!(rep, "series_residual = {}", fmt_f64(r));
        o.line(format!("series route: residual {}", fmt_f64(r)));
        o.add("psi_series.csv", s.to_csv());
    }
    let d = scan_level_denominator(&sol.theta, &sol.phi, cfg.numerics.level_c);
    let _ = writeln!(rep, "denominator_min = {}", fmt_f64(d.min_abs));
    let _ = writeln!(rep, "denominator_argmin_re = {}", fmt_f64(d.at_re));
    let _ = writeln!(rep, "denominator_argmin_im = {}", fmt_f64(d.at_im));
    match &sol.transform {
        Ok(t) => {
            let r = level_residual(t, &sol.theta, &sol.phi)?;
            let _ = writeln!(rep, "transform_route = ok");
            let _ = writeln!(rep, "transform_residual = {}", fmt_f64(r));
            o.line(format!("transform route: residual {}", fmt_f64(r)));
            o.add("psi_transform.csv", t.to_csv());
            if let Some(s) = &sol.series {
                let gap = s.l2_distance(t)?;
                let _ = writeln!(rep, "l2_gap = {}", fmt_f64(gap));
                o.line(format!("L2 gap between routes {}", fmt_f64(gap)));
            }
        }
        Err(e) => {
            let _ = writeln!(rep, "transform_route = failed ({e})");
            o.line(format!("transform route failed: {e}"));
        }
    }
    o.add("level.txt", rep);
    Ok(o)
}

/// Kernel of the configured model: `ψ` for the level model, else `x0`.
fn model_kernel(cfg: &RunConfig) -> Result<SampledKernel> {
    if cfg.has_level_model() {
        solve_level(cfg)?.preferred()
    } else {
        let eta = cfg.delay_measure()?;
        Ok(x0_for(cfg, &eta)?.1)
    }
}

/// Increments of the driving noise: `L`, or the fractional process when
/// `model.fractional_d` is set.
fn noise(cfg: &RunConfig, n: usize, stream: u64) -> Result<PathSample> {
    let driver = cfg.driver.driver()?;
    let (nm, sim) = (&cfg.numerics, &cfg.simulate);
    let mut inc = match cfg.model.fractional_d {
        Some(d) => {
            let fc = FractionalConfig {
                horizon: nm.fractional_horizon,
                tail_tol: nm.fractional_tail_tol,
            };
            fractional_noise_increments_stream(d, &driver, nm.dt, n, cfg.seed, stream, &fc)?
        }
        None => simulate_increments_stream(&driver, nm.dt, n, sim.t_start, cfg.seed, stream)?,
    };
    inc.t_start = sim.t_start;
    Ok(inc)
}

/// Moving-average and/or Euler paths of one replicate over the same window.
fn simulate_paths(
    cfg: &RunConfig,
    psi: &SampledKernel,
    eta: Option<&SignedMeasure>,
    stream: u64,
) -> Result<Vec<(&'static str, PathSample)>> {
    let n = cfg.simulate.n;
    let kind = cfg.simulate.kind;
    let inc = noise(cfg, n + psi.len() - 1, stream)?;
    let mut paths = Vec::new();
    if matches!(kind, PathKind::Ma | PathKind::Both) {
        let ma = moving_average_path(
            psi,
            &inc,
            &MaConfig {
                tail_tol: cfg.numerics.ma_tail_tol,
            },
        )?;
        paths.push(("path", ma));
    }
    if matches!(kind, PathKind::Euler | PathKind::Both) {
        let eta =
            eta.ok_or_else(|| Error::Config("the Euler scheme needs a delay measure, not a level model".into()))?;
        let ec = EulerConfig {
            history_tol: cfg.numerics.history_tol,
            ..EulerConfig::default()
        };
        let hist = (eta.support_end_within(ec.history_tol) / inc.dt).ceil() as usize + 1;
        let init = PathSample {
            t_start: inc.t_start - (hist - 1) as f64 * inc.dt,
            values: vec![0.0; hist],
            ..inc.clone()
        };
        let eu = euler_sdde_path(eta, &inc, &init, &ec)?;
        // same window as the moving average: skip the kernel support
        let k0 = (psi.end_index() - 1).max(0) as usize;
        let mut window = eu.slice(k0, k0 + n);
        window.burn_in = inc.burn_in + k0 as f64 * inc.dt;
        paths.push(("euler", window));
    }
    Ok(paths)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let reps = cfg.simulate.replicates;
    if reps == 0 || cfg.simulate.n == 0 {
        return Err(Error::Config(
            "simulate.n and simulate.replicates must be positive".into(),
        ));
    }
    let eta = if cfg.has_level_model() {
        None
    } else {
        Some(cfg.delay_measure()?)
    };
    let psi = trim_kernel(&model_kernel(cfg)?, cfg.numerics.trim_tol);
    let hash = cfg.hash();
    let runs = run_replicates(reps, |r| simulate_paths(cfg, &psi, eta.as_ref(), r as u64));
    let mut o = Outcome::default();
    for (r, run) in runs.into_iter().enumerate() {
        for (stem, path) in run? {
            let name = if reps == 1 {
                format!("{stem}.csv")
            } else {
                format!("{stem}_{r:04}.csv")
            };
            o.line(format!(
                "{name}: {} samples from t = {}, burn-in {}",
                path.len(),
                fmt_f64(path.t_start),
                fmt_f64(path.burn_in)
            ));
            o.add(name, path.to_csv(Some(&hash)));
        }
    }
    Ok(o)
}

fn cmd_acf(cfg: &RunConfig) -> Result<Outcome> {
    let a = &cfg.acf;
    let lags = if a.lags.is_empty() {
        log_spaced_lags(a.t_min, a.t_max, a.count)?
    } else {
        a.lags.clone()
    };
    let m2 = cfg.driver.driver()?.second_moment();
    let base = model_kernel(cfg)?;
    let psi = match cfg.model.fractional_d {
        Some(d) => fractional_integral(&base, d)?,
        None => base.clone(),
    };
    let curve = theoretical_acf(&psi, m2, &lags);
    let mut o = Outcome::default();
    o.line(format!(
        "theoretical ACF at {} lags, E[L1^2] = {}",
        lags.len(),
        fmt_f64(m2)
    ));
    o.add("acf.csv", curve.to_csv());
    if a.fit {
        let fit = long_memory_fit(&curve, a.fit_min, a.fit_max)?;
        o.line(format!(
            "fit on [{}, {}]: slope {}, constant {}",
            a.fit_min,
            a.fit_max,
            fmt_f64(fit.slope),
            fmt_f64(fit.constant)
        ));
        o.add("fit.txt", fit.to_text());
    }
    if a.empirical {
        let eta = if cfg.has_level_model() {
            None
        } else {
            Some(cfg.delay_measure()?)
        };
        let trimmed = trim_kernel(&base, cfg.numerics.trim_tol);
        let sim = RunConfig {
            simulate: config::SimulateSection {
                kind: PathKind::Ma,
                ..cfg.simulate.clone()
            },
            ..cfg.clone()
        };
        let (_, path) = simulate_paths(&sim, &trimmed, eta.as_ref(), 0)?.remove(0);
        let emp = empirical_acf(&path, &lags, m2)?;
        o.line(format!("empirical ACF from {} samples", path.len()));
        o.add("acf_empirical.csv", emp.to_csv());
    }
    Ok(o)
}

fn cmd_verify() -> Outcome {
    let checks = verify_suite();
    let mut o = Outcome::default();
    let mut report = String::new();
    for c in &checks {
        let line = c.to_string();
        o.line(&line);
        report.push_str(&line);
        report.push('\n');
    }
    o.failed = checks.iter().filter(|c| !c.pass).count();
    o.line(format!("{} of {} checks passed", checks.len() - o.failed, checks.len()));
    o.add("verify.txt", report);
    o
}
