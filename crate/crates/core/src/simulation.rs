//! Lévy increments, moving-average paths, an Euler scheme for the delay
//! equation and fractional noise.
//!
//! Randomness comes from ChaCha20 seeded with `seed` and switched to stream
//! `replicate`, so replicate `r` of seed `s` is the same sequence no matter
//! how replicates are scheduled.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernel::{fmt_f64, SampledKernel};
use crate::measure::SignedMeasure;
use crate::numerics::convolve;

/// Centered jump-size distribution of the compound Poisson part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpLaw {
    Normal {
        variance: f64,
    },
    /// `±size` with probability 1/2 each.
    TwoPoint {
        size: f64,
    },
}

impl JumpLaw {
    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Normal { variance } => variance,
            JumpLaw::TwoPoint { size } => size * size,
        }
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        match *self {
            JumpLaw::Normal { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                variance.sqrt() * z
            }
            JumpLaw::TwoPoint { size } => {
                if rng.random::<bool>() {
                    size
                } else {
                    -size
                }
            }
        }
    }

    /// `E[min((x f)², |x f|)]` for `x` drawn from the law.
    fn truncated_moment(&self, f: f64) -> f64 {
        match *self {
            JumpLaw::Normal { variance } => {
                let s = f.abs() * variance.sqrt();
                if s == 0.0 {
                    return 0.0;
                }
                let a = 1.0 / s;
                let n = Normal::standard();
                let pdf = (-0.5 * a * a).exp() / (2.0 * PI).sqrt();
                s * s * ((2.0 * n.cdf(a) - 1.0) - 2.0 * a * pdf) + 2.0 * s * pdf
            }
            JumpLaw::TwoPoint { size } => {
                let y = (size * f).abs();
                (y * y).min(y)
            }
        }
    }
}

/// Compound Poisson component: `rate` jumps per unit time drawn from `law`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpPart {
    pub rate: f64,
    pub law: JumpLaw,
}

/// A centered Lévy process: Brownian part with variance `gaussian_var` per
/// unit time plus an optional finite-activity jump part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyDriver {
    pub gaussian_var: f64,
    pub jumps: Option<JumpPart>,
}

impl LevyDriver {
    pub fn brownian(variance: f64) -> Self {
        Self {
            gaussian_var: variance,
            jumps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_var >= 0.0 && self.gaussian_var.is_finite()) {
            return Err(Error::InvalidInput("gaussian variance must be finite and >= 0".into()));
        }
        if let Some(j) = self.jumps {
            if !(j.rate > 0.0 && j.rate.is_finite()) {
                return Err(Error::InvalidInput("jump rate must be positive".into()));
            }
            let m = j.law.second_moment();
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidInput("jump law must have finite variance".into()));
            }
        }
        Ok(())
    }

    /// `E[L₁²] = σ² + rate · E[J²]`.
    pub fn second_moment(&self) -> f64 {
        self.gaussian_var + self.jumps.map_or(0.0, |j| j.rate * j.law.second_moment())
    }

    /// One-line description used in provenance headers.
    pub fn describe(&self) -> String {
        let mut s = format!("gaussian_var={}", fmt_f64(self.gaussian_var));
        match self.jumps {
            None => s.push_str(" jumps=none"),
            Some(j) => {
                let law = match j.law {
                    JumpLaw::Normal { variance } => format!("normal(variance={})", fmt_f64(variance)),
                    JumpLaw::TwoPoint { size } => format!("two_point(size={})", fmt_f64(size)),
                };
                let _ = write!(s, " jump_rate={} jump_law={law}", fmt_f64(j.rate));
            }
        }
        s
    }
}

/// A sampled path: `values[k]` belongs to time `t_start + k·dt`. For
/// increment paths, `values[k]` is the increment over `[t_k, t_k + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub dt: f64,
    pub t_start: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub driver: String,
    /// Time discarded before `t_start` while the kernel support filled up.
    pub burn_in: f64,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    /// Sums consecutive blocks of `k` increments: the same noise on a grid
    /// `k` times coarser.
    pub fn aggregate(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("aggregation factor must be positive".into()));
        }
        Ok(Self {
            dt: self.dt * k as f64,
            values: self.values.chunks_exact(k).map(|c| c.iter().sum()).collect(),
            driver: self.driver.clone(),
            ..*self
        })
    }

    /// Samples with index in `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        let to = to.min(self.len());
        let from = from.min(to);
        Self {
            t_start: self.time(from),
            values: self.values[from..to].to_vec(),
            driver: self.driver.clone(),
            ..*self
        }
    }

    /// Index of the sample at time `t`, if it lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_start) / self.dt;
        let k = x.round();
        ((x - k).abs() < 1e-6 && k >= 0.0 && (k as usize) < self.len()).then_some(k as usize)
    }

    /// CSV `t,value` with a commented provenance header.
    pub fn to_csv(&self, config_hash: Option<&str>) -> String {
        let mut s = String::with_capacity(self.values.len() * 48 + 256);
        let _ = writeln!(s, "# seed = {}", self.seed);
        if let Some(h) = config_hash {
            let _ = writeln!(s, "# config_hash = {h}");
        }
        let _ = writeln!(s, "# driver = {}", self.driver);
        let _ = writeln!(s, "# dt = {}", fmt_f64(self.dt));
        let _ = writeln!(s, "# burn_in = {}", fmt_f64(self.burn_in));
        s.push_str("t,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", fmt_f64(self.time(k)), fmt_f64(*v));
        }
        s
    }
}

/// Generator for replicate `stream` of `seed`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(0), …, f(n-1)` in parallel; results come back in index order.
pub fn run_replicates<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

/// `n` i.i.d. increments of `driver` over steps of length `dt`, stream 0.
pub fn simulate_increments(driver: &LevyDriver, dt: f64, n: usize, t_start: f64, seed: u64) -> Result<PathSample> {
    simulate_increments_stream(driver, dt, n, t_start, seed, 0)
}

/// As [`simulate_increments`] on an explicit RNG stream.
pub fn simulate_increments_stream(
    driver: &LevyDriver,
    dt: f64,
    n: usize,
    t_start: f64,
    seed: u64,
    stream: u64,
) -> Result<PathSample> {
    driver.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput("time step must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("need at least one increment".into()));
    }
    let mut rng = replicate_rng(seed, stream);
    let sd = (driver.gaussian_var * dt).sqrt();
    let poisson = match driver.jumps {
        Some(j) => Some((
            Poisson::new(j.rate * dt).map_err(|e| Error::InvalidInput(e.to_string()))?,
            j.law,
        )),
        None => None,
    };
    let values = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let mut v = sd * z;
            if let Some((p, law)) = &poisson {
                let count = p.sample(&mut rng) as u64;
                for _ in 0..count {
                    v += law.sample(&mut rng);
                }
            }
            v
        })
        .collect();
    Ok(PathSample {
        dt,
        t_start,
        values,
        seed,
        driver: driver.describe(),
        burn_in: 0.0,
    })
}

/// Outcome of [`integrability_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrability {
    pub value: f64,
    pub pass: bool,
}

/// `∫ (f(u)² σ² + ∫ min((x f(u))², |x f(u)|) ν(dx)) du` by the trapezoid rule
/// with one-sided limits at recorded jumps of `f`.
pub fn integrability_check(f: &SampledKernel, driver: &LevyDriver) -> Result<Integrability> {
    driver.validate()?;
    let g = |v: f64| driver.gaussian_var * v * v + driver.jumps.map_or(0.0, |j| j.rate * j.law.truncated_moment(v));
    let jumps: Vec<_> = f
        .jumps
        .iter()
        .map(|j| {
            let right = f.at_index(j.index);
            crate::kernel::Jump {
                index: j.index,
                size: g(right) - g(right - j.size),
            }
        })
        .collect();
    let k = SampledKernel::new(f.dt, f.start, f.values.iter().map(|v| g(*v)).collect())?.with_jumps(jumps);
    let value = crate::conv::cumulative_integral(&k).last().copied().unwrap_or(0.0);
    Ok(Integrability {
        value,
        pass: value.is_finite(),
    })
}

/// Moving-average audit and trimming parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaConfig {
    /// Admissible fraction of `∫ψ²` in the outer eighths of the kernel window.
    pub tail_tol: f64,
}

impl Default for MaConfig {
    fn default() -> Self {
        Self { tail_tol: 1e-6 }
    }
}

/// Shortest prefix of `psi` (from its first sample) whose complement carries
/// at most `tol` of the squared L² mass.
pub fn trim_kernel(psi: &SampledKernel, tol: f64) -> SampledKernel {
    let total: f64 = psi.values.iter().map(|v| v * v).sum();
    let mut tail = 0.0;
    let mut cut = psi.len();
    for i in (0..psi.len()).rev() {
        tail += psi.values[i] * psi.values[i];
        if tail > tol * total {
            break;
        }
        cut = i;
    }
    psi.restrict_indices(psi.start, psi.start + cut.max(1) as i64)
}

/// Left-point weights `w_m = ψ(m dt -)`: the value of `u ↦ ψ(t - u)` on the
/// step `[t - m dt, t - (m-1) dt)`.
fn left_point_weights(psi: &SampledKernel) -> Vec<f64> {
    let mut w = psi.values.clone();
    for j in &psi.jumps {
        let i = j.index - psi.start;
        if i >= 0 && (i as usize) < w.len() {
            w[i as usize] -= j.size;
        }
    }
    w
}

/// Share of `Σψ²` in the last eighth of the window, and in the first eighth
/// as well when the kernel reaches into negative time.
fn tail_fraction(psi: &SampledKernel) -> f64 {
    let v = &psi.values;
    let total: f64 = v.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return 0.0;
    }
    let eighth = v.len() / 8;
    let sq = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>() / total;
    let right = sq(&v[v.len() - eighth..]);
    if psi.start < 0 {
        right.max(sq(&v[..eighth]))
    } else {
        right
    }
}

/// `X_{t_k} = Σ_m ψ(m dt -) ΔL_{k-m}` for every `k` whose sum is fully
/// covered by the increments. The first covered time is `t_start` of the
/// result; the skipped stretch is reported as `burn_in`.
pub fn moving_average_path(psi: &SampledKernel, increments: &PathSample, cfg: &MaConfig) -> Result<PathSample> {
    if ((psi.dt - increments.dt) / psi.dt).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "kernel step {} differs from increment step {}",
            psi.dt, increments.dt
        )));
    }
    let fraction = tail_fraction(psi);
    if fraction > cfg.tail_tol {
        return Err(Error::KernelHorizonTooShort {
            fraction,
            tolerance: cfg.tail_tol,
        });
    }
    let w = left_point_weights(psi);
    let (n, l) = (increments.len(), w.len());
    if l > n {
        return Err(Error::InsufficientHistory {
            needed: l,
            available: n,
        });
    }
    let full = convolve(&w, &increments.values);
    let values = full[l - 1..n].to_vec();
    // X at t_k uses increments up to index k - start, i.e. k ≥ end - 1
    let first = psi.end_index() - 1;
    Ok(PathSample {
        dt: increments.dt,
        t_start: increments.t_start + first as f64 * increments.dt,
        values,
        seed: increments.seed,
        driver: increments.driver.clone(),
        burn_in: increments.burn_in + (l - 1) as f64 * increments.dt,
    })
}

/// Euler scheme history handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig {
    /// The delay integral ignores the part of `|η|` beyond the time where
    /// its remaining mass drops below this value.
    pub history_tol: f64,
    /// Block length of the history convolution.
    pub block: usize,
}

impl Default for EulerConfig {
    fn default() -> Self {
        Self {
            history_tol: 1e-12,
            block: 512,
        }
    }
}

/// Explicit Euler scheme `X_{k+1} = X_k + dt ∫ X_{t_k - v} η(dv) + ΔZ_k`.
///
/// `init` holds the path up to time `t_0` (its last sample); `noise[k]` is
/// the increment of `Z` over `[t_0 + k dt, t_0 + (k+1) dt)`. The result holds
/// `X_{t_0}, …, X_{t_0 + n dt}`. The delay integral uses hat-function
/// weights of `η` on the grid; long histories are summed blockwise by FFT.
pub fn euler_sdde_path(
    eta: &SignedMeasure,
    noise: &PathSample,
    init: &PathSample,
    cfg: &EulerConfig,
) -> Result<PathSample> {
    let dt = noise.dt;
    if ((init.dt - dt) / dt).abs() > 1e-12 {
        return Err(Error::InvalidInput("init segment and noise use different steps".into()));
    }
    let horizon = eta.support_end_within(cfg.history_tol);
    let m = (horizon / dt).ceil() as usize + 1;
    if init.len() < m {
        return Err(Error::InsufficientHistory {
            needed: m,
            available: init.len(),
        });
    }
    let w = eta.node_weights(dt, m).node;
    let h0 = init.len() - m;
    let mut x: Vec<f64> = init.values[h0..].to_vec();
    let base = m - 1; // index of X_{t_0} in `x`
    let n = noise.len();
    x.reserve(n);
    let block = cfg.block.max(1);
    let mut k = 0;
    while k < n {
        let end = (k + block).min(n);
        // far part: history strictly before the block start
        let s = base + k;
        let lo = (s + 1).saturating_sub(m);
        let far = if m > block { convolve(&x[lo..s], &w) } else { Vec::new() };
        for step in k..end {
            let i = base + step;
            let drift: f64 = if m > block {
                // far: j < s; near: s ≤ j ≤ i
                let f = if i - lo < far.len() { far[i - lo] } else { 0.0 };
                let near: f64 = (s..=i).map(|j| w.get(i - j).copied().unwrap_or(0.0) * x[j]).sum();
                f + near
            } else {
                (0..m.min(i + 1)).map(|a| w[a] * x[i - a]).sum()
            };
            let next = x[i] + dt * drift + noise.values[step];
            x.push(next);
        }
        k = end;
    }
    Ok(PathSample {
        dt,
        t_start: noise.t_start,
        values: x[base..].to_vec(),
        seed: noise.seed,
        driver: noise.driver.clone(),
        burn_in: 0.0,
    })
}

/// Horizon and audit threshold for fractional noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalConfig {
    /// Length of the increment-kernel window, in time units.
    pub horizon: f64,
    /// Admissible share of a unit increment's variance lost by truncation.
    pub tail_tol: f64,
}

impl Default for FractionalConfig {
    fn default() -> Self {
        Self {
            horizon: 256.0,
            tail_tol: 0.02,
        }
    }
}

/// Relative variance of a unit increment `Z_t - Z_{t-1}` carried by the
/// kernel beyond `horizon`, from `θ(s) - θ(s-1) ≈ θ'(s)`.
pub fn fractional_tail_share(d: f64, horizon: f64) -> Result<f64> {
    let var = crate::closed_forms::fractional_increment_variance(d)?;
    let c = d / gamma(1.0 + d);
    Ok(c * c * horizon.powf(2.0 * d - 1.0) / ((1.0 - 2.0 * d) * var))
}

/// Increments `Z_{t_k + dt} - Z_{t_k}` of `Z_t = ∫ θ(t-u) dL_u` with
/// `θ(t) = t₊^d/Γ(1+d)`, through the square-integrable difference kernel
/// `θ(s) - θ(s - dt)` truncated at `cfg.horizon`.
pub fn fractional_noise_increments(
    d: f64,
    driver: &LevyDriver,
    dt: f64,
    n: usize,
    seed: u64,
    cfg: &FractionalConfig,
) -> Result<PathSample> {
    fractional_noise_increments_stream(d, driver, dt, n, seed, 0, cfg)
}

/// As [`fractional_noise_increments`] on an explicit RNG stream.
pub fn fractional_noise_increments_stream(
    d: f64,
    driver: &LevyDriver,
    dt: f64,
    n: usize,
    seed: u64,
    stream: u64,
    cfg: &FractionalConfig,
) -> Result<PathSample> {
    let share = fractional_tail_share(d, cfg.horizon)?;
    if share > cfg.tail_tol {
        return Err(Error::KernelHorizonTooShort {
            fraction: share,
            tolerance: cfg.tail_tol,
        });
    }
    let len = (cfg.horizon / dt).round() as usize + 1;
    let theta = crate::closed_forms::fractional_theta(d, dt, len + 1)?;
    let diff: Vec<f64> = (0..len)
        .map(|m| theta.values[m] - if m > 0 { theta.values[m - 1] } else { 0.0 })
        .collect();
    let kernel = SampledKernel::new(dt, 0, diff)?;
    let inc = simulate_increments_stream(driver, dt, n + len - 1, 0.0, seed, stream)?;
    // the difference kernel is continuous, so left-point weights are its samples
    let audit = MaConfig { tail_tol: 1.0 };
    moving_average_path(&kernel, &inc, &audit)
}
