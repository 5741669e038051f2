//! Autocovariances from kernels and from paths, batch-means standard errors
//! and the power-law fit used to detect long memory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernel::{fmt_f64, SampledKernel};
use crate::numerics::convolve;
use crate::simulation::PathSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcfKind {
    Theoretical,
    Empirical,
}

/// Autocovariance values at non-negative lags.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfCurve {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: AcfKind,
    /// `E[L₁²]` of the driver the curve refers to.
    pub second_moment: f64,
}

impl AcfCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag,value\n");
        for (l, v) in self.lags.iter().zip(&self.values) {
            let _ = writeln!(s, "{},{}", fmt_f64(*l), fmt_f64(*v));
        }
        s
    }
}

/// Trapezoid correction at the points where `u ↦ ψ(u) ψ(u + k dt)` jumps.
fn jump_correction(psi: &SampledKernel, jumps: &BTreeMap<i64, f64>, k: i64) -> f64 {
    let mut points: Vec<i64> = jumps.keys().flat_map(|&g| [g, g - k]).collect();
    points.sort_unstable();
    points.dedup();
    let mut corr = 0.0;
    for u in points {
        let j1 = jumps.get(&u).copied().unwrap_or(0.0);
        let j2 = jumps.get(&(u + k)).copied().unwrap_or(0.0);
        let (a, b) = (psi.at_index(u), psi.at_index(u + k));
        corr += a * j2 + b * j1 - j1 * j2;
    }
    -0.5 * psi.dt * corr
}

fn jump_map(psi: &SampledKernel) -> BTreeMap<i64, f64> {
    psi.jumps.iter().map(|j| (j.index, j.size)).collect()
}

/// `r_k = ∫ ψ(u) ψ(u + k dt) du` for a single lag by direct summation.
pub fn kernel_correlation_at(psi: &SampledKernel, k: usize) -> f64 {
    let v = &psi.values;
    if k >= v.len() {
        return 0.0;
    }
    let direct = psi.dt * v.iter().zip(&v[k..]).map(|(a, b)| a * b).sum::<f64>();
    direct + jump_correction(psi, &jump_map(psi), k as i64)
}

/// `r_k` for every `k ≥ 0` at once by FFT. Values far below `r_0` carry
/// absolute rounding noise of order `1e-16 · r_0`; use
/// [`kernel_correlation_at`] when tiny correlations matter.
pub fn kernel_autocorrelation(psi: &SampledKernel) -> Vec<f64> {
    let n = psi.len();
    if n == 0 {
        return Vec::new();
    }
    let rev: Vec<f64> = psi.values.iter().rev().copied().collect();
    let full = convolve(&rev, &psi.values);
    // full[n - 1 + k] = Σ_i ψ_i ψ_{i+k}
    let mut r: Vec<f64> = full[n - 1..].iter().map(|v| v * psi.dt).collect();
    if !psi.jumps.is_empty() {
        let jumps = jump_map(psi);
        for (k, rk) in r.iter_mut().enumerate() {
            *rk += jump_correction(psi, &jumps, k as i64);
        }
    }
    r
}

/// `γ(t) = E[L₁²] ∫ ψ(u) ψ(u + t) du`, each lag summed directly. Off-grid
/// lags are interpolated linearly; lags beyond the kernel window give 0.
pub fn theoretical_acf(psi: &SampledKernel, second_moment: f64, lags: &[f64]) -> AcfCurve {
    let r = |k: usize| kernel_correlation_at(psi, k);
    let values = lags
        .iter()
        .map(|&l| {
            let x = l.abs() / psi.dt;
            let k = x.round();
            let c = if (x - k).abs() < 1e-9 {
                r(k as usize)
            } else {
                let i = x.floor() as usize;
                let w = x - i as f64;
                r(i) * (1.0 - w) + r(i + 1) * w
            };
            second_moment * c
        })
        .collect();
    AcfCurve {
        lags: lags.to_vec(),
        values,
        kind: AcfKind::Theoretical,
        second_moment,
    }
}

fn grid_lag(path: &PathSample, lag: f64) -> Result<usize> {
    let x = lag.abs() / path.dt;
    let k = x.round();
    let length = path.len() as f64 * path.dt;
    if k as usize >= path.len() {
        return Err(Error::LagTooLarge { lag, length });
    }
    if (x - k).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "lag {lag} is not a multiple of the path step {}",
            path.dt
        )));
    }
    Ok(k as usize)
}

fn demeaned(path: &PathSample) -> Vec<f64> {
    let n = path.len().max(1) as f64;
    let mean = path.values.iter().sum::<f64>() / n;
    path.values.iter().map(|v| v - mean).collect()
}

/// Biased sample autocovariance `(1/n) Σ (x_i - x̄)(x_{i+k} - x̄)` at grid lags.
pub fn empirical_acf(path: &PathSample, lags: &[f64], second_moment: f64) -> Result<AcfCurve> {
    let ks = lags.iter().map(|&l| grid_lag(path, l)).collect::<Result<Vec<_>>>()?;
    let x = demeaned(path);
    let n = x.len() as f64;
    let values = ks
        .iter()
        .map(|&k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect();
    Ok(AcfCurve {
        lags: lags.to_vec(),
        values,
        kind: AcfKind::Empirical,
        second_moment,
    })
}

/// `(x_i - x̄)(x_{i+k} - x̄)` for the lag `k` nearest to `lag`, whose mean is
/// the empirical autocovariance (up to the `n` vs `n - k` normalization).
pub fn lag_products(path: &PathSample, lag: f64) -> Result<Vec<f64>> {
    let k = grid_lag(path, lag)?;
    let x = demeaned(path);
    Ok(x.iter().zip(&x[k..]).map(|(a, b)| a * b).collect())
}

/// Mean of a series with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    pub standard_error: f64,
    pub batches: usize,
}

/// Splits `series` into `batches` equal consecutive batches (dropping the
/// remainder) and uses the spread of batch means as the standard error.
pub fn batch_means(series: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 || series.len() < batches {
        return Err(Error::InvalidInput(format!(
            "batch means need at least 2 batches and one value per batch ({} values, {batches} batches)",
            series.len()
        )));
    }
    let size = series.len() / batches;
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = batches as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (b - 1.0);
    Ok(BatchMeans {
        mean,
        standard_error: (var / b).sqrt(),
        batches,
    })
}

/// `count` lags spaced evenly in `log t` from `t_min` to `t_max`.
pub fn log_spaced_lags(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && count >= 2) {
        return Err(Error::InvalidInput(
            "log-spaced lags need 0 < t_min < t_max and at least two points".into(),
        ));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Least-squares line through `(ln t, ln γ(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongMemoryFit {
    pub slope: f64,
    /// `exp(intercept)`, the `C` in `γ(t) ≈ C t^{slope}`.
    pub constant: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Root mean square of the log-residuals.
    pub residual: f64,
    pub points: usize,
}

impl LongMemoryFit {
    /// Non-integrable power decay, `slope > -1`.
    pub fn is_long_memory(&self) -> bool {
        self.slope > -1.0
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "slope = {}", fmt_f64(self.slope));
        let _ = writeln!(s, "constant = {}", fmt_f64(self.constant));
        let _ = writeln!(s, "window_min = {}", fmt_f64(self.t_min));
        let _ = writeln!(s, "window_max = {}", fmt_f64(self.t_max));
        let _ = writeln!(s, "residual = {}", fmt_f64(self.residual));
        let _ = writeln!(s, "points = {}", self.points);
        let _ = writeln!(s, "long_memory = {}", self.is_long_memory());
        s
    }
}

/// Fits `ln γ = ln C + slope · ln t` over the curve points with
/// `t_min ≤ t ≤ t_max`.
pub fn long_memory_fit(acf: &AcfCurve, t_min: f64, t_max: f64) -> Result<LongMemoryFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in acf.lags.iter().zip(&acf.values) {
        if t < t_min - 1e-12 || t > t_max + 1e-12 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NotAsymptotic { lag: t, value: v });
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "fit window [{t_min}, {t_max}] contains fewer than two lags"
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "fit window needs at least two distinct lags".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LongMemoryFit {
        slope,
        constant: intercept.exp(),
        t_min,
        t_max,
        residual,
        points: xs.len(),
    })
}
