//! The autoregressive kernel `x0` with `L[x0] = 1/h`, obtained by inverting
//! the Fourier transform on a vertical line `Re z = c` inside a zero-free strip,
//! and the identities it must satisfy.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::conv;
use crate::error::{Error, Result};
use crate::kernel::{Jump, SampledKernel};
use crate::measure::{h_eval, SignedMeasure};
use crate::numerics::fft_forward;
use crate::solver::strip::StripReport;

/// Uniform time grid with `n` samples (a power of two) of step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionGrid {
    pub n: usize,
    pub dt: f64,
}

impl Default for InversionGrid {
    fn default() -> Self {
        Self {
            n: 1 << 16,
            dt: 1.0 / 1024.0,
        }
    }
}

impl InversionGrid {
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.dt
    }

    fn validate(&self) -> Result<()> {
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "grid size must be a power of two >= 16, got {}",
                self.n
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput("grid step must be positive".into()));
        }
        Ok(())
    }
}

/// Tolerances of the inversion audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    /// Bound on the estimated sup-norm error from truncating the spectrum.
    pub alias_tol: f64,
    /// Admissible fraction of squared L² mass at negative times for causal kernels.
    pub causality_tol: f64,
    /// Limits `|c| · T` so that `e^{-ct}` stays representable on long horizons.
    pub max_tilt: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            alias_tol: 1e-3,
            causality_tol: 1e-4,
            max_tilt: 12.0,
        }
    }
}

/// `x0` on the grid, with default audit tolerances.
pub fn solve_x0(eta: &SignedMeasure, strip: &StripReport, grid: InversionGrid) -> Result<SampledKernel> {
    solve_x0_with(eta, strip, grid, &InversionConfig::default())
}

/// Inverts `1/h(c + iy)`.
///
/// The part of `1/h` responsible for the unit jump of `x0` at 0 is removed
/// first: `r(t) = (w1 e^{-t} + w2 e^{-2t}) 𝟙_{t ≥ 0}` with
/// `w1 + w2 = 1` and `w1 + 2 w2 = -η({0})` matches `1/h` up to `O(z^{-3})`.
/// Only the smooth remainder is inverted numerically and `r` is added back
/// in closed form, which removes the Gibbs error at the jump.
pub fn solve_x0_with(
    eta: &SignedMeasure,
    strip: &StripReport,
    grid: InversionGrid,
    cfg: &InversionConfig,
) -> Result<SampledKernel> {
    grid.validate()?;
    let n = grid.n;
    let dt = grid.dt;
    let t_len = grid.horizon();
    let c = strip.c.max(-cfg.max_tilt / t_len);
    let start: i64 = if strip.causal {
        -((n / 8) as i64)
    } else {
        -((5 * n / 8) as i64)
    };
    let m0 = eta.atom_weight_at(0.0);
    let (w1, w2) = (2.0 + m0, -1.0 - m0);
    let reference = |z: Complex64| w1 / (1.0 - z) + w2 / (2.0 - z);
    let remainder = |y: f64| -> Result<Complex64> {
        let z = Complex64::new(c, y);
        Ok(1.0 / h_eval(eta, z)? - reference(z))
    };

    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for (k, slot) in spec.iter_mut().enumerate().take(half) {
        let y = 2.0 * PI * k as f64 / t_len;
        let phase = -2.0 * PI * ((k as i64 * start).rem_euclid(n as i64)) as f64 / n as f64;
        *slot = remainder(y)? * Complex64::from_polar(1.0, phase);
    }
    for k in 1..half {
        spec[n - k] = spec[k].conj();
    }
    let y_nyq = PI / dt;
    let g_nyq = remainder(y_nyq)?;
    let sign = if start.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    spec[half] = Complex64::new(g_nyq.re * sign, 0.0);

    let tail = g_nyq.norm() * y_nyq / PI;
    if !(tail <= cfg.alias_tol) {
        return Err(Error::FrequencyWindowTooSmall {
            tail,
            tolerance: cfg.alias_tol,
        });
    }

    fft_forward(&mut spec);
    let values: Vec<f64> = spec
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let t = (start + j as i64) as f64 * dt;
            let r = if t >= 0.0 {
                w1 * (-t).exp() + w2 * (-2.0 * t).exp()
            } else {
                0.0
            };
            (-c * t).exp() * s.re / t_len + r
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::FrequencyWindowTooSmall {
            tail: f64::INFINITY,
            tolerance: cfg.alias_tol,
        });
    }
    let mut x0 = SampledKernel::new(dt, start, values)?.with_jumps([Jump { index: 0, size: 1.0 }]);
    if strip.causal {
        let fraction = x0.negative_time_l2_fraction();
        if fraction > cfg.causality_tol {
            return Err(Error::CausalityViolated {
                fraction,
                tolerance: cfg.causality_tol,
            });
        }
        x0 = x0.restrict_indices(0, x0.end_index());
    }
    Ok(x0)
}

/// `D(t) = ∫ x0(t - v) η(dv)` with its jumps, on the window of `x0`.
fn delay_integral(x0: &SampledKernel, eta: &SignedMeasure) -> SampledKernel {
    conv::kernel_measure(x0, eta)
}

/// `sup_t |x0(t) - 𝟙_{[0,∞)}(t) - ∫_{-∞}^t ∫ x0(u - v) η(dv) du|` on the grid.
pub fn resolvent_residual(x0: &SampledKernel, eta: &SignedMeasure) -> f64 {
    let d = delay_integral(x0, eta);
    let cum = conv::cumulative_integral(&d);
    (0..x0.len())
        .map(|i| {
            let step = if x0.start + (i as i64) >= 0 { 1.0 } else { 0.0 };
            (x0.values[i] - step - cum[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// `∫∫ x0(u - v) η(dv) du`, which equals -1 when η has a first moment.
pub fn mass_identity(x0: &SampledKernel, eta: &SignedMeasure) -> f64 {
    let d = delay_integral(x0, eta);
    conv::cumulative_integral(&d).last().copied().unwrap_or(0.0)
}

/// The measure `x0(du) = δ0 + D(u) du` as a kernel with `atom_at_zero = 1`.
pub fn x0_measure(x0: &SampledKernel, eta: &SignedMeasure) -> SampledKernel {
    let mut d = delay_integral(x0, eta);
    d.atom_at_zero = 1.0;
    d
}

/// Signed total mass of a kernel-with-atom: `atom + ∫ d`.
pub fn measure_total_mass(m: &SampledKernel) -> f64 {
    m.atom_at_zero + conv::cumulative_integral(m).last().copied().unwrap_or(0.0)
}

/// Total mass of the domination measure `μ(du) = ∫ |x0(u - v)| |η|(dv) du`,
/// which by Fubini is `‖x0‖₁ · |η|([0,∞))`.
pub fn domination_mass(x0: &SampledKernel, eta: &SignedMeasure) -> f64 {
    let jumps = x0.jumps.iter().map(|j| {
        let right = x0.at_index(j.index);
        Jump {
            index: j.index,
            size: right.abs() - (right - j.size).abs(),
        }
    });
    let abs = SampledKernel {
        values: x0.values.iter().map(|v| v.abs()).collect(),
        jumps: Vec::new(),
        ..x0.clone()
    }
    .with_jumps(jumps);
    let l1 = conv::cumulative_integral(&abs).last().copied().unwrap_or(0.0);
    l1 * eta.total_variation()
}

/// `θ ∗ x0(du) (t) = atom · θ(t) + ∫ θ(t - u) d(u) du`.
pub fn convolve_kernel_with_x0_measure(theta: &SampledKernel, x0m: &SampledKernel) -> Result<SampledKernel> {
    theta.check_same_grid(x0m)?;
    let finite = |k: &SampledKernel| k.values.iter().all(|v| v.is_finite());
    if !finite(theta) || !finite(x0m) || !x0m.atom_at_zero.is_finite() {
        return Err(Error::NotIntegrable);
    }
    let mut out = conv::function_function(theta, x0m);
    for i in 0..out.len() {
        out.values[i] += x0m.atom_at_zero * theta.at_index(out.start + i as i64);
    }
    let end = out.end_index();
    out.jumps = Vec::new();
    for j in conv::shifted_jumps(&theta.jumps, 0, x0m.atom_at_zero) {
        if j.index >= out.start && j.index < end {
            out.add_jump(j.index, j.size);
        }
    }
    if !finite(&out) {
        return Err(Error::NotIntegrable);
    }
    Ok(out)
}

/// Left-sided Riemann-Liouville integral of order `d` of a kernel, by product
/// integration against `s^{d-1}/Γ(d)`.
pub fn fractional_integral(x: &SampledKernel, d: f64) -> Result<SampledKernel> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::InvalidInput(format!(
            "fractional order must lie in (0, 1), got {d}"
        )));
    }
    Ok(conv::riemann_liouville(x, d))
}

/// Largest relative deviation between the trapezoid Fourier transform of
/// `e^{ct} x0(t)` and `1/h(c + iy)` over DFT frequencies with `|y| ≤ y_max`.
pub fn transform_consistency(x0: &SampledKernel, eta: &SignedMeasure, c: f64, y_max: f64) -> Result<f64> {
    let n = x0.len().next_power_of_two();
    let t_len = n as f64 * x0.dt;
    let mut worst: f64 = 0.0;
    let mut k = 0usize;
    loop {
        let y = 2.0 * PI * k as f64 / t_len;
        if y > y_max {
            break;
        }
        let z = Complex64::new(c, y);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in x0.values.iter().enumerate() {
            acc += v * (z * x0.time(i)).exp();
        }
        for j in &x0.jumps {
            acc -= 0.5 * j.size * (z * (j.index as f64 * x0.dt)).exp();
        }
        acc *= x0.dt;
        let want = 1.0 / h_eval(eta, z)?;
        worst = worst.max((acc - want).norm() / want.norm());
        k += 1;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, GammaTerm};
    use crate::solver::strip::{find_strip, ScanConfig};

    fn solve(eta: &SignedMeasure, grid: InversionGrid) -> SampledKernel {
        let s = find_strip(eta, &ScanConfig::default()).unwrap();
        solve_x0(eta, &s, grid).unwrap()
    }

    #[test]
    fn ou_causal_and_noncausal() {
        let grid = InversionGrid {
            n: 1 << 14,
            dt: 1.0 / 256.0,
        };
        for lambda in [1.0, -1.0] {
            let eta = SignedMeasure::dirac(0.0, -lambda).unwrap();
            let x0 = solve(&eta, grid);
            let err = (0..x0.len())
                .map(|i| {
                    let t = x0.time(i);
                    let exact = if lambda > 0.0 {
                        if t >= 0.0 {
                            (-lambda * t).exp()
                        } else {
                            0.0
                        }
                    } else if t < 0.0 {
                        -(-lambda * t).exp()
                    } else {
                        0.0
                    };
                    (x0.values[i] - exact).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "lambda={lambda} err={err}");
            assert!((mass_identity(&x0, &eta) + 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_kernel_leaves_unit_residual() {
        let eta = SignedMeasure::dirac(0.0, -1.0).unwrap();
        let x0 = SampledKernel::new(1.0 / 64.0, 0, vec![0.0; 256]).unwrap();
        assert_eq!(resolvent_residual(&x0, &eta), 1.0);
    }

    #[test]
    fn carma_kernel_and_identities() {
        let eta = SignedMeasure::new(
            vec![Atom {
                location: 0.0,
                weight: -1.5,
            }],
            vec![GammaTerm::new(0.25, 1.0, 1.5)],
            None,
        )
        .unwrap();
        let grid = InversionGrid {
            n: 1 << 14,
            dt: 1.0 / 256.0,
        };
        let x0 = solve(&eta, grid);
        let g = SampledKernel::from_fn(grid.dt, 0, x0.len(), |t| 0.5 * (-t).exp() + 0.5 * (-2.0 * t).exp()).unwrap();
        assert!(x0.l2_distance(&g).unwrap() < 1e-6);
        assert!(resolvent_residual(&x0, &eta) < 1e-4);
        let m = x0_measure(&x0, &eta);
        assert!(measure_total_mass(&m).abs() < 1e-4);
    }

    #[test]
    fn ou_measure_and_domination() {
        let eta = SignedMeasure::dirac(0.0, -1.0).unwrap();
        let x0 = solve(
            &eta,
            InversionGrid {
                n: 1 << 14,
                dt: 1.0 / 256.0,
            },
        );
        let m = x0_measure(&x0, &eta);
        assert_eq!(m.atom_at_zero, 1.0);
        assert!((m.value_at(1.0) + (-1.0f64).exp()).abs() < 1e-6);
        assert!((domination_mass(&x0, &eta) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn indicator_against_ou_measure() {
        let eta = SignedMeasure::dirac(0.0, -1.0).unwrap();
        let dt = 1.0 / 256.0;
        let x0 = solve(&eta, InversionGrid { n: 1 << 14, dt });
        let m = x0_measure(&x0, &eta);
        let theta = SampledKernel::indicator(0.0, 1.0, dt, x0.len()).unwrap();
        let r = convolve_kernel_with_x0_measure(&theta, &m).unwrap();
        for t in [0.25f64, 0.75, 1.5, 3.0] {
            let exact = if t <= 1.0 {
                (-t).exp()
            } else {
                (-t).exp() - (-(t - 1.0)).exp()
            };
            assert!((r.value_at(t) - exact).abs() < 1e-5, "t={t}");
        }
    }
}
