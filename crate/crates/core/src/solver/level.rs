//! The level-model kernel `ψ` solving `ψ = θ + ψ ∗ φ`.
//!
//! Both routes use the same discretization of `ψ ∗ φ` (hat-function node
//! weights of `φ` plus jump corrections), so wherever both apply they agree
//! to rounding and wrap-around error.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::conv;
use crate::error::{Error, Result};
use crate::kernel::{Jump, SampledKernel};
use crate::measure::SignedMeasure;
use crate::numerics::{fft_forward, fft_inverse, reg_lower_gamma};

/// Tolerance below which `|1 - L[φ]|` counts as vanishing.
pub const DENOMINATOR_TOL: f64 = 1e-8;

fn check_level_inputs(theta: &SampledKernel, phi: &SignedMeasure) -> Result<SampledKernel> {
    if phi.charges_origin() {
        return Err(Error::InvalidInput(
            "level measure phi must not charge the origin".into(),
        ));
    }
    let sup = theta.sup_norm();
    let neg = (0..theta.len())
        .filter(|&i| theta.start + (i as i64) < 0)
        .fold(0.0, |m: f64, i| m.max(theta.values[i].abs()));
    if neg > 1e-12 * sup.max(1e-300) {
        return Err(Error::InvalidInput("theta must vanish on (-inf, 0)".into()));
    }
    Ok(theta.restrict_indices(0, theta.end_index()))
}

/// Atoms of `φ` that sit on grid points, as `(grid lag, weight)`.
fn grid_atoms(phi: &SignedMeasure, dt: f64) -> Vec<(i64, f64)> {
    phi.atoms()
        .iter()
        .filter_map(|a| {
            let x = a.location / dt;
            ((x - x.round()).abs() < 1e-9).then(|| (x.round() as i64, a.weight))
        })
        .collect()
}

/// `ψ = Σ_n θ ∗ φ^{∗n}`, truncated by the a-priori bound
/// `‖θ‖₂ ρ^n / (1 - ρ) < tol` with `ρ = |φ|((0,∞))`.
pub fn level_kernel_series(theta: &SampledKernel, phi: &SignedMeasure, tol: f64) -> Result<SampledKernel> {
    let theta = check_level_inputs(theta, phi)?;
    let n = theta.len();
    let w = phi.node_weights(theta.dt, n);
    let rho = phi.total_variation().max(w.node.iter().map(|v| v.abs()).sum::<f64>());
    if rho >= 1.0 {
        return Err(Error::ContractionViolated { rho });
    }
    let atoms = grid_atoms(phi, theta.dt);
    let norm = theta.l2_norm();
    let mut psi = theta.clone();
    let mut term = theta.clone();
    let mut k = 1;
    while rho > 0.0 && norm * rho.powi(k) / (1.0 - rho) >= tol && k < 100_000 {
        let mut next = conv::kernel_weights(&term, &w);
        for j in &term.jumps {
            for &(lag, wt) in &atoms {
                let idx = j.index + lag;
                if idx < next.end_index() {
                    next.add_jump(idx, j.size * wt);
                }
            }
        }
        if next.values.iter().all(|v| *v == 0.0) && next.jumps.is_empty() {
            break;
        }
        for (p, v) in psi.values.iter_mut().zip(&next.values) {
            *p += v;
        }
        for j in &next.jumps {
            psi.add_jump(j.index, j.size);
        }
        term = next;
        k += 1;
    }
    Ok(psi)
}

/// Smallest `|1 - L_d[φ](x + iy)|` over the DFT frequencies, where `L_d` is
/// the transform of the discretized measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenominatorReport {
    pub min_abs: f64,
    pub at_re: f64,
    pub at_im: f64,
}

struct Tilted {
    buf_len: usize,
    start: i64,
    c: f64,
    dt: f64,
}

impl Tilted {
    /// DFT of a lag sequence tilted by `e^{c v}`, evaluated with `e^{+i y v}`.
    fn lag_spectrum(&self, seq: &[f64], x: f64) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.buf_len];
        for (k, v) in seq.iter().enumerate().take(self.buf_len) {
            buf[k] = Complex64::new(v * (x * k as f64 * self.dt).exp(), 0.0);
        }
        fft_forward(&mut buf);
        buf.iter().map(|z| z.conj()).collect()
    }

    /// DFT of a sequence on the time window, tilted by `e^{c t}`.
    fn window_spectrum(&self, at: impl Fn(i64) -> f64) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = (0..self.buf_len)
            .map(|b| {
                let g = self.start + b as i64;
                Complex64::new(at(g) * (self.c * g as f64 * self.dt).exp(), 0.0)
            })
            .collect();
        fft_forward(&mut buf);
        buf.iter().map(|z| z.conj()).collect()
    }

    /// Inverts [`Tilted::window_spectrum`].
    fn to_window(&self, spec: Vec<Complex64>) -> Vec<f64> {
        let mut buf: Vec<Complex64> = spec.into_iter().map(|z| z.conj()).collect();
        fft_inverse(&mut buf);
        let scale = 1.0 / self.buf_len as f64;
        buf.iter()
            .enumerate()
            .map(|(b, z)| {
                let g = self.start + b as i64;
                z.conj().re * scale * (-self.c * g as f64 * self.dt).exp()
            })
            .collect()
    }

    fn frequency(&self, m: usize) -> f64 {
        let t_len = self.buf_len as f64 * self.dt;
        let signed = if m <= self.buf_len / 2 {
            m as f64
        } else {
            m as f64 - self.buf_len as f64
        };
        2.0 * PI * signed / t_len
    }
}

fn min_denominator(t: &Tilted, seq: &[f64], lines: &[f64]) -> DenominatorReport {
    let mut best = DenominatorReport {
        min_abs: f64::INFINITY,
        at_re: 0.0,
        at_im: 0.0,
    };
    for &x in lines {
        for (m, v) in t.lag_spectrum(seq, x).iter().enumerate() {
            let d = (1.0 - v).norm();
            if d < best.min_abs {
                best = DenominatorReport {
                    min_abs: d,
                    at_re: x,
                    at_im: t.frequency(m),
                };
            }
        }
    }
    best
}

fn transform_layout(theta: &SampledKernel, c: f64) -> Tilted {
    let buf_len = (2 * theta.len()).next_power_of_two();
    Tilted {
        buf_len,
        start: -((buf_len / 2) as i64),
        c,
        dt: theta.dt,
    }
}

/// Scans `|1 - L_d[φ]|` on the lines `Re z ∈ {0, c/2, c}`.
pub fn scan_level_denominator(theta: &SampledKernel, phi: &SignedMeasure, c: f64) -> DenominatorReport {
    let t = transform_layout(theta, c);
    let w = phi.node_weights(theta.dt, theta.len());
    min_denominator(&t, &w.node, &[0.0, 0.5 * c, c])
}

/// `ψ` from `L[ψ] = L[θ] / (1 - L[φ])` on the line `Re z = c`, inverted on
/// a window `[-T, T)` twice as long as `θ`'s.
pub fn level_kernel_transform(theta: &SampledKernel, phi: &SignedMeasure, c: f64) -> Result<SampledKernel> {
    if !(c <= 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("strip offset c must be <= 0, got {c}")));
    }
    let theta = check_level_inputs(theta, phi)?;
    let t = transform_layout(&theta, c);
    let w = phi.node_weights(theta.dt, theta.len());
    let atoms = grid_atoms(phi, theta.dt);
    let mut atom_seq = vec![0.0; t.buf_len];
    for &(lag, wt) in &atoms {
        if (lag as usize) < t.buf_len {
            atom_seq[lag as usize] += wt;
        }
    }
    let lines = [0.0, 0.5 * c, c];
    let den = min_denominator(&t, &w.node, &lines);
    if den.min_abs <= DENOMINATOR_TOL {
        return Err(Error::DenominatorVanishes {
            re: den.at_re,
            im: den.at_im,
            value: den.min_abs,
        });
    }
    let has_jumps = !theta.jumps.is_empty();
    let has_density_and_jumps = has_jumps && w.left.iter().any(|v| *v != 0.0);
    if has_density_and_jumps {
        let atom_den = min_denominator(&t, &atom_seq, &lines);
        if atom_den.min_abs <= DENOMINATOR_TOL {
            return Err(Error::DenominatorVanishes {
                re: atom_den.at_re,
                im: atom_den.at_im,
                value: atom_den.min_abs,
            });
        }
    }

    let w_hat = t.lag_spectrum(&w.node, c);
    let theta_hat = t.window_spectrum(|g| theta.at_index(g));
    let jump_at = |g: i64| theta.jumps.iter().filter(|j| j.index == g).map(|j| j.size).sum::<f64>();
    // Jumps of ψ: J_ψ = J_θ + J_ψ ⊛ atoms.
    let jpsi_hat: Option<Vec<Complex64>> = has_jumps.then(|| {
        let a_hat = t.lag_spectrum(&atom_seq, c);
        t.window_spectrum(jump_at)
            .iter()
            .zip(&a_hat)
            .map(|(j, a)| j / (1.0 - a))
            .collect()
    });
    let psi_hat: Vec<Complex64> = if has_density_and_jumps {
        let l_hat = t.lag_spectrum(&w.left, c);
        let jh = jpsi_hat.as_ref().expect("jump spectrum");
        (0..t.buf_len)
            .map(|m| (theta_hat[m] - jh[m] * l_hat[m]) / (1.0 - w_hat[m]))
            .collect()
    } else {
        theta_hat.iter().zip(&w_hat).map(|(th, wv)| th / (1.0 - wv)).collect()
    };
    let values = t.to_window(psi_hat);
    let mut psi = SampledKernel::new(theta.dt, t.start, values)?;
    if let Some(jh) = jpsi_hat {
        let jumps = t.to_window(jh);
        let big = jumps.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        for (b, v) in jumps.iter().enumerate() {
            if v.abs() > 1e-12 * big {
                psi.add_jump(t.start + b as i64, *v);
            }
        }
    }
    Ok(psi)
}

/// `sup_t |ψ(t) - (ψ ∗ φ)(t) - θ(t)|` over the window of `ψ`.
pub fn level_residual(psi: &SampledKernel, theta: &SampledKernel, phi: &SignedMeasure) -> Result<f64> {
    psi.check_same_grid(theta)?;
    let conv = conv::kernel_measure(psi, phi);
    Ok((0..psi.len())
        .map(|i| {
            let g = psi.start + i as i64;
            (psi.values[i] - conv.values[i] - theta.at_index(g)).abs()
        })
        .fold(0.0, f64::max))
}

/// `F_η(u) = η([0, u])` on the nodes `k·dt`, `k < len`.
pub fn cumulative_distribution(eta: &SignedMeasure, dt: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for g in eta.gamma_terms() {
        let mass = g.mass();
        for (k, o) in out.iter_mut().enumerate() {
            let x = k as f64 * dt - g.shift;
            *o += mass * reg_lower_gamma(g.shape, g.rate * x);
        }
    }
    if eta.grid_density().is_some() {
        let gd = SignedMeasure::new(vec![], vec![], eta.grid_density().cloned()).expect("valid grid");
        // Simpson is exact on each cell when the grids coincide.
        let mut cum = 0.0;
        let mut prev = gd.density(0.0);
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                let u = k as f64 * dt;
                let cur = gd.density(u);
                let mid = gd.density(u - 0.5 * dt);
                cum += dt / 6.0 * (prev + 4.0 * mid + cur);
                prev = cur;
            }
            *o += cum;
        }
    }
    for a in eta.atoms() {
        for (k, o) in out.iter_mut().enumerate() {
            if k as f64 * dt >= a.location {
                *o += a.weight;
            }
        }
    }
    out
}

/// Level-model inputs of the stationary-increment route: `θ = f - f(· - s)`
/// and `φ(du) = F_η(u) du` on the grid of `f`, after checking that `η` has
/// zero total mass and `∫|F_η| < 1`.
pub fn increment_level_inputs(
    f: &SampledKernel,
    eta: &SignedMeasure,
    s: f64,
) -> Result<(SampledKernel, SignedMeasure)> {
    if !eta.is_absolutely_continuous() {
        return Err(Error::InvalidInput(
            "increment route requires an absolutely continuous delay measure".into(),
        ));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidInput("increment lag s must be positive".into()));
    }
    let tv = eta.total_variation();
    let mass = eta.total_mass();
    if mass.abs() > 1e-9 * tv.max(1.0) {
        return Err(Error::UseStationaryRoute { mass });
    }
    let f = check_level_inputs(f, &SignedMeasure::zero())?;
    let dt = f.dt;
    let cdf = cumulative_distribution(eta, dt, f.len());
    let phi = SignedMeasure::from_grid(dt, 0.0, cdf)?;
    let integral = phi.total_variation();
    if integral >= 1.0 {
        return Err(Error::IncrementContraction { integral });
    }
    let ks = (s / dt).round() as i64;
    let values = (0..f.len())
        .map(|i| {
            let g = i as i64;
            f.at_index(g) - f.at_index(g - ks)
        })
        .collect();
    let theta = SampledKernel::new(dt, 0, values)?
        .with_jumps(f.jumps.iter().copied())
        .with_jumps(conv::shifted_jumps(&f.jumps, ks, -1.0).filter(|j: &Jump| j.index < f.len() as i64));
    Ok((theta, phi))
}

/// Kernel `ψ_s` of the stationary-increment solution: the level kernel for
/// the inputs of [`increment_level_inputs`].
pub fn increment_solution_kernel(f: &SampledKernel, eta: &SignedMeasure, s: f64, tol: f64) -> Result<SampledKernel> {
    let (theta, phi) = increment_level_inputs(f, eta, s)?;
    level_kernel_series(&theta, &phi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, GammaTerm};

    const DT: f64 = 1.0 / 64.0;
    const LEN: usize = 64 * 32;

    fn indicator() -> SampledKernel {
        SampledKernel::indicator(0.0, 1.0, DT, LEN).unwrap()
    }

    #[test]
    fn geometric_atoms_give_step_kernel() {
        let phi = SignedMeasure::dirac(1.0, 0.5).unwrap();
        let psi = level_kernel_series(&indicator(), &phi, 1e-13).unwrap();
        for (i, v) in psi.values.iter().enumerate() {
            let t = psi.time(i);
            assert!((v - 0.5f64.powi(t.floor() as i32)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn zero_phi_returns_theta() {
        let psi = level_kernel_series(&indicator(), &SignedMeasure::zero(), 1e-12).unwrap();
        assert_eq!(psi.values, indicator().values);
    }

    #[test]
    fn contraction_is_enforced() {
        let phi = SignedMeasure::exponential(-2.0, 1.0).unwrap();
        assert!(matches!(
            level_kernel_series(&indicator(), &phi, 1e-10),
            Err(Error::ContractionViolated { .. })
        ));
    }

    #[test]
    fn exponential_phi_matches_closed_form() {
        let phi = SignedMeasure::exponential(0.5, 1.0).unwrap();
        let psi = level_kernel_series(&indicator(), &phi, 1e-12).unwrap();
        for t in [0.5f64, 1.0, 2.0, 7.5] {
            let conv = if t < 1.0 {
                1.0 - (-0.5 * t).exp()
            } else {
                (-0.5 * (t - 1.0)).exp() - (-0.5 * t).exp()
            };
            let exact = if t < 1.0 { 1.0 } else { 0.0 } + conv;
            assert!(
                (psi.value_at(t) - exact).abs() < 5e-6,
                "t={t}: {} vs {exact}",
                psi.value_at(t)
            );
        }
    }

    #[test]
    fn routes_agree_and_residual_vanishes() {
        for phi in [
            SignedMeasure::dirac(1.0, 0.5).unwrap(),
            SignedMeasure::exponential(0.5, 1.0).unwrap(),
            SignedMeasure::new(
                vec![Atom {
                    location: 0.5,
                    weight: 0.3,
                }],
                vec![GammaTerm::new(0.2, 1.0, 1.0)],
                None,
            )
            .unwrap(),
        ] {
            let s = level_kernel_series(&indicator(), &phi, 1e-13).unwrap();
            let t = level_kernel_transform(&indicator(), &phi, -0.2).unwrap();
            let gap = s.l2_distance(&t).unwrap();
            assert!(gap < 1e-9, "gap {gap} for {phi:?}");
            assert!(level_residual(&t, &indicator(), &phi).unwrap() < 1e-9);
        }
    }

    #[test]
    fn unit_root_is_rejected() {
        let phi = SignedMeasure::dirac(1.0, 1.0).unwrap();
        let e = level_kernel_transform(&indicator(), &phi, -0.05).unwrap_err();
        assert!(matches!(e, Error::DenominatorVanishes { re, im, .. } if re == 0.0 && im == 0.0));
    }

    #[test]
    fn increment_route_gates() {
        let eta = SignedMeasure::new(
            vec![],
            vec![GammaTerm::new(1.0, 1.0, 1.0), GammaTerm::new(-2.0, 1.0, 2.0)],
            None,
        )
        .unwrap();
        let f = indicator();
        let psi = increment_solution_kernel(&f, &eta, 1.0, 1e-10).unwrap();
        assert!(psi.sup_norm() > 0.5);
        let big = eta.scaled(2.5);
        assert!(matches!(
            increment_solution_kernel(&f, &big, 1.0, 1e-10),
            Err(Error::IncrementContraction { integral }) if (integral - 1.25).abs() < 1e-2
        ));
        let massive = SignedMeasure::exponential(-1.0, 1.0).unwrap();
        assert!(matches!(
            increment_solution_kernel(&f, &massive, 1.0, 1e-10),
            Err(Error::UseStationaryRoute { .. })
        ));
    }
}
