//! Analytic fixtures with known kernels: Ornstein-Uhlenbeck, CARMA(2,1),
//! gamma-type delays, discrete ARMA embedded as a level model, and the
//! fractional noise kernel together with its long-memory constant.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernel::{Jump, SampledKernel};
use crate::measure::{Atom, GammaTerm, SignedMeasure};

/// `e^{-λt} 𝟙_{t≥0}` for `λ > 0`, `-e^{-λt} 𝟙_{t<0}` for `λ < 0`.
pub fn ou_kernel_value(lambda: f64, t: f64) -> f64 {
    if lambda > 0.0 && t >= 0.0 {
        (-lambda * t).exp()
    } else if lambda < 0.0 && t < 0.0 {
        -(-lambda * t).exp()
    } else {
        0.0
    }
}

/// The OU kernel on `len` samples starting at grid index `start`, with its
/// unit jump at 0 recorded when 0 lies in the window.
pub fn ou_kernel(lambda: f64, dt: f64, start: i64, len: usize) -> Result<SampledKernel> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidInput(
            "OU rate must be nonzero: lambda = 0 gives h(0) = 0".into(),
        ));
    }
    let k = SampledKernel::from_fn(dt, start, len, |t| ou_kernel_value(lambda, t))?;
    let end = k.end_index();
    Ok(if start <= 0 && end > 0 {
        k.with_jumps([Jump { index: 0, size: 1.0 }])
    } else {
        k
    })
}

/// `P(z) = z² + a1 z + a2`, `Q(z) = b0 + z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarmaSpec {
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
}

impl CarmaSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "CARMA AR polynomial must have roots with negative real part (a1 = {}, a2 = {})",
                self.a1, self.a2
            )));
        }
        if !(self.b0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "CARMA invertibility requires b0 > 0, got {}",
                self.b0
            )));
        }
        Ok(())
    }

    /// Distinct real roots of `P`, larger first.
    pub fn roots(&self) -> Result<(f64, f64)> {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc.abs() <= 1e-12 * self.a1 * self.a1 {
            return Err(Error::RepeatedRoots);
        }
        if disc < 0.0 {
            return Err(Error::InvalidInput(
                "fixture requires distinct real roots, P has a complex pair".into(),
            ));
        }
        let s = disc.sqrt();
        Ok((0.5 * (-self.a1 + s), 0.5 * (-self.a1 - s)))
    }
}

/// `η(dv) = (b0 - a1) δ0(dv) - (a2 - b0 (a1 - b0)) e^{-b0 v} dv`.
pub fn carma_delay_measure(spec: &CarmaSpec) -> Result<SignedMeasure> {
    spec.validate()?;
    let atom = spec.b0 - spec.a1;
    let coefficient = -(spec.a2 - spec.b0 * (spec.a1 - spec.b0));
    let atoms = if atom != 0.0 {
        vec![Atom {
            location: 0.0,
            weight: atom,
        }]
    } else {
        vec![]
    };
    let terms = if coefficient != 0.0 {
        vec![GammaTerm::new(coefficient, 1.0, spec.b0)]
    } else {
        vec![]
    };
    SignedMeasure::new(atoms, terms, None)
}

/// `g(t) = Σ Q(λ)/P'(λ) e^{λt} 𝟙_{t≥0}` over the roots of `P`.
pub fn carma21_kernel_value(spec: &CarmaSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if t < 0.0 {
        return Ok(0.0);
    }
    let (l1, l2) = spec.roots()?;
    let term = |l: f64| (spec.b0 + l) / (2.0 * l + spec.a1) * (l * t).exp();
    Ok(term(l1) + term(l2))
}

/// The CARMA(2,1) kernel on `[0, len·dt)` with its jump `g(0) = 1` at 0.
pub fn carma21_kernel(spec: &CarmaSpec, dt: f64, len: usize) -> Result<SampledKernel> {
    let (l1, l2) = spec.roots()?;
    spec.validate()?;
    let r1 = (spec.b0 + l1) / (2.0 * l1 + spec.a1);
    let r2 = (spec.b0 + l2) / (2.0 * l2 + spec.a1);
    let k = SampledKernel::from_fn(dt, 0, len, |t| r1 * (l1 * t).exp() + r2 * (l2 * t).exp())?;
    Ok(k.with_jumps([Jump {
        index: 0,
        size: r1 + r2,
    }]))
}

/// Which sufficient condition for a causal stationary solution holds for
/// `η = α1 δ0 + α2 u^{β-1} e^{-γu}/Γ(β) du`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDelayVerdict {
    /// `α1 < 0` and `α1 + |α2| γ^{-β} < 0`.
    pub condition_i: bool,
    /// `α1, α2 < 0` and `β < 1`.
    pub condition_ii: bool,
    /// `α1 + |α2| γ^{-β}`.
    pub bound: f64,
}

impl GammaDelayVerdict {
    pub fn label(&self) -> &'static str {
        match (self.condition_i, self.condition_ii) {
            (true, true) => "conditions (i) and (ii)",
            (true, false) => "condition (i)",
            (false, true) => "condition (ii)",
            (false, false) => "inconclusive",
        }
    }
}

pub fn gamma_delay_existence(alpha1: f64, alpha2: f64, beta: f64, gamma_rate: f64) -> Result<GammaDelayVerdict> {
    if !(beta > 0.0 && gamma_rate > 0.0) {
        return Err(Error::InvalidInput("gamma delay needs beta > 0 and gamma > 0".into()));
    }
    let bound = alpha1 + alpha2.abs() * gamma_rate.powf(-beta);
    Ok(GammaDelayVerdict {
        condition_i: alpha1 < 0.0 && bound < 0.0,
        condition_ii: alpha1 < 0.0 && alpha2 < 0.0 && beta < 1.0,
        bound,
    })
}

/// `α1 δ0 + α2 u^{β-1} e^{-γu}/Γ(β) du`, whose characteristic function is
/// `h(z) = -z - α1 - α2 (γ - z)^{-β}`.
pub fn gamma_delay_measure(alpha1: f64, alpha2: f64, beta: f64, gamma_rate: f64) -> Result<SignedMeasure> {
    let atoms = if alpha1 != 0.0 {
        vec![Atom {
            location: 0.0,
            weight: alpha1,
        }]
    } else {
        vec![]
    };
    let terms = if alpha2 != 0.0 {
        vec![GammaTerm::new(alpha2, beta, gamma_rate)]
    } else {
        vec![]
    };
    SignedMeasure::new(atoms, terms, None)
}

/// Discrete ARMA(p, q): `Φ(z) = 1 - Σ φ_k z^k`, `Θ(z) = 1 + Σ θ_k z^k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArmaSpec {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

const CIRCLE_POINTS: usize = 8192;

impl ArmaSpec {
    fn ar_poly(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.phi.iter().rev() {
            acc = (acc + c) * z;
        }
        1.0 - acc
    }

    /// Smallest `|Φ(e^{iω})|`, refined by golden-section search around the
    /// best grid point.
    pub fn min_on_unit_circle(&self) -> f64 {
        let f = |w: f64| self.ar_poly(Complex64::from_polar(1.0, w)).norm();
        let h = 2.0 * PI / CIRCLE_POINTS as f64;
        let (k, _) = (0..CIRCLE_POINTS)
            .map(|k| (k, f(k as f64 * h)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let (mut a, mut b) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        f(0.5 * (a + b)).min(f(k as f64 * h))
    }

    /// Zeros of `Φ` inside the unit disc, by the winding number of `Φ(e^{iω})`.
    pub fn zeros_inside_unit_disc(&self) -> i64 {
        let h = 2.0 * PI / CIRCLE_POINTS as f64;
        let mut prev = self.ar_poly(Complex64::new(1.0, 0.0)).arg();
        let mut total = 0.0;
        for k in 1..=CIRCLE_POINTS {
            let a = self.ar_poly(Complex64::from_polar(1.0, k as f64 * h)).arg();
            let mut d = a - prev;
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            total += d;
            prev = a;
        }
        (total / (2.0 * PI)).round() as i64
    }

    /// Requires `Φ ≠ 0` on the unit circle and all zeros outside the disc.
    pub fn validate(&self) -> Result<()> {
        if self.phi.iter().chain(&self.theta).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("ARMA coefficients must be finite".into()));
        }
        let m = self.min_on_unit_circle();
        if m <= 1e-8 {
            return Err(Error::InvalidInput(format!(
                "AR polynomial has a root on the unit circle (min |Phi| = {m:.3e})"
            )));
        }
        let inside = self.zeros_inside_unit_disc();
        if inside != 0 {
            return Err(Error::InvalidInput(format!(
                "fixture requires a causal AR polynomial, {inside} root(s) inside the unit disc"
            )));
        }
        Ok(())
    }
}

/// `ψ_0..ψ_n` of `Θ(z)/Φ(z)`: `ψ_j = θ_j + Σ_{k=1}^{min(j,p)} φ_k ψ_{j-k}`.
pub fn arma_psi_weights(spec: &ArmaSpec, n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut psi = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut v = match j {
            0 => 1.0,
            _ => spec.theta.get(j - 1).copied().unwrap_or(0.0),
        };
        for (k, p) in spec.phi.iter().enumerate().take(j) {
            v += p * psi[j - k - 1];
        }
        psi.push(v);
    }
    Ok(psi)
}

/// `φ = Σ φ_j δ_j` and `θ = 𝟙_{[0,1)} + Σ θ_j 𝟙_{[j,j+1)}` on `[0, len·dt)`.
/// `1/dt` must be an integer so that integer times are grid points.
pub fn arma_level_inputs(spec: &ArmaSpec, dt: f64, len: usize) -> Result<(SignedMeasure, SampledKernel)> {
    spec.validate()?;
    let per_unit = 1.0 / dt;
    if (per_unit - per_unit.round()).abs() > 1e-9 || per_unit < 1.0 {
        return Err(Error::InvalidInput(format!("1/dt must be an integer, got dt = {dt}")));
    }
    let atoms = spec
        .phi
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(j, w)| Atom {
            location: (j + 1) as f64,
            weight: *w,
        })
        .collect();
    let phi = SignedMeasure::new(atoms, vec![], None)?;
    let heights: Vec<f64> = std::iter::once(1.0).chain(spec.theta.iter().copied()).collect();
    let per = per_unit.round() as usize;
    let mut theta = SampledKernel::from_fn(dt, 0, len, |_| 0.0)?;
    for (i, v) in theta.values.iter_mut().enumerate() {
        *v = heights.get(i / per).copied().unwrap_or(0.0);
    }
    let mut prev = 0.0;
    for j in 0..=heights.len() {
        let h = heights.get(j).copied().unwrap_or(0.0);
        let idx = (j * per) as i64;
        if idx < len as i64 {
            theta.add_jump(idx, h - prev);
        }
        prev = h;
    }
    Ok((phi, theta))
}

/// The level kernel for `θ = 𝟙_{[0,1)}` and `φ(du) = α e^{-βu} du` with
/// `α < β`: `ψ = θ + θ ∗ ξ`, `ξ(du) = α e^{-(β-α)u} du`.
pub fn exponential_level_kernel_value(alpha: f64, beta: f64, t: f64) -> Result<f64> {
    let kappa = beta - alpha;
    if !(beta > 0.0 && kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "exponential level kernel needs 0 < beta and alpha < beta (alpha = {alpha}, beta = {beta})"
        )));
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    let theta = if t < 1.0 { 1.0 } else { 0.0 };
    Ok(theta + alpha / kappa * ((-kappa * (t - 1.0).max(0.0)).exp() - (-kappa * t).exp()))
}

/// `θ(t) = t₊^d / Γ(1+d)` on `[0, len·dt)`.
pub fn fractional_theta(d: f64, dt: f64, len: usize) -> Result<SampledKernel> {
    check_fractional_order(d)?;
    let g = gamma(1.0 + d);
    SampledKernel::from_fn(dt, 0, len, |t| if t > 0.0 { t.powf(d) / g } else { 0.0 })
}

fn check_fractional_order(d: f64) -> Result<()> {
    if !(d > 0.0 && d < 0.5) {
        return Err(Error::InvalidInput(format!(
            "fractional order d must lie in (0, 1/2), got {d}"
        )));
    }
    Ok(())
}

/// `Γ(1-2d) / (Γ(d) Γ(1-d)) · E[L₁²] / h(0)²`, the constant `C` in
/// `γ_X(t) ~ C t^{2d-1}`.
pub fn long_memory_constant(d: f64, second_moment: f64, h0: f64) -> Result<f64> {
    check_fractional_order(d)?;
    if h0 == 0.0 || !h0.is_finite() {
        return Err(Error::InvalidInput("h(0) must be finite and nonzero".into()));
    }
    Ok(gamma(1.0 - 2.0 * d) / (gamma(d) * gamma(1.0 - d)) * second_moment / (h0 * h0))
}

/// `∫ (θ(1-u) - θ(-u))² du = 1 / (Γ(2d+2) cos(πd))`, the variance of a unit
/// increment of the fractional noise driven by `E[L₁²] = 1`.
pub fn fractional_increment_variance(d: f64) -> Result<f64> {
    check_fractional_order(d)?;
    Ok(1.0 / (gamma(2.0 * d + 2.0) * (PI * d).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ou_values() {
        assert_eq!(ou_kernel_value(1.0, 0.0), 1.0);
        assert_eq!(ou_kernel_value(1.0, -0.5), 0.0);
        assert_relative_eq!(ou_kernel_value(-1.0, -1.0), -(-1f64).exp());
        assert_eq!(ou_kernel_value(-1.0, 0.0), 0.0);
        assert!(ou_kernel(0.0, 0.1, 0, 10).is_err());
        let k = ou_kernel(-1.0, 0.5, -4, 8).unwrap();
        assert_eq!(k.jumps, vec![Jump { index: 0, size: 1.0 }]);
    }

    #[test]
    fn carma_measure_and_kernel() {
        let spec = CarmaSpec {
            a1: 3.0,
            a2: 2.0,
            b0: 1.5,
        };
        let eta = carma_delay_measure(&spec).unwrap();
        assert_eq!(
            eta.atoms(),
            &[Atom {
                location: 0.0,
                weight: -1.5
            }]
        );
        assert_relative_eq!(eta.gamma_terms()[0].coefficient, 0.25);
        assert_eq!(eta.gamma_terms()[0].rate, 1.5);
        for t in [0.0f64, 0.3, 2.0] {
            let want = 0.5 * (-t).exp() + 0.5 * (-2.0 * t).exp();
            assert_relative_eq!(carma21_kernel_value(&spec, t).unwrap(), want, epsilon = 1e-15);
        }
        assert_eq!(carma21_kernel_value(&spec, -1.0).unwrap(), 0.0);
        let degenerate = carma_delay_measure(&CarmaSpec { b0: 1.0, ..spec }).unwrap();
        assert_eq!(degenerate, SignedMeasure::dirac(0.0, -2.0).unwrap());
        assert!(carma_delay_measure(&CarmaSpec { b0: -1.0, ..spec }).is_err());
        assert_eq!(
            carma21_kernel(
                &CarmaSpec {
                    a1: 2.0,
                    a2: 1.0,
                    b0: 1.0
                },
                0.1,
                4
            )
            .unwrap_err(),
            Error::RepeatedRoots
        );
    }

    #[test]
    fn carma_transfer_function_matches_h() {
        // 1/h(iy) = Q(-iy)/P(-iy) under L[x](z) = ∫ e^{zu} x(u) du
        let spec = CarmaSpec {
            a1: 3.0,
            a2: 2.0,
            b0: 1.5,
        };
        let eta = carma_delay_measure(&spec).unwrap();
        for y in [0.0, 0.7, -3.0, 11.0] {
            let z = Complex64::new(0.0, y);
            let lhs = 1.0 / crate::measure::h_eval(&eta, z).unwrap();
            let rhs = (spec.b0 - z) / (z * z - spec.a1 * z + spec.a2);
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn gamma_delay_verdicts() {
        let v = gamma_delay_existence(-2.0, 1.0, 0.5, 1.0).unwrap();
        assert!(v.condition_i && !v.condition_ii);
        assert_relative_eq!(v.bound, -1.0);
        let v = gamma_delay_existence(-1.0, -1.0, 0.5, 0.1).unwrap();
        assert!(v.condition_ii);
        assert_eq!(
            gamma_delay_existence(1.0, -3.0, 0.2, 5.0).unwrap().label(),
            "inconclusive"
        );
        let eta = gamma_delay_measure(-2.0, 1.0, 0.5, 1.0).unwrap();
        let h0 = crate::measure::h_eval(&eta, Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(h0.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn arma_weights() {
        let geo = arma_psi_weights(
            &ArmaSpec {
                phi: vec![0.5],
                theta: vec![],
            },
            5,
        )
        .unwrap();
        for (j, w) in geo.iter().enumerate() {
            assert_eq!(*w, 0.5f64.powi(j as i32));
        }
        let ma = arma_psi_weights(
            &ArmaSpec {
                phi: vec![],
                theta: vec![0.4],
            },
            3,
        )
        .unwrap();
        assert_eq!(ma, vec![1.0, 0.4, 0.0, 0.0]);
        let both = arma_psi_weights(
            &ArmaSpec {
                phi: vec![0.5],
                theta: vec![0.4],
            },
            3,
        )
        .unwrap();
        assert_relative_eq!(both[1], 0.9);
        assert_relative_eq!(both[2], 0.45);
        assert_relative_eq!(both[3], 0.225);
    }

    #[test]
    fn arma_validation() {
        assert!(ArmaSpec {
            phi: vec![1.0],
            theta: vec![]
        }
        .validate()
        .is_err());
        assert!(ArmaSpec {
            phi: vec![-1.0],
            theta: vec![]
        }
        .validate()
        .is_err());
        assert_eq!(
            ArmaSpec {
                phi: vec![2.0],
                theta: vec![]
            }
            .zeros_inside_unit_disc(),
            1
        );
        assert!(ArmaSpec {
            phi: vec![2.0],
            theta: vec![]
        }
        .validate()
        .is_err());
        assert!(ArmaSpec {
            phi: vec![0.3, -0.2],
            theta: vec![0.5]
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn arma_inputs_are_step_functions() {
        let spec = ArmaSpec {
            phi: vec![0.5],
            theta: vec![0.4],
        };
        let (phi, theta) = arma_level_inputs(&spec, 0.25, 12).unwrap();
        assert_eq!(phi, SignedMeasure::dirac(1.0, 0.5).unwrap());
        assert_eq!(&theta.values[..9], &[1.0, 1.0, 1.0, 1.0, 0.4, 0.4, 0.4, 0.4, 0.0]);
        assert_eq!(theta.jumps.len(), 3);
        assert_relative_eq!(theta.jumps[1].size, -0.6);
        assert!(arma_level_inputs(&spec, 0.3, 12).is_err());
    }

    #[test]
    fn fractional_fixtures() {
        let th = fractional_theta(0.25, 0.5, 4).unwrap();
        assert_relative_eq!(th.values[2], 1.0 / gamma(1.25));
        assert_relative_eq!(th.values[2], 1.1032626, epsilon = 1e-6);
        assert_eq!(th.values[0], 0.0);
        assert!(fractional_theta(0.5, 0.1, 4).is_err());
        let c = long_memory_constant(0.25, 1.0, 1.0).unwrap();
        assert_relative_eq!(c, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-13);
        assert_eq!(long_memory_constant(0.25, 0.0, 1.0).unwrap(), 0.0);
        assert!(long_memory_constant(1e-8, 1.0, 1.0).unwrap() < 1e-7);
        assert_relative_eq!(
            fractional_increment_variance(0.25).unwrap(),
            1.063_846_081_069_047_3,
            epsilon = 1e-9
        );
    }

    #[test]
    fn exponential_level_closed_form() {
        assert_relative_eq!(
            exponential_level_kernel_value(0.5, 1.0, 2.0).unwrap(),
            (-0.5f64).exp() - (-1.0f64).exp()
        );
        // α/β = -2: ξ = -2 e^{-3u}
        let t = 0.5;
        assert_relative_eq!(
            exponential_level_kernel_value(-2.0, 1.0, t).unwrap(),
            1.0 - 2.0 / 3.0 * (1.0 - (-3.0 * t).exp())
        );
        assert!(exponential_level_kernel_value(1.0, 1.0, 0.5).is_err());
    }
}
