//! Grid quadratures for convolutions between sampled kernels and measures.
//!
//! Kernels are treated as piecewise linear between grid points except across
//! recorded jumps, where the one-sided limits are used.

use statrs::function::gamma::gamma;

use crate::kernel::{Jump, SampledKernel};
use crate::measure::{NodeWeights, SignedMeasure};
use crate::numerics::{convolve, gauss8};

/// `(f ∗ μ)(t) = ∫ f(t - v) μ(dv)` on the window of `f`.
pub(crate) fn kernel_measure(f: &SampledKernel, mu: &SignedMeasure) -> SampledKernel {
    let w = mu.node_weights(f.dt, f.len());
    let mut out = kernel_weights(f, &w);
    for a in mu.atoms() {
        let x = a.location / f.dt;
        if (x - x.round()).abs() > 1e-9 {
            continue;
        }
        let k = x.round() as i64;
        for j in &f.jumps {
            let idx = j.index + k;
            if idx >= out.start && idx < out.end_index() {
                out.add_jump(idx, j.size * a.weight);
            }
        }
    }
    out
}

/// Same as [`kernel_measure`] but with precomputed node weights. The result
/// carries no jump information.
pub(crate) fn kernel_weights(f: &SampledKernel, w: &NodeWeights) -> SampledKernel {
    let n = f.len();
    let mut values = convolve(&f.values, &w.node);
    values.truncate(n);
    values.resize(n, 0.0);
    for j in &f.jumps {
        let js = j.index - f.start;
        if js < 0 || js >= n as i64 {
            continue;
        }
        let js = js as usize;
        for (k, l) in w.left.iter().enumerate().take(n - js) {
            if *l != 0.0 {
                values[js + k] -= j.size * l;
            }
        }
    }
    SampledKernel {
        dt: f.dt,
        start: f.start,
        values,
        atom_at_zero: 0.0,
        jumps: Vec::new(),
    }
}

/// Trapezoid rule for `∫ f(t - u) g(u) du`, corrected at jumps of either
/// factor. The result starts at `f.start + g.start` and has `f.len()` samples.
pub(crate) fn function_function(f: &SampledKernel, g: &SampledKernel) -> SampledKernel {
    let dt = f.dt;
    let n = f.len();
    let start = f.start + g.start;
    let mut values: Vec<f64> = convolve(&f.values, &g.values).into_iter().map(|v| v * dt).collect();
    values.truncate(n);
    values.resize(n, 0.0);
    let half = 0.5 * dt;
    for (i, v) in values.iter_mut().enumerate() {
        let t = start + i as i64;
        for j in &g.jumps {
            *v -= half * j.size * f.at_index(t - j.index);
        }
        for j in &f.jumps {
            *v -= half * j.size * g.at_index(t - j.index);
        }
    }
    SampledKernel {
        dt,
        start,
        values,
        atom_at_zero: 0.0,
        jumps: Vec::new(),
    }
}

/// Node weights of `s^{d-1}/Γ(d) ds` on `[0, (len-1) dt]`.
pub(crate) fn power_weights(d: f64, dt: f64, len: usize) -> NodeWeights {
    let mut node = vec![0.0; len];
    let mut left = vec![0.0; len];
    let gd = gamma(d);
    for k in 0..len.saturating_sub(1) {
        let a = k as f64 * dt;
        let (m0, m1) = if k == 0 {
            (dt.powf(d) / (d * gd), dt.powf(d) / ((d + 1.0) * gd))
        } else {
            let dens = |s: f64| s.powf(d - 1.0) / gd;
            (gauss8(a, a + dt, dens), gauss8(a, a + dt, |s| (s - a) / dt * dens(s)))
        };
        node[k] += m0 - m1;
        node[k + 1] += m1;
        left[k] = m0 - m1;
    }
    NodeWeights {
        node,
        left,
        tail: f64::INFINITY,
    }
}

/// Left-sided Riemann-Liouville integral `I^d f(t) = ∫ (t-s)^{d-1} f(s) ds / Γ(d)`
/// by product integration on the window of `f`.
pub(crate) fn riemann_liouville(f: &SampledKernel, d: f64) -> SampledKernel {
    let w = power_weights(d, f.dt, f.len());
    kernel_weights(f, &w)
}

/// Cumulative trapezoid integral from the window start, using left limits at jumps.
pub(crate) fn cumulative_integral(f: &SampledKernel) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    let mut jumps = f.jumps.iter().peekable();
    for i in 0..f.len() {
        if i > 0 {
            let g = f.start + i as i64;
            let mut left_limit = f.values[i];
            while let Some(j) = jumps.peek() {
                if j.index < g {
                    jumps.next();
                } else {
                    if j.index == g {
                        left_limit -= j.size;
                    }
                    break;
                }
            }
            acc += 0.5 * f.dt * (f.values[i - 1] + left_limit);
        }
        out.push(acc);
    }
    out
}

/// Shifts every jump index by `k` and scales the sizes.
pub(crate) fn shifted_jumps(jumps: &[Jump], k: i64, scale: f64) -> impl Iterator<Item = Jump> + '_ {
    jumps.iter().map(move |j| Jump {
        index: j.index + k,
        size: j.size * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_against_exponential_is_second_order() {
        // (𝟙_[0,1) ∗ e^{-u}du)(t) = 1 - e^{-t} on [0,1), e^{-(t-1)} - e^{-t} after
        for (dt, tol) in [(1.0 / 64.0, 1e-5), (1.0 / 128.0, 2.6e-6)] {
            let f = SampledKernel::indicator(0.0, 1.0, dt, (4.0 / dt) as usize).unwrap();
            let mu = SignedMeasure::exponential(1.0, 1.0).unwrap();
            let r = kernel_measure(&f, &mu);
            let err = (0..r.len())
                .map(|i| {
                    let t = r.time(i);
                    let exact = if t < 1.0 {
                        1.0 - (-t).exp()
                    } else {
                        (-(t - 1.0)).exp() - (-t).exp()
                    };
                    (r.values[i] - exact).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < tol, "dt={dt} err={err}");
        }
    }

    #[test]
    fn atoms_shift_values_and_jumps() {
        let f = SampledKernel::indicator(0.0, 1.0, 0.25, 16).unwrap();
        let mu = SignedMeasure::dirac(1.0, 0.5).unwrap();
        let r = kernel_measure(&f, &mu);
        assert_eq!(&r.values[4..8], &[0.5; 4]);
        assert_eq!(r.values[3], 0.0);
        assert_eq!(r.jumps.len(), 2);
        assert_eq!(r.jumps[0], Jump { index: 4, size: 0.5 });
    }

    #[test]
    fn riemann_liouville_of_exponential() {
        // values from an independent quadrature of (1/Γ(d)) ∫_0^t s^{d-1} e^{-(t-s)} ds
        let dt = 1.0 / 256.0;
        let x = SampledKernel::from_fn(dt, 0, 6 * 256, |t| (-t).exp())
            .unwrap()
            .with_jumps([Jump { index: 0, size: 1.0 }]);
        let r = riemann_liouville(&x, 0.25);
        for (t, want) in [
            (0.5, 0.627_776_777_828_479_8),
            (1.0, 0.515_974_306_733_909_6),
            (2.0, 0.316_301_830_508_188_8),
            (5.0, 0.107_977_613_816_614_55),
        ] {
            let got = r.value_at(t);
            assert!((got - want).abs() < 2e-5, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn cumulative_integral_respects_jumps() {
        let f = SampledKernel::indicator(0.0, 1.0, 0.5, 4).unwrap();
        let c = cumulative_integral(&f);
        assert_eq!(c, vec![0.0, 0.5, 1.0, 1.0]);
    }
}
