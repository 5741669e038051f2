//! Small numerical building blocks shared by the solvers: Gauss-Legendre
//! quadrature, safe regularized incomplete gamma functions, and FFT-based
//! linear convolution of real sequences.

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::gamma::{gamma_lr, gamma_ur};

/// 8-point Gauss-Legendre nodes and weights on [0, 1].
pub(crate) const GL8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        (0.5 - 0.5 * X[3], 0.5 * W[3]),
        (0.5 - 0.5 * X[2], 0.5 * W[2]),
        (0.5 - 0.5 * X[1], 0.5 * W[1]),
        (0.5 - 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[1], 0.5 * W[1]),
        (0.5 + 0.5 * X[2], 0.5 * W[2]),
        (0.5 + 0.5 * X[3], 0.5 * W[3]),
    ]
};

/// Integrates `f` over [a, b] with one 8-point Gauss-Legendre panel.
pub(crate) fn gauss8<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let h = b - a;
    GL8.iter().map(|&(x, w)| w * f(a + h * x)).sum::<f64>() * h
}

/// Regularized lower incomplete gamma P(a, x), defined for every x.
pub(crate) fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x), defined for every x.
pub(crate) fn reg_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

/// P(a, x1) - P(a, x0) for x0 <= x1, choosing the representation that avoids
/// cancellation in the upper tail.
pub(crate) fn reg_gamma_increment(a: f64, x0: f64, x1: f64) -> f64 {
    if x0 >= x1 {
        return 0.0;
    }
    if x0 > a {
        reg_upper_gamma(a, x0) - reg_upper_gamma(a, x1)
    } else {
        reg_lower_gamma(a, x1) - reg_lower_gamma(a, x0)
    }
}

fn fft_size(len: usize) -> usize {
    len.max(1).next_power_of_two()
}

/// Full linear convolution `c[n] = sum_k a[k] b[n-k]`, length `a.len() + b.len() - 1`.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        for (k, &s) in short.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (j, &l) in long.iter().enumerate() {
                out[k + j] += s * l;
            }
        }
        return out;
    }
    let n = fft_size(out_len);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    // Pack both real inputs into one complex transform.
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(a.get(i).copied().unwrap_or(0.0), b.get(i).copied().unwrap_or(0.0)))
        .collect();
    fwd.process(&mut buf);
    let mut prod = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let zk = buf[k];
        let zn = buf[(n - k) % n].conj();
        let fa = (zk + zn) * 0.5;
        let fb = (zk - zn) * Complex64::new(0.0, -0.5);
        prod[k] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    prod.truncate(out_len);
    prod.into_iter().map(|z| z.re * scale).collect()
}

/// In-place forward DFT `X_k = sum_n x_n e^{-2 pi i k n / N}`.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// In-place inverse DFT without normalization.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
}

/// Binomial coefficient as a float, exact for the small arguments used here.
pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}
