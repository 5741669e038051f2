//! Certified search for a vertical strip on which `h(z) = -z - L[η](z)` does
//! not vanish.
//!
//! Certificates use the Lipschitz bound `|h'(z)| ≤ 1 + ∫ v e^{x v} |η|(dv)` for
//! `Re z ≤ x`: a square cell with centre `z_c` and half-diagonal `r` is free of
//! zeros when `|h(z_c)| > L r`. Outside `|z| > |η|([0,∞))` (respectively the
//! exponentially weighted variation on the right) `h` cannot vanish, which
//! makes every scanned region finite. This is a numerical certificate, not an
//! interval-arithmetic proof.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::fmt_f64;
use crate::measure::{h_eval, SignedMeasure};

/// Parameters of the strip scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// `|h|` at or below this value counts as a zero.
    pub zero_tol: f64,
    /// Number of initial cells along the imaginary axis.
    pub points: usize,
    /// Largest left offset tried for the strip edge `a`.
    pub a_cap: f64,
    /// Largest right edge `b` tried.
    pub b_cap: f64,
    /// Maximum number of quadtree refinements per cell.
    pub max_depth: u32,
    /// Budget of `h` evaluations per certification.
    pub max_evaluations: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            zero_tol: 1e-8,
            points: 256,
            a_cap: 0.25,
            b_cap: 1.0,
            max_depth: 36,
            max_evaluations: 4_000_000,
        }
    }
}

/// Extent and cost of the scan that produced a [`StripReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSummary {
    pub y_max: f64,
    pub points: usize,
    pub x_max: f64,
    pub lipschitz: f64,
    pub evaluations: usize,
}

/// A certified zero-free strip `a < Re z ≤ b` (containing the imaginary axis)
/// and the inversion offset `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripReport {
    pub min_abs_h_on_axis: f64,
    pub argmin_y: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub causal: bool,
    pub scan: ScanSummary,
}

impl StripReport {
    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("min_abs_h_on_axis", fmt_f64(self.min_abs_h_on_axis));
        kv("argmin_y", fmt_f64(self.argmin_y));
        kv("a", fmt_f64(self.a));
        kv("b", fmt_f64(self.b));
        kv("c", fmt_f64(self.c));
        kv("causal", self.causal.to_string());
        kv("scan_y_max", fmt_f64(self.scan.y_max));
        kv("scan_points", self.scan.points.to_string());
        kv("scan_x_max", fmt_f64(self.scan.x_max));
        kv("scan_lipschitz", fmt_f64(self.scan.lipschitz));
        kv("scan_evaluations", self.scan.evaluations.to_string());
        s
    }
}

enum Outcome {
    Certified,
    /// A cell around this point could not be separated from zero.
    Suspect {
        z: Complex64,
        abs_h: f64,
    },
}

struct Certifier<'a> {
    eta: &'a SignedMeasure,
    lipschitz: f64,
    threshold: f64,
    max_depth: u32,
    budget: usize,
    evaluations: usize,
}

impl Certifier<'_> {
    fn abs_h(&mut self, z: Complex64) -> Result<f64> {
        self.evaluations += 1;
        if self.evaluations > self.budget {
            return Err(Error::ScanInconclusive { re: z.re, im: z.im });
        }
        Ok(h_eval(self.eta, z)?.norm())
    }

    /// Certifies `|h| > threshold` on `[x0, x1] × [y0, y1]`.
    fn rectangle(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, initial: usize) -> Result<Outcome> {
        let w = x1 - x0;
        let h = y1 - y0;
        let side = w.max(h) / initial.max(1) as f64;
        let nx = (w / side).ceil().max(1.0) as usize;
        let ny = (h / side).ceil().max(1.0) as usize;
        let (dx, dy) = (w / nx as f64, h / ny as f64);
        let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                stack.push((
                    x0 + i as f64 * dx,
                    x0 + (i + 1) as f64 * dx,
                    y0 + j as f64 * dy,
                    y0 + (j + 1) as f64 * dy,
                    0,
                ));
            }
        }
        while let Some((a, b, c, d, depth)) = stack.pop() {
            let z = Complex64::new(0.5 * (a + b), 0.5 * (c + d));
            let r = 0.5 * (b - a).hypot(d - c);
            let v = self.abs_h(z)?;
            if v - self.lipschitz * r > self.threshold {
                continue;
            }
            if v <= self.threshold || depth >= self.max_depth {
                return Ok(Outcome::Suspect { z, abs_h: v });
            }
            let (mx, my) = (z.re, z.im);
            stack.push((a, mx, c, my, depth + 1));
            stack.push((mx, b, c, my, depth + 1));
            stack.push((a, mx, my, d, depth + 1));
            stack.push((mx, b, my, d, depth + 1));
        }
        Ok(Outcome::Certified)
    }

    /// Certifies `|h(iy)| > threshold` for `y ∈ [0, y_max]`, tracking the
    /// smallest sampled value.
    fn axis(&mut self, y_max: f64, initial: usize, min: &mut (f64, f64)) -> Result<Outcome> {
        let n = initial.max(1);
        let step = y_max / n as f64;
        let mut stack: Vec<(f64, f64, u32)> = (0..n)
            .rev()
            .map(|i| (i as f64 * step, (i + 1) as f64 * step, 0))
            .collect();
        while let Some((a, b, depth)) = stack.pop() {
            let y = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            let v = self.abs_h(Complex64::new(0.0, y))?;
            if v < min.0 {
                *min = (v, y);
            }
            if v - self.lipschitz * r > self.threshold {
                continue;
            }
            if v <= self.threshold || depth >= self.max_depth {
                return Ok(Outcome::Suspect {
                    z: Complex64::new(0.0, y),
                    abs_h: v,
                });
            }
            stack.push((y, b, depth + 1));
            stack.push((a, y, depth + 1));
        }
        Ok(Outcome::Certified)
    }
}

/// Scans `h` for a zero-free strip around the imaginary axis and decides
/// whether `h` is zero-free on the whole closed left half-plane.
pub fn find_strip(eta: &SignedMeasure, scan: &ScanConfig) -> Result<StripReport> {
    let tv = eta.total_variation();
    let lipschitz = 1.0 + eta.exp_weighted_abs_bound(0.0, 1);
    let y_max = tv + 1.0;
    let x_max = tv + 1.0;
    let mut cert = Certifier {
        eta,
        lipschitz,
        threshold: scan.zero_tol,
        max_depth: scan.max_depth,
        budget: scan.max_evaluations,
        evaluations: 0,
    };

    // The axis, y = 0 first since that is the common degenerate case.
    let h0 = cert.abs_h(Complex64::new(0.0, 0.0))?;
    if h0 <= scan.zero_tol {
        return Err(Error::AxisZero { y: 0.0, abs_h: h0 });
    }
    let mut min = (h0, 0.0);
    if let Outcome::Suspect { z, abs_h } = cert.axis(y_max, scan.points, &mut min)? {
        return Err(Error::AxisZero { y: z.im, abs_h });
    }
    let m_axis = min.0;

    // Causality: zeros in [-x_max, 0] × [0, y_max]; conjugate symmetry covers y < 0.
    let causal = matches!(cert.rectangle(-x_max, 0.0, 0.0, y_max, 16)?, Outcome::Certified);

    // Left edge: keep |h| above a quarter of the axis minimum.
    cert.threshold = 0.25 * m_axis;
    let passes = |a: f64, cert: &mut Certifier| -> Result<bool> {
        Ok(matches!(cert.rectangle(a, 0.0, 0.0, y_max, 16)?, Outcome::Certified))
    };
    let mut a = -scan.a_cap;
    if !passes(a, &mut cert)? {
        let mut fail = a;
        let mut ok = None;
        for _ in 0..40 {
            a *= 0.5;
            if passes(a, &mut cert)? {
                ok = Some(a);
                break;
            }
            fail = a;
        }
        let mut pass = ok.ok_or(Error::ScanInconclusive { re: a, im: 0.0 })?;
        for _ in 0..12 {
            let mid = 0.5 * (fail + pass);
            if passes(mid, &mut cert)? {
                pass = mid;
            } else {
                fail = mid;
            }
        }
        a = pass;
    }

    // Right edge: needs exponential moments, so stay well inside the Laplace domain.
    let mut b = scan.b_cap.min(0.5 * eta.laplace_bound());
    let mut b_ok = 0.0;
    for _ in 0..10 {
        let right_tv = eta.exp_weighted_abs_bound(b, 0);
        let mut right = Certifier {
            eta,
            lipschitz: 1.0 + eta.exp_weighted_abs_bound(b, 1),
            threshold: scan.zero_tol,
            max_depth: scan.max_depth.min(20),
            budget: scan.max_evaluations,
            evaluations: 0,
        };
        let certified = matches!(
            right.rectangle(0.0, b, 0.0, right_tv + b + 1.0, 16),
            Ok(Outcome::Certified)
        );
        cert.evaluations += right.evaluations;
        if certified {
            b_ok = b;
            break;
        }
        b *= 0.5;
    }

    Ok(StripReport {
        min_abs_h_on_axis: m_axis,
        argmin_y: min.1,
        a,
        b: b_ok,
        c: 0.5 * a,
        causal,
        scan: ScanSummary {
            y_max,
            points: scan.points,
            x_max,
            lipschitz,
            evaluations: cert.evaluations,
        },
    })
}
