//! Finite signed measures on `[0, ∞)` stored in decomposed form: atoms, shifted
//! gamma densities and one piecewise-linear grid density.
//!
//! Conventions:
//! * A gamma term `(c, β, γ, s)` has density `c (u-s)^{β-1} e^{-γ(u-s)} / Γ(β)` on `u > s`.
//!   Its Laplace transform is `c e^{zs} (γ - z)^{-β}` (principal branch).
//! * A grid density is linear between its nodes `start + k·dt` and zero outside them.
//! * `laplace(z) = ∫ e^{zu} μ(du)`.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numerics::{binomial, convolve, gauss8, reg_gamma_increment, reg_upper_gamma};

/// A point mass `weight · δ_location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Shifted gamma density `c (u-s)^{β-1} e^{-γ(u-s)} / Γ(β)`, `u > s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTerm {
    pub coefficient: f64,
    pub shape: f64,
    pub rate: f64,
    pub shift: f64,
}

/// Density sampled at `start + k·dt`, linearly interpolated, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub dt: f64,
    pub start: f64,
    pub values: Vec<f64>,
}

/// Settings for convolutions that cannot be carried out in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolveConfig {
    /// Step of the grid on which non-closed-form products are realized.
    pub dt: f64,
    /// Largest time represented on that grid.
    pub horizon: f64,
    /// Admissible mass lost beyond the horizon, relative to the product of total variations.
    pub tail_tol: f64,
}

impl Default for ConvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 1024.0,
            horizon: 64.0,
            tail_tol: 1e-10,
        }
    }
}

/// Hat-function discretization of a measure on the nodes `k·dt`.
///
/// `node[k]` is the mass assigned to node `k`. `left[k]` is the part of the
/// mass of cell `[k dt, (k+1) dt)` assigned to its left node; it is needed to
/// correct quadratures against functions that jump at grid points.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NodeWeights {
    pub node: Vec<f64>,
    pub left: Vec<f64>,
    /// Total variation of the part of the measure beyond the last node.
    pub tail: f64,
}

impl GammaTerm {
    pub fn new(coefficient: f64, shape: f64, rate: f64) -> Self {
        Self {
            coefficient,
            shape,
            rate,
            shift: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.coefficient.is_finite()
            && self.shape.is_finite()
            && self.shape > 0.0
            && self.rate.is_finite()
            && self.rate > 0.0
            && self.shift.is_finite()
            && self.shift >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "gamma term needs finite coefficient, shape > 0, rate > 0, shift >= 0: {self:?}"
            )))
        }
    }

    /// Total signed mass `c γ^{-β}`.
    pub fn mass(&self) -> f64 {
        self.coefficient * self.rate.powf(-self.shape)
    }

    /// Density value; for `β < 1` the density is infinite at the shift itself.
    pub fn density(&self, u: f64) -> f64 {
        let x = u - self.shift;
        if x < 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Equal) => self.coefficient,
                Some(std::cmp::Ordering::Greater) => 0.0,
                _ => f64::INFINITY * self.coefficient.signum(),
            };
        }
        self.coefficient * x.powf(self.shape - 1.0) * (-self.rate * x).exp() / gamma(self.shape)
    }

    /// `∫ x^j` against the unshifted unit-coefficient density over `[x0, x1]`.
    fn raw_partial(&self, j: u32, x0: f64, x1: f64) -> f64 {
        let rising: f64 = (0..j).map(|i| self.shape + f64::from(i)).product();
        rising
            * self.rate.powf(-self.shape - f64::from(j))
            * reg_gamma_increment(self.shape + f64::from(j), self.rate * x0, self.rate * x1)
    }

    /// `∫_a^b u^n` times this density.
    fn partial_moment(&self, n: u32, a: f64, b: f64) -> f64 {
        let x0 = (a - self.shift).max(0.0);
        let x1 = (b - self.shift).max(0.0);
        if x1 <= x0 {
            return 0.0;
        }
        let s = self.shift;
        let sum: f64 = (0..=n)
            .map(|j| binomial(n, j) * s.powi((n - j) as i32) * self.raw_partial(j, x0, x1))
            .sum();
        self.coefficient * sum
    }

    fn laplace(&self, z: Complex64) -> Complex64 {
        let base = Complex64::new(self.rate, 0.0) - z;
        self.coefficient * (z * self.shift).exp() * base.powf(-self.shape)
    }

    /// `(∫_a^b ρ, ∫_a^b (u-a)/(b-a) ρ)`.
    fn cell_moments(&self, a: f64, b: f64) -> (f64, f64) {
        if b <= self.shift {
            return (0.0, 0.0);
        }
        let h = b - a;
        let x0 = a - self.shift;
        if x0 < h || self.rate * h > 4.0 {
            // Near the (possibly singular) start use exact incomplete gamma
            // differences; cancellation is harmless there.
            let m0 = self.partial_moment(0, a, b);
            let mu = self.partial_moment(1, a, b);
            (m0, (mu - a * m0) / h)
        } else {
            let m0 = gauss8(a, b, |u| self.density(u));
            let m1 = gauss8(a, b, |u| (u - a) / h * self.density(u));
            (m0, m1)
        }
    }

    /// Time beyond which the remaining mass is below `1e-17` of the total.
    fn effective_end(&self) -> f64 {
        self.shift + (2.0 * self.shape + 45.0) / self.rate
    }
}

impl GridDensity {
    pub fn new(dt: f64, start: f64, values: Vec<f64>) -> Result<Self> {
        let g = Self { dt, start, values };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput("grid density step must be positive".into()));
        }
        if !(self.start.is_finite() && self.start >= 0.0) {
            return Err(Error::InvalidInput("grid density must start at t >= 0".into()));
        }
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "grid density needs at least one finite value".into(),
            ));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + (self.values.len() - 1) as f64 * self.dt
    }

    pub fn node(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dt
    }

    /// Linear interpolation between nodes; zero outside `[start, end]`.
    pub fn value(&self, u: f64) -> f64 {
        if u < self.start || u > self.end() {
            return 0.0;
        }
        let x = (u - self.start) / self.dt;
        let k = (x.floor() as usize).min(self.values.len() - 1);
        if k + 1 >= self.values.len() {
            return self.values[k];
        }
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.values
            .windows(2)
            .enumerate()
            .map(move |(k, w)| (self.node(k), self.node(k + 1), w[0], w[1]))
    }

    fn moment(&self, n: u32, absolute: bool) -> f64 {
        let pow = |u: f64| if n == 0 { 1.0 } else { u.powi(n as i32) };
        let mut total = 0.0;
        for (a, b, p, q) in self.cells() {
            let lin = |u: f64| p + (q - p) * (u - a) / (b - a);
            if absolute && p * q < 0.0 {
                let r = a + (b - a) * p / (p - q);
                total += gauss8(a, r, |u| pow(u) * lin(u)).abs();
                total += gauss8(r, b, |u| pow(u) * lin(u)).abs();
            } else {
                let v = gauss8(a, b, |u| pow(u) * lin(u));
                total += if absolute { v.abs() } else { v };
            }
        }
        total
    }

    fn laplace(&self, z: Complex64) -> Complex64 {
        let h = self.dt;
        let zh = z * h;
        let (e1, e2) = if zh.norm() < 1e-3 {
            (
                h * (1.0 + zh / 2.0 + zh * zh / 6.0 + zh * zh * zh / 24.0 + zh.powi(4) / 120.0),
                h * (0.5 + zh / 3.0 + zh * zh / 8.0 + zh * zh * zh / 30.0 + zh.powi(4) / 144.0),
            )
        } else {
            let ez = zh.exp();
            ((ez - 1.0) / z, (ez * (zh - 1.0) + 1.0) / (z * z * h))
        };
        let step = zh.exp();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut phase = Complex64::new(0.0, 0.0);
        for (k, w) in self.values.windows(2).enumerate() {
            if k % 256 == 0 {
                phase = (z * self.node(k)).exp();
            }
            acc += phase * (w[0] * e1 + (w[1] - w[0]) * e2);
            phase *= step;
        }
        acc
    }

    /// Exact `(∫_a^b ρ, ∫_a^b (u-a)/(b-a) ρ)` for the piecewise-linear density.
    fn cell_moments(&self, a: f64, b: f64) -> (f64, f64) {
        let lo = a.max(self.start);
        let hi = b.min(self.end());
        if hi <= lo {
            return (0.0, 0.0);
        }
        let h = b - a;
        let first = ((lo - self.start) / self.dt).floor().max(0.0) as usize;
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut k = first;
        while k + 1 < self.values.len() {
            let p = self.node(k).max(lo);
            let q = self.node(k + 1).min(hi);
            if p >= hi {
                break;
            }
            if q > p {
                // Simpson is exact for the quadratic integrands here.
                let mid = 0.5 * (p + q);
                let f = |u: f64| self.value(u);
                let s0 = (q - p) / 6.0 * (f(p) + 4.0 * f(mid) + f(q));
                let g = |u: f64| (u - a) / h * self.value(u);
                let s1 = (q - p) / 6.0 * (g(p) + 4.0 * g(mid) + g(q));
                m0 += s0;
                m1 += s1;
            }
            k += 1;
        }
        (m0, m1)
    }
}

/// Finite signed measure on `[0, ∞)`; immutable after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMeasure {
    atoms: Vec<Atom>,
    gamma_terms: Vec<GammaTerm>,
    grid: Option<GridDensity>,
}

impl SignedMeasure {
    /// The zero measure.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a measure from components. Atoms must sit at distinct locations.
    pub fn new(atoms: Vec<Atom>, gamma_terms: Vec<GammaTerm>, grid: Option<GridDensity>) -> Result<Self> {
        for a in &atoms {
            if !(a.location.is_finite() && a.location >= 0.0 && a.weight.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "atom needs finite location >= 0 and finite weight: {a:?}"
                )));
            }
        }
        let mut locs: Vec<f64> = atoms.iter().map(|a| a.location).collect();
        locs.sort_by(f64::total_cmp);
        if locs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(
                "duplicate atom location; combine the weights into one atom".into(),
            ));
        }
        for g in &gamma_terms {
            g.validate()?;
        }
        if let Some(g) = &grid {
            g.validate()?;
        }
        let mut m = Self {
            atoms,
            gamma_terms,
            grid,
        };
        m.atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(m)
    }

    pub fn dirac(location: f64, weight: f64) -> Result<Self> {
        Self::new(vec![Atom { location, weight }], vec![], None)
    }

    /// `c u^{β-1} e^{-γu} / Γ(β) du`.
    pub fn gamma(coefficient: f64, shape: f64, rate: f64) -> Result<Self> {
        Self::new(vec![], vec![GammaTerm::new(coefficient, shape, rate)], None)
    }

    /// `α e^{-βu} du`.
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        Self::gamma(alpha, 1.0, beta)
    }

    pub fn from_grid(dt: f64, start: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![], vec![], Some(GridDensity::new(dt, start, values)?))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn gamma_terms(&self) -> &[GammaTerm] {
        &self.gamma_terms
    }

    pub fn grid_density(&self) -> Option<&GridDensity> {
        self.grid.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.weight == 0.0)
            && self.gamma_terms.iter().all(|g| g.coefficient == 0.0)
            && self.grid.as_ref().is_none_or(|g| g.values.iter().all(|&v| v == 0.0))
    }

    /// True when the measure has no atoms with nonzero weight.
    pub fn is_absolutely_continuous(&self) -> bool {
        self.atoms.iter().all(|a| a.weight == 0.0)
    }

    /// Level-model measures must not charge the origin.
    pub fn charges_origin(&self) -> bool {
        self.atom_weight_at(0.0) != 0.0
    }

    /// Weight of the atom exactly at `location` (0 if none).
    pub fn atom_weight_at(&self, location: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.location == location)
            .map(|a| a.weight)
            .sum()
    }

    /// Multiplies every component by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut m = self.clone();
        m.atoms.iter_mut().for_each(|a| a.weight *= k);
        m.gamma_terms.iter_mut().for_each(|g| g.coefficient *= k);
        if let Some(g) = &mut m.grid {
            g.values.iter_mut().for_each(|v| *v *= k);
        }
        m
    }

    /// Sum of two measures. Grid densities on different grids are resampled
    /// onto the finer step.
    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut gamma_terms = self.gamma_terms.clone();
        gamma_terms.extend_from_slice(&other.gamma_terms);
        let grids: Vec<GridDensity> = self.grid.iter().chain(other.grid.iter()).cloned().collect();
        let dt = grids.iter().map(|g| g.dt).fold(f64::INFINITY, f64::min);
        Self {
            atoms: merge_atoms(atoms),
            gamma_terms: merge_gamma(gamma_terms),
            grid: combine_grids(grids, dt),
        }
    }

    /// Signed total mass `μ([0, ∞))`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>()
            + self.gamma_terms.iter().map(GammaTerm::mass).sum::<f64>()
            + self.grid.as_ref().map_or(0.0, |g| g.moment(0, false))
    }

    /// `|μ|([0, ∞))`.
    pub fn total_variation(&self) -> f64 {
        self.abs_moment(0)
    }

    /// `∫ v^n μ(dv)` or, with `absolute`, `∫ v^n |μ|(dv)`.
    pub fn moment(&self, n: u32, absolute: bool) -> Result<f64> {
        let v = if absolute {
            self.abs_moment(n)
        } else {
            self.signed_moment(n)
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::MomentNotFinite)
        }
    }

    fn signed_moment(&self, n: u32) -> f64 {
        let pow = |u: f64| if n == 0 { 1.0 } else { u.powi(n as i32) };
        self.atoms.iter().map(|a| a.weight * pow(a.location)).sum::<f64>()
            + self
                .gamma_terms
                .iter()
                .map(|g| g.partial_moment(n, 0.0, f64::INFINITY))
                .sum::<f64>()
            + self.grid.as_ref().map_or(0.0, |g| g.moment(n, false))
    }

    fn abs_moment(&self, n: u32) -> f64 {
        let pow = |u: f64| if n == 0 { 1.0 } else { u.powi(n as i32) };
        let atoms: f64 = self.atoms.iter().map(|a| a.weight.abs() * pow(a.location)).sum();
        atoms + self.abs_density_moment(n)
    }

    /// `∫ u^n |ρ(u)| du` for the absolutely continuous part `ρ`.
    fn abs_density_moment(&self, n: u32) -> f64 {
        let all_pos = self.gamma_terms.iter().all(|g| g.coefficient >= 0.0);
        let all_neg = self.gamma_terms.iter().all(|g| g.coefficient <= 0.0);
        match (&self.grid, all_pos || all_neg) {
            (None, true) => self
                .gamma_terms
                .iter()
                .map(|g| g.partial_moment(n, 0.0, f64::INFINITY))
                .sum::<f64>()
                .abs(),
            (Some(g), _) if self.gamma_terms.is_empty() => g.moment(n, true),
            _ => self.abs_density_moment_by_segments(n),
        }
    }

    /// Mixed-sign densities: locate sign changes, then integrate exactly
    /// between consecutive changes.
    fn abs_density_moment_by_segments(&self, n: u32) -> f64 {
        let mut breaks: Vec<f64> = vec![0.0];
        let mut end: f64 = 0.0;
        let mut hmax = f64::INFINITY;
        for g in &self.gamma_terms {
            breaks.push(g.shift);
            end = end.max(g.effective_end());
            hmax = hmax.min(0.05 / g.rate);
            // geometric refinement towards a possibly singular start
            let span = g.effective_end() - g.shift;
            for k in 1..=40 {
                breaks.push(g.shift + span * 0.5f64.powi(k));
            }
        }
        if let Some(gd) = &self.grid {
            for k in 0..gd.values.len() {
                breaks.push(gd.node(k));
            }
            end = end.max(gd.end());
        }
        breaks.push(end);
        breaks.retain(|b| *b <= end);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let pow = |u: f64| if n == 0 { 1.0 } else { u.powi(n as i32) };
        let exact = |a: f64, b: f64| -> f64 {
            let gpart: f64 = self.gamma_terms.iter().map(|g| g.partial_moment(n, a, b)).sum();
            let grid_part = self
                .grid
                .as_ref()
                .map_or(0.0, |gd| gauss8(a, b, |u| pow(u) * gd.value(u)));
            gpart + grid_part
        };
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (p, q) = (w[0], w[1]);
            let pieces = ((q - p) / hmax).ceil().clamp(1.0, 1e6) as usize;
            for i in 0..pieces {
                let a = p + (q - p) * i as f64 / pieces as f64;
                let b = p + (q - p) * (i + 1) as f64 / pieces as f64;
                let mut cuts = vec![a];
                let samples: Vec<(f64, f64)> = (0..8)
                    .map(|j| {
                        let u = a + (b - a) * (j as f64 + 0.5) / 8.0;
                        (u, self.density(u))
                    })
                    .collect();
                for s in samples.windows(2) {
                    if s[0].1 * s[1].1 < 0.0 {
                        cuts.push(self.bisect_density_root(s[0].0, s[1].0));
                    }
                }
                cuts.push(b);
                total += cuts.windows(2).map(|c| exact(c[0], c[1]).abs()).sum::<f64>();
            }
        }
        total
    }

    fn bisect_density_root(&self, mut lo: f64, mut hi: f64) -> f64 {
        let flo = self.density(lo);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.density(mid) * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Value of the absolutely continuous part at `u`.
    pub fn density(&self, u: f64) -> f64 {
        self.gamma_terms.iter().map(|g| g.density(u)).sum::<f64>() + self.grid.as_ref().map_or(0.0, |g| g.value(u))
    }

    /// Supremum of admissible `Re z` for the Laplace transform.
    pub fn laplace_bound(&self) -> f64 {
        self.gamma_terms
            .iter()
            .filter(|g| g.coefficient != 0.0)
            .map(|g| g.rate)
            .fold(f64::INFINITY, f64::min)
    }

    /// `L[μ](z) = ∫ e^{zu} μ(du)`.
    pub fn laplace(&self, z: Complex64) -> Result<Complex64> {
        let bound = self.laplace_bound();
        if !(z.re < bound) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::OutsideLaplaceDomain { re: z.re, bound });
        }
        Ok(self.laplace_unchecked(z))
    }

    pub(crate) fn laplace_unchecked(&self, z: Complex64) -> Complex64 {
        let mut acc: Complex64 = self.atoms.iter().map(|a| a.weight * (z * a.location).exp()).sum();
        acc += self.gamma_terms.iter().map(|g| g.laplace(z)).sum::<Complex64>();
        if let Some(g) = &self.grid {
            acc += g.laplace(z);
        }
        acc
    }

    /// Upper bound on `∫ e^{bv} v^n |μ|(dv)` for `n ∈ {0, 1}` and `b` below the Laplace bound.
    pub(crate) fn exp_weighted_abs_bound(&self, b: f64, n: u32) -> f64 {
        let pow = |u: f64| if n == 0 { 1.0 } else { u };
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.weight.abs() * pow(a.location) * (b * a.location).exp())
            .sum();
        let gam: f64 = self
            .gamma_terms
            .iter()
            .map(|g| {
                let r = g.rate - b;
                let base = g.coefficient.abs() * (b * g.shift).exp() * r.powf(-g.shape);
                if n == 0 {
                    base
                } else {
                    base * (g.shape / r + g.shift)
                }
            })
            .sum();
        let grid = self.grid.as_ref().map_or(0.0, |g| {
            let margin = (b.abs() * g.dt).exp();
            g.values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let u = g.node(k);
                    v.abs() * pow(u + g.dt) * (b * u).exp()
                })
                .sum::<f64>()
                * g.dt
                * margin
        });
        atoms + gam + grid
    }

    /// Time after which `|μ|` carries negligible mass.
    pub fn effective_support_end(&self) -> f64 {
        let a = self
            .atoms
            .iter()
            .filter(|a| a.weight != 0.0)
            .map(|a| a.location)
            .fold(0.0, f64::max);
        let g = self
            .gamma_terms
            .iter()
            .filter(|g| g.coefficient != 0.0)
            .map(GammaTerm::effective_end)
            .fold(0.0, f64::max);
        let d = self.grid.as_ref().map_or(0.0, GridDensity::end);
        a.max(g).max(d)
    }

    /// Smallest `t` such that `|μ|((t, ∞))` is at most `tol` (approximately, for densities).
    pub fn support_end_within(&self, tol: f64) -> f64 {
        let a = self
            .atoms
            .iter()
            .filter(|a| a.weight != 0.0)
            .map(|a| a.location)
            .fold(0.0, f64::max);
        let terms = self.gamma_terms.iter().filter(|g| g.coefficient != 0.0).count().max(1);
        let g = self
            .gamma_terms
            .iter()
            .filter(|g| g.coefficient != 0.0)
            .map(|g| {
                let target = tol / (terms as f64 * g.coefficient.abs() * g.rate.powf(-g.shape));
                if target >= 1.0 {
                    return g.shift;
                }
                // bisection on the upper tail Q(β, γx) = target
                let (mut lo, mut hi) = (0.0, g.effective_end() - g.shift);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if reg_upper_gamma(g.shape, g.rate * mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                g.shift + hi
            })
            .fold(0.0, f64::max);
        let d = self.grid.as_ref().map_or(0.0, GridDensity::end);
        a.max(g).max(d)
    }

    /// Hat-function node weights on `k·dt`, `k < len`. Off-grid atoms are
    /// split linearly between their neighbouring nodes.
    pub(crate) fn node_weights(&self, dt: f64, len: usize) -> NodeWeights {
        let mut node = vec![0.0; len];
        let mut left = vec![0.0; len];
        let mut tail = 0.0;
        let last = (len.saturating_sub(1)) as f64 * dt;
        for a in &self.atoms {
            let x = a.location / dt;
            let k = x.round();
            if (x - k).abs() < 1e-9 {
                let k = k as usize;
                if k < len {
                    node[k] += a.weight;
                } else {
                    tail += a.weight.abs();
                }
            } else {
                let k = x.floor() as usize;
                let w = x - k as f64;
                if k + 1 < len {
                    node[k] += a.weight * (1.0 - w);
                    node[k + 1] += a.weight * w;
                } else {
                    tail += a.weight.abs();
                }
            }
        }
        let mut add_cells = |cell: &dyn Fn(f64, f64) -> (f64, f64), first: usize, stop: usize| {
            for k in first..stop.min(len.saturating_sub(1)) {
                let a = k as f64 * dt;
                let (m0, m1) = cell(a, a + dt);
                node[k] += m0 - m1;
                node[k + 1] += m1;
                left[k] += m0 - m1;
            }
        };
        for g in &self.gamma_terms {
            let first = (g.shift / dt).floor() as usize;
            let stop = ((g.effective_end() / dt).ceil() as usize).saturating_add(1);
            add_cells(&|a, b| g.cell_moments(a, b), first, stop);
        }
        if let Some(gd) = &self.grid {
            let first = (gd.start / dt).floor() as usize;
            let stop = ((gd.end() / dt).ceil() as usize).saturating_add(1);
            add_cells(&|a, b| gd.cell_moments(a, b), first, stop);
        }
        for g in &self.gamma_terms {
            if g.coefficient != 0.0 {
                tail += g.partial_moment(0, last, f64::INFINITY).abs();
            }
        }
        if let Some(gd) = &self.grid {
            if gd.end() > last {
                tail += gd.cell_moments(last, gd.end()).0.abs();
            }
        }
        NodeWeights { node, left, tail }
    }

    /// `μ ∗ ν`. Closed forms are used for atom/atom, atom/density and
    /// equal-rate gamma/gamma products; everything else is realized as a grid
    /// density with step `cfg.dt` on `[0, cfg.horizon]`.
    pub fn convolve(&self, other: &Self, cfg: &ConvolveConfig) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut gammas = Vec::new();
        let mut grids = Vec::new();
        for a in &self.atoms {
            for b in &other.atoms {
                atoms.push(Atom {
                    location: a.location + b.location,
                    weight: a.weight * b.weight,
                });
            }
        }
        let shift_terms = |atoms: &[Atom], terms: &[GammaTerm], out: &mut Vec<GammaTerm>| {
            for a in atoms {
                for g in terms {
                    out.push(GammaTerm {
                        coefficient: a.weight * g.coefficient,
                        shift: g.shift + a.location,
                        ..*g
                    });
                }
            }
        };
        shift_terms(&self.atoms, &other.gamma_terms, &mut gammas);
        shift_terms(&other.atoms, &self.gamma_terms, &mut gammas);
        for (atoms_side, grid_side) in [(&self.atoms, &other.grid), (&other.atoms, &self.grid)] {
            if let Some(g) = grid_side {
                for a in atoms_side.iter() {
                    grids.push(GridDensity {
                        dt: g.dt,
                        start: g.start + a.location,
                        values: g.values.iter().map(|v| v * a.weight).collect(),
                    });
                }
            }
        }

        let len = (cfg.horizon / cfg.dt).round() as usize + 1;
        let mut numeric = vec![0.0; len];
        let mut lost = 0.0;
        let budget = cfg.tail_tol * (self.total_variation() * other.total_variation()).max(1e-300);
        let mut numeric_used = false;
        let mut numeric_pair = |x: &Self, y: &Self, numeric: &mut Vec<f64>| {
            numeric_used = true;
            let wx = x.node_weights(cfg.dt, len);
            let wy = y.node_weights(cfg.dt, len);
            let full = convolve(&wx.node, &wy.node);
            for (k, v) in full.iter().enumerate() {
                if k < len {
                    numeric[k] += v / cfg.dt;
                } else {
                    lost += v.abs();
                }
            }
            lost += wx.tail * y.total_variation() + wy.tail * x.total_variation();
        };
        for g in &self.gamma_terms {
            for h in &other.gamma_terms {
                if g.rate == h.rate {
                    gammas.push(GammaTerm {
                        coefficient: g.coefficient * h.coefficient,
                        shape: g.shape + h.shape,
                        rate: g.rate,
                        shift: g.shift + h.shift,
                    });
                } else {
                    numeric_pair(&only_gamma(*g), &only_gamma(*h), &mut numeric);
                }
            }
        }
        if let Some(gd) = &self.grid {
            let x = only_grid(gd.clone());
            for h in &other.gamma_terms {
                numeric_pair(&x, &only_gamma(*h), &mut numeric);
            }
            if let Some(hd) = &other.grid {
                numeric_pair(&x, &only_grid(hd.clone()), &mut numeric);
            }
        }
        if let Some(hd) = &other.grid {
            let y = only_grid(hd.clone());
            for g in &self.gamma_terms {
                numeric_pair(&only_gamma(*g), &y, &mut numeric);
            }
        }
        if lost > budget {
            return Err(Error::GridOverflow {
                support: self.effective_support_end() + other.effective_support_end(),
                horizon: cfg.horizon,
            });
        }
        if numeric_used {
            grids.push(GridDensity {
                dt: cfg.dt,
                start: 0.0,
                values: numeric,
            });
        }
        let dt = if numeric_used {
            cfg.dt
        } else {
            grids.iter().map(|g| g.dt).fold(f64::INFINITY, f64::min)
        };
        Ok(Self {
            atoms: merge_atoms(atoms),
            gamma_terms: merge_gamma(gammas),
            grid: combine_grids(grids, dt),
        })
    }
}

fn only_gamma(g: GammaTerm) -> SignedMeasure {
    SignedMeasure {
        gamma_terms: vec![g],
        ..SignedMeasure::default()
    }
}

fn only_grid(g: GridDensity) -> SignedMeasure {
    SignedMeasure {
        grid: Some(g),
        ..SignedMeasure::default()
    }
}

fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if (last.location - a.location).abs() <= 1e-12 * (1.0 + a.location) => {
                last.weight += a.weight;
            }
            _ => out.push(a),
        }
    }
    out.retain(|a| a.weight != 0.0);
    out
}

fn merge_gamma(terms: Vec<GammaTerm>) -> Vec<GammaTerm> {
    let mut out: Vec<GammaTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        if let Some(o) = out
            .iter_mut()
            .find(|o| o.shape == t.shape && o.rate == t.rate && o.shift == t.shift)
        {
            o.coefficient += t.coefficient;
        } else {
            out.push(t);
        }
    }
    out.retain(|g| g.coefficient != 0.0);
    out
}

/// Sums grid densities. A single grid is kept as is; several are resampled
/// onto a common grid with step `dt` starting at the earliest start.
fn combine_grids(grids: Vec<GridDensity>, dt: f64) -> Option<GridDensity> {
    match grids.len() {
        0 => None,
        1 => grids.into_iter().next(),
        _ => {
            let start = grids.iter().map(|g| g.start).fold(f64::INFINITY, f64::min);
            let end = grids.iter().map(GridDensity::end).fold(0.0, f64::max);
            let n = ((end - start) / dt).round() as usize + 1;
            let values = (0..n)
                .map(|k| {
                    let u = start + k as f64 * dt;
                    grids.iter().map(|g| g.value(u)).sum()
                })
                .collect();
            Some(GridDensity { dt, start, values })
        }
    }
}

/// The characteristic function `h(z) = -z - L[η](z)` of a delay measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFunction {
    pub measure: SignedMeasure,
}

impl CharacteristicFunction {
    pub fn new(measure: SignedMeasure) -> Self {
        Self { measure }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        h_eval(&self.measure, z)
    }
}

/// `h(z) = -z - L[η](z)`.
pub fn h_eval(eta: &SignedMeasure, z: Complex64) -> Result<Complex64> {
    Ok(-z - eta.laplace(z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn total_variation_examples() {
        let m = SignedMeasure::new(
            vec![Atom {
                location: 0.0,
                weight: -1.5,
            }],
            vec![GammaTerm::new(0.25, 1.0, 1.5)],
            None,
        )
        .unwrap();
        assert_relative_eq!(m.total_variation(), 1.5 + 0.25 / 1.5, epsilon = 1e-14);
        assert_eq!(SignedMeasure::dirac(1.0, 0.5).unwrap().total_variation(), 0.5);
        let two = SignedMeasure::new(
            vec![
                Atom {
                    location: 0.0,
                    weight: 1.0,
                },
                Atom {
                    location: 2.0,
                    weight: -1.0,
                },
            ],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(two.total_variation(), 2.0);
    }

    #[test]
    fn duplicate_atoms_are_rejected() {
        let r = SignedMeasure::new(
            vec![
                Atom {
                    location: 0.0,
                    weight: 1.0,
                },
                Atom {
                    location: 0.0,
                    weight: -1.0,
                },
            ],
            vec![],
            None,
        );
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mixed_sign_densities_use_true_variation() {
        // e^{-2u} - e^{-u} is negative everywhere: |.| integrates to 1/2.
        let m = SignedMeasure::new(
            vec![],
            vec![GammaTerm::new(1.0, 1.0, 2.0), GammaTerm::new(-1.0, 1.0, 1.0)],
            None,
        )
        .unwrap();
        assert_relative_eq!(m.total_variation(), 0.5, epsilon = 1e-10);
        // e^{-v} - 2 e^{-2v} changes sign at ln 2: variation 2 * (1/2 - 1/4) = 1/2.
        let eta = SignedMeasure::new(
            vec![],
            vec![GammaTerm::new(1.0, 1.0, 1.0), GammaTerm::new(-2.0, 1.0, 2.0)],
            None,
        )
        .unwrap();
        assert_relative_eq!(eta.total_variation(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn moment_examples() {
        assert_eq!(SignedMeasure::dirac(0.0, 1.0).unwrap().moment(2, false).unwrap(), 0.0);
        let m = SignedMeasure::new(
            vec![
                Atom {
                    location: 1.0,
                    weight: 0.5,
                },
                Atom {
                    location: 2.0,
                    weight: 0.5,
                },
            ],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(m.moment(1, false).unwrap(), 1.5);
        // ∫ u · u e^{-3u} du = 2/27 for the density u e^{-3u}.
        let g = SignedMeasure::gamma(1.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(g.moment(1, false).unwrap(), 2.0 / 27.0, epsilon = 1e-14);
    }

    #[test]
    fn laplace_examples() {
        let d = SignedMeasure::dirac(0.0, 1.0).unwrap();
        assert_relative_eq!(d.laplace(c(-0.3, 2.0)).unwrap().re, 1.0, epsilon = 1e-15);
        let phi = SignedMeasure::exponential(0.5, 1.0).unwrap();
        let z = c(-0.2, 0.7);
        let want = 0.5 / (Complex64::new(1.0, 0.0) - z);
        assert!((phi.laplace(z).unwrap() - want).norm() < 1e-14);
        assert!(matches!(
            phi.laplace(c(1.5, 0.0)),
            Err(Error::OutsideLaplaceDomain { .. })
        ));
        let arma = SignedMeasure::new(
            vec![
                Atom {
                    location: 1.0,
                    weight: 0.3,
                },
                Atom {
                    location: 2.0,
                    weight: -0.2,
                },
            ],
            vec![],
            None,
        )
        .unwrap();
        let w = z.exp();
        let want = 0.3 * w - 0.2 * w * w;
        assert!((arma.laplace(z).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn h_examples() {
        let ou = SignedMeasure::dirac(0.0, -1.0).unwrap();
        let z = c(-0.4, 3.0);
        assert!((h_eval(&ou, z).unwrap() - (1.0 - z)).norm() < 1e-14);
        let zero = SignedMeasure::zero();
        assert_eq!(h_eval(&zero, c(0.0, 0.0)).unwrap().norm(), 0.0);
        let g = SignedMeasure::new(
            vec![Atom {
                location: 0.0,
                weight: -2.0,
            }],
            vec![GammaTerm::new(1.0, 0.5, 1.0)],
            None,
        )
        .unwrap();
        assert_relative_eq!(h_eval(&g, c(0.0, 0.0)).unwrap().re, 1.0, epsilon = 1e-14);
        let cf = CharacteristicFunction::new(g.clone());
        assert_eq!(cf.eval(z).unwrap(), h_eval(&g, z).unwrap());
    }

    #[test]
    fn convolution_examples() {
        let cfg = ConvolveConfig::default();
        let d1 = SignedMeasure::dirac(1.0, 1.0).unwrap();
        let d2 = d1.convolve(&d1, &cfg).unwrap();
        assert_eq!(
            d2.atoms(),
            &[Atom {
                location: 2.0,
                weight: 1.0
            }]
        );
        let half = SignedMeasure::dirac(1.0, 0.5).unwrap();
        let mut p = half.clone();
        for _ in 1..4 {
            p = p.convolve(&half, &cfg).unwrap();
        }
        assert_eq!(p.atoms().len(), 1);
        assert_relative_eq!(p.atoms()[0].location, 4.0);
        assert_relative_eq!(p.atoms()[0].weight, 0.0625);
        // α e^{-βu} ∗ α e^{-βu} = α² u e^{-βu}
        let (alpha, beta) = (0.7, 1.3);
        let e = SignedMeasure::exponential(alpha, beta).unwrap();
        let ee = e.convolve(&e, &cfg).unwrap();
        assert_eq!(ee.gamma_terms(), &[GammaTerm::new(alpha * alpha, 2.0, beta)]);
        assert!((ee.density(2.0) - alpha * alpha * 2.0 * (-beta * 2.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn mixed_rate_convolution_on_grid() {
        let cfg = ConvolveConfig::default();
        let a = SignedMeasure::exponential(1.0, 1.0).unwrap();
        let b = SignedMeasure::gamma(0.5, 0.5, 2.0).unwrap();
        let ab = a.convolve(&b, &cfg).unwrap();
        for z in [c(-0.5, 0.0), c(0.0, 1.0), c(-0.2, -3.0)] {
            let lhs = ab.laplace(z).unwrap();
            let rhs = a.laplace(z).unwrap() * b.laplace(z).unwrap();
            assert!((lhs - rhs).norm() < 1e-5, "z={z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn grid_overflow_is_reported() {
        let cfg = ConvolveConfig {
            horizon: 4.0,
            ..ConvolveConfig::default()
        };
        let a = SignedMeasure::exponential(1.0, 0.1).unwrap();
        let b = SignedMeasure::exponential(1.0, 0.2).unwrap();
        assert!(matches!(a.convolve(&b, &cfg), Err(Error::GridOverflow { .. })));
    }

    #[test]
    fn grid_density_laplace_is_exact_for_linear_pieces() {
        // triangle density on [0, 2] peaking at 1
        let m = SignedMeasure::from_grid(1.0, 0.0, vec![0.0, 1.0, 0.0]).unwrap();
        let z = c(-0.3, 0.8);
        // ∫_0^1 u e^{zu} du + ∫_1^2 (2-u) e^{zu} du = ((e^z - 1)/z)^2
        let want = ((z.exp() - 1.0) / z).powi(2);
        assert!((m.laplace(z).unwrap() - want).norm() < 1e-14);
        assert_relative_eq!(m.total_mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn node_weights_preserve_mass_and_first_moment() {
        let m = SignedMeasure::new(
            vec![Atom {
                location: 0.3,
                weight: 2.0,
            }],
            vec![GammaTerm::new(1.0, 0.5, 1.0)],
            None,
        )
        .unwrap();
        let dt = 1.0 / 64.0;
        let w = m.node_weights(dt, 64 * 80);
        let mass: f64 = w.node.iter().sum();
        let first: f64 = w.node.iter().enumerate().map(|(k, v)| k as f64 * dt * v).sum();
        assert_relative_eq!(mass, m.total_mass(), epsilon = 1e-12);
        assert_relative_eq!(first, m.moment(1, false).unwrap(), epsilon = 1e-10);
    }
}
