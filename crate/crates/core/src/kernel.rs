//! Real functions sampled on a uniform time grid.
//!
//! Samples are the right-continuous representative. Jumps at grid points are
//! tracked explicitly so that quadratures can use the correct one-sided limits.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A jump of size `size` at time `index · dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub index: i64,
    pub size: f64,
}

/// Function values on `t_i = (start + i) · dt`, zero outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    pub dt: f64,
    /// Grid index of the first sample, so `t0 = start · dt`.
    pub start: i64,
    pub values: Vec<f64>,
    /// Weight of `δ_0` when the object represents a measure such as `x0(du)`.
    pub atom_at_zero: f64,
    /// Jumps of the right-continuous representative, sorted by index.
    pub jumps: Vec<Jump>,
}

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    // normalize -0.0 so golden files do not depend on the sign of zero
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

impl SampledKernel {
    pub fn new(dt: f64, start: i64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput("kernel step dt must be positive".into()));
        }
        Ok(Self {
            dt,
            start,
            values,
            atom_at_zero: 0.0,
            jumps: Vec::new(),
        })
    }

    /// Samples `f` on `len` grid points starting at index `start`.
    pub fn from_fn(dt: f64, start: i64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..len).map(|i| f((start + i as i64) as f64 * dt)).collect();
        Self::new(dt, start, values)
    }

    /// `𝟙_{[a, b)}` on `[0, len·dt)`; `a` and `b` are rounded to the grid.
    pub fn indicator(a: f64, b: f64, dt: f64, len: usize) -> Result<Self> {
        let ia = (a / dt).round() as i64;
        let ib = (b / dt).round() as i64;
        let mut k = Self::from_fn(dt, 0, len, |t| {
            let i = (t / dt).round() as i64;
            if i >= ia && i < ib {
                1.0
            } else {
                0.0
            }
        })?;
        k.add_jump(ia, 1.0);
        k.add_jump(ib, -1.0);
        Ok(k)
    }

    pub fn with_jumps(mut self, jumps: impl IntoIterator<Item = Jump>) -> Self {
        for j in jumps {
            self.add_jump(j.index, j.size);
        }
        self
    }

    /// Records a jump, merging with an existing one at the same index.
    pub fn add_jump(&mut self, index: i64, size: f64) {
        if size == 0.0 {
            return;
        }
        match self.jumps.binary_search_by_key(&index, |j| j.index) {
            Ok(p) => {
                self.jumps[p].size += size;
                if self.jumps[p].size == 0.0 {
                    self.jumps.remove(p);
                }
            }
            Err(p) => self.jumps.insert(p, Jump { index, size }),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.start as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.start + i as i64) as f64 * self.dt
    }

    /// One past the last grid index.
    pub fn end_index(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    /// Sample at grid index `g` (zero outside the window).
    pub fn at_index(&self, g: i64) -> f64 {
        let i = g - self.start;
        if i < 0 || i >= self.values.len() as i64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// Value at time `t`: the sample if `t` is on the grid, linear
    /// interpolation otherwise.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = t / self.dt;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            return self.at_index(r as i64);
        }
        let g = x.floor() as i64;
        let w = x - g as f64;
        self.at_index(g) * (1.0 - w) + self.at_index(g + 1) * w
    }

    pub fn l1_norm(&self) -> f64 {
        self.dt * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.dt * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Fraction of the squared L² mass located at `t < 0`.
    pub fn negative_time_l2_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v * v).sum();
        if total == 0.0 {
            return 0.0;
        }
        let neg: f64 = (0..self.len())
            .filter(|&i| self.start + (i as i64) < 0)
            .map(|i| self.values[i] * self.values[i])
            .sum();
        neg / total
    }

    /// Restriction to grid indices `[from, to)` (clamped to the window).
    pub fn restrict_indices(&self, from: i64, to: i64) -> Self {
        let lo = from.max(self.start);
        let hi = to.min(self.end_index()).max(lo);
        let values = (lo..hi).map(|g| self.at_index(g)).collect();
        let jumps = self
            .jumps
            .iter()
            .filter(|j| j.index > lo && j.index < hi || j.index == lo && lo == from)
            .copied()
            .collect();
        Self {
            dt: self.dt,
            start: lo,
            values,
            atom_at_zero: self.atom_at_zero,
            jumps,
        }
    }

    /// Restriction to `[t_min, t_max)`.
    pub fn restrict(&self, t_min: f64, t_max: f64) -> Self {
        let from = (t_min / self.dt).round() as i64;
        let to = (t_max / self.dt).round() as i64;
        self.restrict_indices(from, to)
    }

    /// Grid L² distance over the union of both windows. Steps must match.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        let lo = self.start.min(other.start);
        let hi = self.end_index().max(other.end_index());
        let s: f64 = (lo..hi)
            .map(|g| {
                let d = self.at_index(g) - other.at_index(g);
                d * d
            })
            .sum();
        Ok((self.dt * s).sqrt())
    }

    /// Largest absolute difference over the union of both windows.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        let lo = self.start.min(other.start);
        let hi = self.end_index().max(other.end_index());
        Ok((lo..hi).fold(0.0, |m, g| m.max((self.at_index(g) - other.at_index(g)).abs())))
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if ((self.dt - other.dt) / self.dt).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "kernels live on different grids (dt {} vs {})",
                self.dt, other.dt
            )));
        }
        Ok(())
    }

    /// Serializes as `t,value` CSV with an optional `# atom_at_zero = w` line.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 48);
        if self.atom_at_zero != 0.0 {
            let _ = writeln!(s, "# atom_at_zero = {}", fmt_f64(self.atom_at_zero));
        }
        s.push_str("t,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", fmt_f64(self.time(i)), fmt_f64(*v));
        }
        s
    }

    /// Parses the CSV format written by [`SampledKernel::to_csv`]. The step is
    /// inferred from the first two rows; jumps are not recorded in the format
    /// and are re-detected as steps larger than `jump_threshold`, if given.
    pub fn from_csv(text: &str, jump_threshold: Option<f64>) -> Result<Self> {
        let mut atom = 0.0;
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    if k.trim() == "atom_at_zero" {
                        atom = parse_num(v)?;
                    }
                }
                continue;
            }
            if line.starts_with("t,") {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidInput(format!("malformed kernel row: {line}")))?;
            ts.push(parse_num(t)?);
            vs.push(parse_num(v)?);
        }
        if ts.len() < 2 {
            return Err(Error::InvalidInput("kernel CSV needs at least two rows".into()));
        }
        let dt = ts[1] - ts[0];
        let start = (ts[0] / dt).round() as i64;
        let mut k = Self::new(dt, start, vs)?;
        k.atom_at_zero = atom;
        if let Some(th) = jump_threshold {
            let mut prev = 0.0;
            for i in 0..k.len() {
                let d = k.values[i] - prev;
                if d.abs() > th {
                    k.add_jump(k.start + i as i64, d);
                }
                prev = k.values[i];
            }
        }
        Ok(k)
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidInput(format!("bad number {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut k = SampledKernel::from_fn(0.125, -3, 20, |t| (-t * t).exp() / 3.0).unwrap();
        k.atom_at_zero = 1.0;
        let text = k.to_csv();
        assert!(text.starts_with("# atom_at_zero = 1.0000000000000000e0\nt,value\n"));
        let back = SampledKernel::from_csv(&text, None).unwrap();
        assert_eq!(back.values, k.values);
        assert_eq!(back.start, -3);
        assert_eq!(back.dt, 0.125);
        assert_eq!(back.atom_at_zero, 1.0);
    }

    #[test]
    fn indicator_has_two_jumps() {
        let k = SampledKernel::indicator(0.0, 1.0, 0.25, 8).unwrap();
        assert_eq!(k.values, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            k.jumps,
            vec![Jump { index: 0, size: 1.0 }, Jump { index: 4, size: -1.0 }]
        );
    }

    #[test]
    fn distances_cover_union_of_windows() {
        let a = SampledKernel::new(1.0, 0, vec![1.0, 1.0]).unwrap();
        let b = SampledKernel::new(1.0, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(a.l2_distance(&b).unwrap(), 2f64.sqrt());
        assert_eq!(a.sup_distance(&b).unwrap(), 1.0);
    }

    #[test]
    fn negative_fraction_and_restriction() {
        let k = SampledKernel::new(1.0, -2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(k.negative_time_l2_fraction(), 0.5);
        let r = k.restrict(0.0, 10.0);
        assert_eq!(r.start, 0);
        assert_eq!(r.values.len(), 2);
    }
}
