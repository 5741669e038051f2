//! Run configuration: TOML file, flag overrides and the defaulted echo.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::closed_forms::{carma_delay_measure, ArmaSpec, CarmaSpec};
use crate::error::{Error, Result};
use crate::kernel::SampledKernel;
use crate::measure::{Atom, GammaTerm, GridDensity, SignedMeasure};
use crate::simulation::{JumpLaw, JumpPart, LevyDriver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveX0,
    SolveLevel,
    Simulate,
    Acf,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::SolveX0 => "solve-x0",
            Command::SolveLevel => "solve-level",
            Command::Simulate => "simulate",
            Command::Acf => "acf",
            Command::Verify => "verify",
        })
    }
}

/// Grid density literal; `values_file` holds one real per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLiteral {
    pub dt: f64,
    #[serde(default)]
    pub start: f64,
    pub values_file: PathBuf,
}

/// `atoms = [[loc, w], ...]`, `gamma = [[c, shape, rate], ...]`, optional grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureLiteral {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub gamma: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridLiteral>,
}

/// Level-model `θ`: an indicator `[a, b)` or a kernel CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelLiteral {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicator: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmaLiteral {
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
}

/// The delay measure `η` is given by `atoms`/`gamma`/`grid` or by the
/// `carma = [a1, a2, b0]` shorthand. The level model uses `[model.phi]` and
/// `[model.theta]`, or the `[model.arma]` shorthand; with `increment_shift`
/// the level inputs are built from `η` and `θ` by the increment route.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub gamma: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carma: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractional_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increment_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<MeasureLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<KernelLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arma: Option<ArmaLiteral>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub dt: f64,
    /// Inversion grid size (power of two).
    pub n: usize,
    /// Length of level-model kernels, in time units.
    pub horizon: f64,
    pub zero_tol: f64,
    pub scan_points: usize,
    pub a_cap: f64,
    pub b_cap: f64,
    pub alias_tol: f64,
    pub causality_tol: f64,
    pub max_tilt: f64,
    pub series_tol: f64,
    /// Offset of the inversion line for the level transform route.
    pub level_c: f64,
    pub ma_tail_tol: f64,
    pub trim_tol: f64,
    pub history_tol: f64,
    pub fractional_horizon: f64,
    pub fractional_tail_tol: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            dt: 1.0 / 1024.0,
            n: 1 << 16,
            horizon: 64.0,
            zero_tol: 1e-8,
            scan_points: 256,
            a_cap: 0.25,
            b_cap: 1.0,
            alias_tol: 1e-3,
            causality_tol: 1e-4,
            max_tilt: 12.0,
            series_tol: 1e-12,
            level_c: -0.25,
            ma_tail_tol: 1e-6,
            trim_tol: 1e-16,
            history_tol: 1e-12,
            fractional_horizon: 256.0,
            fractional_tail_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpLawName {
    Normal,
    TwoPoint,
}

/// Brownian part plus optional compound-Poisson jumps. `jump_scale` is the
/// variance of normal jumps or the size `j` of `±j` jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverSection {
    pub gaussian_var: f64,
    pub jump_rate: f64,
    pub jump_law: JumpLawName,
    pub jump_scale: f64,
}

impl Default for DriverSection {
    fn default() -> Self {
        Self {
            gaussian_var: 1.0,
            jump_rate: 0.0,
            jump_law: JumpLawName::Normal,
            jump_scale: 1.0,
        }
    }
}

impl DriverSection {
    pub fn driver(&self) -> Result<LevyDriver> {
        let jumps = (self.jump_rate != 0.0).then_some(JumpPart {
            rate: self.jump_rate,
            law: match self.jump_law {
                JumpLawName::Normal => JumpLaw::Normal {
                    variance: self.jump_scale,
                },
                JumpLawName::TwoPoint => JumpLaw::TwoPoint { size: self.jump_scale },
            },
        });
        let d = LevyDriver {
            gaussian_var: self.gaussian_var,
            jumps,
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    /// Moving average of the kernel against the noise.
    Ma,
    /// Euler scheme of the delay equation.
    Euler,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: usize,
    pub kind: PathKind,
    pub replicates: usize,
    pub t_start: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n: 100_000,
            kind: PathKind::Ma,
            replicates: 1,
            t_start: 0.0,
        }
    }
}

/// Lags are `lags` if given, else `count` log-spaced values in `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcfSection {
    pub lags: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    pub fit: bool,
    pub fit_min: f64,
    pub fit_max: f64,
    /// Also simulate a path (per `[simulate]`) and report its sample ACF.
    pub empirical: bool,
}

impl Default for AcfSection {
    fn default() -> Self {
        Self {
            lags: Vec::new(),
            t_min: 20.0,
            t_max: 60.0,
            count: 32,
            fit: false,
            fit_min: 20.0,
            fit_max: 60.0,
            empirical: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; excluded from the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub driver: DriverSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub acf: AcfSection,
}

fn config_err(e: impl fmt::Display) -> Error {
    Error::Config(
        e.to_string()
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" "),
    )
}

/// Sets `key = value` at a dotted path; `value` is parsed as a TOML value
/// and taken as a bare string if that fails.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got {assignment:?}")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("--set {key}: {p} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn absolutize(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses a config text, applies `--set` overrides and resolves relative
    /// file paths against `base`.
    pub fn from_toml(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = table.try_into().map_err(config_err)?;
        let m = &mut cfg.model;
        for grid in [m.grid.as_mut(), m.phi.as_mut().and_then(|p| p.grid.as_mut())]
            .into_iter()
            .flatten()
        {
            absolutize(base, &mut grid.values_file);
        }
        if let Some(f) = m.theta.as_mut().and_then(|t| t.file.as_mut()) {
            absolutize(base, f);
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let cwd = std::env::current_dir()?;
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(|d| cwd.join(d)).unwrap_or(cwd);
                Self::from_toml(&text, overrides, &base)
            }
            None => Self::from_toml("", overrides, &cwd),
        }
    }

    /// Effective config as TOML, the form echoed next to the artifacts.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the effective config without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    /// The delay measure `η`.
    pub fn delay_measure(&self) -> Result<SignedMeasure> {
        let m = &self.model;
        let literal = MeasureLiteral {
            atoms: m.atoms.clone(),
            gamma: m.gamma.clone(),
            grid: m.grid.clone(),
        };
        match m.carma {
            Some([a1, a2, b0]) => {
                if literal != MeasureLiteral::default() {
                    return Err(Error::Config(
                        "model.carma cannot be combined with a measure literal".into(),
                    ));
                }
                carma_delay_measure(&CarmaSpec { a1, a2, b0 })
            }
            None => literal.build(),
        }
    }

    /// Whether the level model is configured.
    pub fn has_level_model(&self) -> bool {
        let m = &self.model;
        m.arma.is_some() || m.phi.is_some() || m.increment_shift.is_some()
    }

    pub fn arma(&self) -> Option<ArmaSpec> {
        self.model.arma.as_ref().map(|a| ArmaSpec {
            phi: a.phi.clone(),
            theta: a.theta.clone(),
        })
    }

    /// `θ` on `[0, horizon)` at the configured step.
    pub fn theta(&self) -> Result<SampledKernel> {
        let nm = &self.numerics;
        let len = (nm.horizon / nm.dt).round() as usize;
        match &self.model.theta {
            Some(KernelLiteral {
                indicator: Some([a, b]),
                file: None,
            }) => SampledKernel::indicator(*a, *b, nm.dt, len),
            Some(KernelLiteral {
                indicator: None,
                file: Some(path),
            }) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let k = SampledKernel::from_csv(&text, None)?;
                if ((k.dt - nm.dt) / nm.dt).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "theta file step {} differs from numerics.dt {}",
                        k.dt, nm.dt
                    )));
                }
                Ok(k)
            }
            Some(_) => Err(Error::Config(
                "model.theta needs exactly one of indicator or file".into(),
            )),
            None => Err(Error::Config("level model needs model.theta".into())),
        }
    }
}

impl MeasureLiteral {
    pub fn build(&self) -> Result<SignedMeasure> {
        let atoms = self
            .atoms
            .iter()
            .map(|[location, weight]| Atom {
                location: *location,
                weight: *weight,
            })
            .collect();
        let gamma = self.gamma.iter().map(|[c, s, r]| GammaTerm::new(*c, *s, *r)).collect();
        let grid = match &self.grid {
            Some(g) => {
                let text = std::fs::read_to_string(&g.values_file)
                    .map_err(|e| Error::Io(format!("{}: {e}", g.values_file.display())))?;
                let values = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| {
                        l.parse::<f64>()
                            .map_err(|_| Error::Config(format!("grid values: cannot parse {l:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(GridDensity::new(g.dt, g.start, values)?)
            }
            None => None,
        };
        SignedMeasure::new(atoms, gamma, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = RunConfig::from_toml("", &[], Path::new("/")).unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.delay_measure().unwrap().is_zero());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("[numerics]\nstep = 0.1\n", &[], Path::new("/")).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("step")), "{e}");
        assert!(!e.to_string().contains('\n'));
    }

    #[test]
    fn overrides_take_precedence() {
        let sets = vec![
            "numerics.dt=0.125".to_string(),
            "model.atoms=[[0.0,-2.0]]".to_string(),
            "simulate.kind=euler".to_string(),
            "seed=9".to_string(),
        ];
        let c = RunConfig::from_toml("seed = 1\n[numerics]\ndt = 0.5\n", &sets, Path::new("/")).unwrap();
        assert_eq!(c.numerics.dt, 0.125);
        assert_eq!(c.seed, 9);
        assert_eq!(c.simulate.kind, PathKind::Euler);
        assert_eq!(c.delay_measure().unwrap(), SignedMeasure::dirac(0.0, -2.0).unwrap());
    }

    #[test]
    fn echo_round_trips_and_hash_ignores_out() {
        let text = "command = \"simulate\"\nseed = 4\n[model]\ngamma = [[1.0, 0.5, 2.0]]\n[model.arma]\nphi = [0.5]\n";
        let mut c = RunConfig::from_toml(text, &[], Path::new("/")).unwrap();
        let again = RunConfig::from_toml(&c.to_toml(), &[], Path::new("/")).unwrap();
        assert_eq!(c, again);
        let h = c.hash();
        c.out = Some("/tmp/x".into());
        assert_eq!(h, c.hash());
        c.seed = 5;
        assert_ne!(h, c.hash());
    }

    #[test]
    fn carma_shorthand_conflicts_with_literal() {
        let c = RunConfig::from_toml(
            "[model]\ncarma = [3.0, 2.0, 1.5]\natoms = [[0.0, 1.0]]\n",
            &[],
            Path::new("/"),
        )
        .unwrap();
        assert!(c.delay_measure().is_err());
    }
}
