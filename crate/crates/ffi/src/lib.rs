//! C ABI for the measure algebra and the kernel solvers of `ctar`.
//!
//! Objects cross the boundary as opaque handles (`CtarMeasure`,
//! `CtarKernel`) created by `ctar_*_new`/solver calls and released with the
//! matching `ctar_*_free`. Every fallible call returns a [`CtarStatus`];
//! on failure `ctar_last_error()` describes the error on the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctar::closed_forms::{carma_delay_measure, gamma_delay_measure, CarmaSpec};
use ctar::measure::h_eval;
use ctar::solver::{
    find_strip, level_kernel_series, level_kernel_transform, level_residual, mass_identity, resolvent_residual,
    solve_x0, InversionGrid, ScanConfig, ScanSummary, StripReport,
};
use ctar::{Atom, Error, GammaTerm, GridDensity, SampledKernel, SignedMeasure};
use num_complex::Complex64;

/// Result codes. `Ok` is zero; every library error has its own code.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    OutsideLaplaceDomain = 3,
    MomentNotFinite = 4,
    GridOverflow = 5,
    AxisZero = 6,
    ScanInconclusive = 7,
    CausalityViolated = 8,
    FrequencyWindowTooSmall = 9,
    ContractionViolated = 10,
    DenominatorVanishes = 11,
    IncrementContraction = 12,
    UseStationaryRoute = 13,
    NotIntegrable = 14,
    KernelHorizonTooShort = 15,
    InsufficientHistory = 16,
    NotAsymptotic = 17,
    LagTooLarge = 18,
    RepeatedRoots = 19,
    Io = 20,
    Config = 21,
    BufferTooSmall = 22,
    Panic = 99,
}

impl From<&Error> for CtarStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) => Self::InvalidInput,
            Error::OutsideLaplaceDomain { .. } => Self::OutsideLaplaceDomain,
            Error::MomentNotFinite => Self::MomentNotFinite,
            Error::GridOverflow { .. } => Self::GridOverflow,
            Error::AxisZero { .. } => Self::AxisZero,
            Error::ScanInconclusive { .. } => Self::ScanInconclusive,
            Error::CausalityViolated { .. } => Self::CausalityViolated,
            Error::FrequencyWindowTooSmall { .. } => Self::FrequencyWindowTooSmall,
            Error::ContractionViolated { .. } => Self::ContractionViolated,
            Error::DenominatorVanishes { .. } => Self::DenominatorVanishes,
            Error::IncrementContraction { .. } => Self::IncrementContraction,
            Error::UseStationaryRoute { .. } => Self::UseStationaryRoute,
            Error::NotIntegrable => Self::NotIntegrable,
            Error::KernelHorizonTooShort { .. } => Self::KernelHorizonTooShort,
            Error::InsufficientHistory { .. } => Self::InsufficientHistory,
            Error::NotAsymptotic { .. } => Self::NotAsymptotic,
            Error::LagTooLarge { .. } => Self::LagTooLarge,
            Error::RepeatedRoots => Self::RepeatedRoots,
            Error::Io(_) => Self::Io,
            Error::Config(_) => Self::Config,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CtarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CtarStatus::from(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(CtarStatus::NullPointer, format!("null pointer: {what}"))
}

/// Runs `f`, records failures and contains panics.
fn guard(f: impl FnOnce() -> FfiResult) -> CtarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtarStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            CtarStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `T`.
unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write<T>(p: *mut T, v: T, what: &str) -> FfiResult {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// # Safety
/// `data` must be null (with `len == 0`) or valid for `len` reads.
unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctar_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

// ---------------------------------------------------------------------------
// Measures

/// Finite signed measure on `[0, ∞)`: atoms, gamma terms and an optional
/// grid density.
pub struct CtarMeasure {
    atoms: Vec<Atom>,
    gamma: Vec<GammaTerm>,
    grid: Option<GridDensity>,
    measure: SignedMeasure,
}

impl CtarMeasure {
    fn from_measure(m: SignedMeasure) -> Self {
        Self {
            atoms: m.atoms().to_vec(),
            gamma: m.gamma_terms().to_vec(),
            grid: m.grid_density().cloned(),
            measure: m,
        }
    }

    /// Rebuilds after a component change; the handle is unchanged on error.
    fn rebuild(&mut self, atoms: Vec<Atom>, gamma: Vec<GammaTerm>, grid: Option<GridDensity>) -> FfiResult {
        self.measure = SignedMeasure::new(atoms.clone(), gamma.clone(), grid.clone())?;
        self.atoms = atoms;
        self.gamma = gamma;
        self.grid = grid;
        Ok(())
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Creates the zero measure.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_new(out: *mut *mut CtarMeasure) -> CtarStatus {
    guard(|| write(out, boxed(CtarMeasure::from_measure(SignedMeasure::zero())), "out"))
}

/// Releases a measure; null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_free(m: *mut CtarMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Adds `weight · δ_location`.
///
/// # Safety
/// `m` must be a valid measure handle.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_add_atom(m: *mut CtarMeasure, location: f64, weight: f64) -> CtarStatus {
    guard(|| {
        let m = m.as_mut().ok_or_else(|| null("measure"))?;
        let mut atoms = m.atoms.clone();
        atoms.push(Atom { location, weight });
        m.rebuild(atoms, m.gamma.clone(), m.grid.clone())
    })
}

/// Adds the density `c u^{shape-1} e^{-rate u} / Γ(shape)`.
///
/// # Safety
/// `m` must be a valid measure handle.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_add_gamma(m: *mut CtarMeasure, c: f64, shape: f64, rate: f64) -> CtarStatus {
    guard(|| {
        let m = m.as_mut().ok_or_else(|| null("measure"))?;
        let mut gamma = m.gamma.clone();
        gamma.push(GammaTerm::new(c, shape, rate));
        m.rebuild(m.atoms.clone(), gamma, m.grid.clone())
    })
}

/// Sets the grid density sampled at `start + k dt`, replacing any previous one.
///
/// # Safety
/// `m` must be a valid measure handle; `values` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_set_grid(
    m: *mut CtarMeasure,
    dt: f64,
    start: f64,
    values: *const f64,
    len: usize,
) -> CtarStatus {
    guard(|| {
        let m = m.as_mut().ok_or_else(|| null("measure"))?;
        let grid = GridDensity::new(dt, start, slice(values, len, "values")?.to_vec())?;
        m.rebuild(m.atoms.clone(), m.gamma.clone(), Some(grid))
    })
}

/// Delay measure of the CARMA(2,1) fixture with parameters `(a1, a2, b0)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_carma(a1: f64, a2: f64, b0: f64, out: *mut *mut CtarMeasure) -> CtarStatus {
    guard(|| {
        let m = carma_delay_measure(&CarmaSpec { a1, a2, b0 })?;
        write(out, boxed(CtarMeasure::from_measure(m)), "out")
    })
}

/// `α1 δ_0 + α2 · Gamma(β, γ)` delay measure.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_gamma_delay(
    alpha1: f64,
    alpha2: f64,
    beta: f64,
    gamma_rate: f64,
    out: *mut *mut CtarMeasure,
) -> CtarStatus {
    guard(|| {
        let m = gamma_delay_measure(alpha1, alpha2, beta, gamma_rate)?;
        write(out, boxed(CtarMeasure::from_measure(m)), "out")
    })
}

/// # Safety
/// `m` must be a valid measure handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_total_mass(m: *const CtarMeasure, out: *mut f64) -> CtarStatus {
    guard(|| write(out, as_ref(m, "measure")?.measure.total_mass(), "out"))
}

/// # Safety
/// `m` must be a valid measure handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_total_variation(m: *const CtarMeasure, out: *mut f64) -> CtarStatus {
    guard(|| write(out, as_ref(m, "measure")?.measure.total_variation(), "out"))
}

/// `∫ u^n μ(du)`, or `∫ u^n |μ|(du)` when `absolute` is true.
///
/// # Safety
/// `m` must be a valid measure handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_moment(
    m: *const CtarMeasure,
    n: u32,
    absolute: bool,
    out: *mut f64,
) -> CtarStatus {
    guard(|| write(out, as_ref(m, "measure")?.measure.moment(n, absolute)?, "out"))
}

/// `L[μ](z) = ∫ e^{z u} μ(du)` at `z = re + i·im`.
///
/// # Safety
/// `m` must be a valid measure handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_measure_laplace(
    m: *const CtarMeasure,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> CtarStatus {
    guard(|| {
        let v = as_ref(m, "measure")?.measure.laplace(Complex64::new(re, im))?;
        write(out_re, v.re, "out_re")?;
        write(out_im, v.im, "out_im")
    })
}

/// `h(z) = -z - L[η](z)` at `z = re + i·im`.
///
/// # Safety
/// `m` must be a valid measure handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_h_eval(
    m: *const CtarMeasure,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> CtarStatus {
    guard(|| {
        let v = h_eval(&as_ref(m, "measure")?.measure, Complex64::new(re, im))?;
        write(out_re, v.re, "out_re")?;
        write(out_im, v.im, "out_im")
    })
}

// ---------------------------------------------------------------------------
// Strip scan

/// Parameters of the zero-free strip scan.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtarScanConfig {
    pub zero_tol: f64,
    pub points: usize,
    pub a_cap: f64,
    pub b_cap: f64,
    pub max_depth: u32,
    pub max_evaluations: usize,
}

impl From<ScanConfig> for CtarScanConfig {
    fn from(s: ScanConfig) -> Self {
        Self {
            zero_tol: s.zero_tol,
            points: s.points,
            a_cap: s.a_cap,
            b_cap: s.b_cap,
            max_depth: s.max_depth,
            max_evaluations: s.max_evaluations,
        }
    }
}

impl From<CtarScanConfig> for ScanConfig {
    fn from(s: CtarScanConfig) -> Self {
        Self {
            zero_tol: s.zero_tol,
            points: s.points,
            a_cap: s.a_cap,
            b_cap: s.b_cap,
            max_depth: s.max_depth,
            max_evaluations: s.max_evaluations,
        }
    }
}

/// Certified strip `a < Re z ≤ b`, inversion offset `c` and scan extent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtarStripReport {
    pub min_abs_h_on_axis: f64,
    pub argmin_y: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub causal: bool,
    pub scan_y_max: f64,
    pub scan_points: usize,
    pub scan_x_max: f64,
    pub scan_lipschitz: f64,
    pub scan_evaluations: usize,
}

impl From<StripReport> for CtarStripReport {
    fn from(r: StripReport) -> Self {
        Self {
            min_abs_h_on_axis: r.min_abs_h_on_axis,
            argmin_y: r.argmin_y,
            a: r.a,
            b: r.b,
            c: r.c,
            causal: r.causal,
            scan_y_max: r.scan.y_max,
            scan_points: r.scan.points,
            scan_x_max: r.scan.x_max,
            scan_lipschitz: r.scan.lipschitz,
            scan_evaluations: r.scan.evaluations,
        }
    }
}

impl From<CtarStripReport> for StripReport {
    fn from(r: CtarStripReport) -> Self {
        Self {
            min_abs_h_on_axis: r.min_abs_h_on_axis,
            argmin_y: r.argmin_y,
            a: r.a,
            b: r.b,
            c: r.c,
            causal: r.causal,
            scan: ScanSummary {
                y_max: r.scan_y_max,
                points: r.scan_points,
                x_max: r.scan_x_max,
                lipschitz: r.scan_lipschitz,
                evaluations: r.scan_evaluations,
            },
        }
    }
}

#[no_mangle]
pub extern "C" fn ctar_scan_config_default() -> CtarScanConfig {
    ScanConfig::default().into()
}

/// Scans `h` for a zero-free strip. `config` may be null for defaults.
///
/// # Safety
/// `m` must be a valid measure handle, `config` null or valid, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_find_strip(
    m: *const CtarMeasure,
    config: *const CtarScanConfig,
    out: *mut CtarStripReport,
) -> CtarStatus {
    guard(|| {
        let cfg = config.as_ref().map_or_else(ScanConfig::default, |c| (*c).into());
        let r = find_strip(&as_ref(m, "measure")?.measure, &cfg)?;
        write(out, r.into(), "out")
    })
}

// ---------------------------------------------------------------------------
// Kernels

/// Function sampled on `t_i = (start + i) dt`, optionally with an atom at 0.
pub struct CtarKernel(SampledKernel);

/// Kernel from `len` samples starting at grid index `start`.
///
/// # Safety
/// `values` valid for `len` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_new(
    dt: f64,
    start: i64,
    values: *const f64,
    len: usize,
    out: *mut *mut CtarKernel,
) -> CtarStatus {
    guard(|| {
        let k = SampledKernel::new(dt, start, slice(values, len, "values")?.to_vec())?;
        write(out, boxed(CtarKernel(k)), "out")
    })
}

/// `𝟙_{[a, b)}` on `[0, len·dt)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_indicator(
    a: f64,
    b: f64,
    dt: f64,
    len: usize,
    out: *mut *mut CtarKernel,
) -> CtarStatus {
    guard(|| write(out, boxed(CtarKernel(SampledKernel::indicator(a, b, dt, len)?)), "out"))
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `k` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_free(k: *mut CtarKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `k` must be null or a valid kernel handle.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_len(k: *const CtarKernel) -> usize {
    k.as_ref().map_or(0, |k| k.0.len())
}

/// Grid step; NaN for a null handle.
///
/// # Safety
/// `k` must be null or a valid kernel handle.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_dt(k: *const CtarKernel) -> f64 {
    k.as_ref().map_or(f64::NAN, |k| k.0.dt)
}

/// Grid index of the first sample; 0 for a null handle.
///
/// # Safety
/// `k` must be null or a valid kernel handle.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_start(k: *const CtarKernel) -> i64 {
    k.as_ref().map_or(0, |k| k.0.start)
}

/// Weight of the atom at 0 carried by measure-valued kernels.
///
/// # Safety
/// `k` must be null or a valid kernel handle.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_atom_at_zero(k: *const CtarKernel) -> f64 {
    k.as_ref().map_or(f64::NAN, |k| k.0.atom_at_zero)
}

/// Copies the samples into `buf`, which must hold `ctar_kernel_len(k)` values.
///
/// # Safety
/// `k` must be a valid kernel handle; `buf` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_values(k: *const CtarKernel, buf: *mut f64, capacity: usize) -> CtarStatus {
    guard(|| {
        let k = &as_ref(k, "kernel")?.0;
        if capacity < k.len() {
            return Err(Failure(
                CtarStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, kernel has {}", k.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(k.values.as_ptr(), buf, k.len());
        Ok(())
    })
}

/// Linear interpolation of the samples at time `t`, zero outside the window.
///
/// # Safety
/// `k` must be a valid kernel handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_kernel_value_at(k: *const CtarKernel, t: f64, out: *mut f64) -> CtarStatus {
    guard(|| write(out, as_ref(k, "kernel")?.0.value_at(t), "out"))
}

/// Solves for `x0` (Laplace transform `1/h`) on `n` samples of step `dt`.
///
/// # Safety
/// `m` and `strip` must be valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_solve_x0(
    m: *const CtarMeasure,
    strip: *const CtarStripReport,
    n: usize,
    dt: f64,
    out: *mut *mut CtarKernel,
) -> CtarStatus {
    guard(|| {
        let strip: StripReport = (*as_ref(strip, "strip")?).into();
        let k = solve_x0(&as_ref(m, "measure")?.measure, &strip, InversionGrid { n, dt })?;
        write(out, boxed(CtarKernel(k)), "out")
    })
}

/// Grid residual of `x0 = 𝟙_{[0,∞)} + x0 ∗ η ∗ 𝟙`.
///
/// # Safety
/// Handles must be valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_resolvent_residual(
    x0: *const CtarKernel,
    m: *const CtarMeasure,
    out: *mut f64,
) -> CtarStatus {
    guard(|| {
        write(
            out,
            resolvent_residual(&as_ref(x0, "x0")?.0, &as_ref(m, "measure")?.measure),
            "out",
        )
    })
}

/// Total mass of `x0(du)`; equals -1 for stationary kernels.
///
/// # Safety
/// Handles must be valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_mass_identity(x0: *const CtarKernel, m: *const CtarMeasure, out: *mut f64) -> CtarStatus {
    guard(|| {
        write(
            out,
            mass_identity(&as_ref(x0, "x0")?.0, &as_ref(m, "measure")?.measure),
            "out",
        )
    })
}

/// Level kernel `ψ = Σ θ ∗ φ^{∗n}`; requires `|φ|` total variation below 1.
///
/// # Safety
/// Handles must be valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_level_kernel_series(
    theta: *const CtarKernel,
    phi: *const CtarMeasure,
    tol: f64,
    out: *mut *mut CtarKernel,
) -> CtarStatus {
    guard(|| {
        let k = level_kernel_series(&as_ref(theta, "theta")?.0, &as_ref(phi, "phi")?.measure, tol)?;
        write(out, boxed(CtarKernel(k)), "out")
    })
}

/// Level kernel from `L[θ] / (1 - L[φ])` on the line `Re z = c ≤ 0`.
///
/// # Safety
/// Handles must be valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_level_kernel_transform(
    theta: *const CtarKernel,
    phi: *const CtarMeasure,
    c: f64,
    out: *mut *mut CtarKernel,
) -> CtarStatus {
    guard(|| {
        let k = level_kernel_transform(&as_ref(theta, "theta")?.0, &as_ref(phi, "phi")?.measure, c)?;
        write(out, boxed(CtarKernel(k)), "out")
    })
}

/// Grid residual of `ψ = θ + ψ ∗ φ`.
///
/// # Safety
/// Handles must be valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctar_level_residual(
    psi: *const CtarKernel,
    theta: *const CtarKernel,
    phi: *const CtarMeasure,
    out: *mut f64,
) -> CtarStatus {
    guard(|| {
        let r = level_residual(
            &as_ref(psi, "psi")?.0,
            &as_ref(theta, "theta")?.0,
            &as_ref(phi, "phi")?.measure,
        )?;
        write(out, r, "out")
    })
}
