use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ctar_ffi::*;

fn last_error() -> String {
    let p = ctar_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn measure(atoms: &[(f64, f64)], gamma: &[(f64, f64, f64)]) -> *mut CtarMeasure {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(ctar_measure_new(&mut m), CtarStatus::Ok);
        for &(l, w) in atoms {
            assert_eq!(ctar_measure_add_atom(m, l, w), CtarStatus::Ok);
        }
        for &(c, s, r) in gamma {
            assert_eq!(ctar_measure_add_gamma(m, c, s, r), CtarStatus::Ok);
        }
    }
    m
}

fn kernel_values(k: *const CtarKernel) -> Vec<f64> {
    unsafe {
        let mut v = vec![0.0; ctar_kernel_len(k)];
        assert_eq!(ctar_kernel_values(k, v.as_mut_ptr(), v.len()), CtarStatus::Ok);
        v
    }
}

#[test]
fn measure_queries() {
    let m = measure(&[(0.0, -1.0)], &[(2.0, 1.0, 1.0)]);
    let mut out = 0.0;
    unsafe {
        assert_eq!(ctar_measure_total_mass(m, &mut out), CtarStatus::Ok);
        assert!((out - 1.0).abs() < 1e-14);
        assert_eq!(ctar_measure_total_variation(m, &mut out), CtarStatus::Ok);
        assert!((out - 3.0).abs() < 1e-14);
        assert_eq!(ctar_measure_moment(m, 1, false, &mut out), CtarStatus::Ok);
        assert!((out - 2.0).abs() < 1e-12);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(ctar_measure_laplace(m, -1.0, 0.0, &mut re, &mut im), CtarStatus::Ok);
        assert!((re - 0.0).abs() < 1e-14 && im == 0.0);
        assert_eq!(ctar_h_eval(m, 0.0, 0.0, &mut re, &mut im), CtarStatus::Ok);
        assert!((re + 1.0).abs() < 1e-14);
        assert_eq!(
            ctar_measure_laplace(m, 2.0, 0.0, &mut re, &mut im),
            CtarStatus::OutsideLaplaceDomain
        );
        assert!(last_error().contains("Laplace domain"));
        ctar_measure_free(m);
    }
}

#[test]
fn invalid_components_leave_the_handle_unchanged() {
    let m = measure(&[(0.0, -1.0)], &[]);
    let mut mass = 0.0;
    unsafe {
        assert_eq!(ctar_measure_add_atom(m, -1.0, 1.0), CtarStatus::InvalidInput);
        assert_eq!(ctar_measure_add_gamma(m, 1.0, -1.0, 1.0), CtarStatus::InvalidInput);
        assert_eq!(
            ctar_measure_set_grid(m, 0.0, 0.0, [1.0].as_ptr(), 1),
            CtarStatus::InvalidInput
        );
        assert_eq!(ctar_measure_total_mass(m, &mut mass), CtarStatus::Ok);
        assert_eq!(mass, -1.0);
        let grid = [1.0, 1.0, 1.0];
        assert_eq!(ctar_measure_set_grid(m, 0.5, 0.0, grid.as_ptr(), 3), CtarStatus::Ok);
        ctar_measure_total_mass(m, &mut mass);
        assert!((mass - 0.0).abs() < 1e-12, "{mass}");
        ctar_measure_free(m);
    }
}

#[test]
fn null_pointers_are_reported() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(ctar_measure_total_mass(ptr::null(), &mut out), CtarStatus::NullPointer);
        assert!(last_error().contains("measure"));
        assert_eq!(ctar_measure_new(ptr::null_mut()), CtarStatus::NullPointer);
        assert_eq!(ctar_kernel_len(ptr::null()), 0);
        assert!(ctar_kernel_dt(ptr::null()).is_nan());
        ctar_measure_free(ptr::null_mut());
        ctar_kernel_free(ptr::null_mut());
    }
}

#[test]
fn ou_kernel_through_the_abi() {
    let m = measure(&[(0.0, -1.0)], &[]);
    unsafe {
        let mut strip = std::mem::zeroed::<CtarStripReport>();
        assert_eq!(ctar_find_strip(m, ptr::null(), &mut strip), CtarStatus::Ok);
        assert!(strip.causal && strip.c < 0.0);
        let mut x0 = ptr::null_mut();
        assert_eq!(ctar_solve_x0(m, &strip, 1 << 14, 1.0 / 256.0, &mut x0), CtarStatus::Ok);
        let (dt, start) = (ctar_kernel_dt(x0), ctar_kernel_start(x0));
        let worst = kernel_values(x0)
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let t = (start + i as i64) as f64 * dt;
                let exact = if t >= 0.0 { (-t).exp() } else { 0.0 };
                (v - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
        let mut r = 0.0;
        assert_eq!(ctar_resolvent_residual(x0, m, &mut r), CtarStatus::Ok);
        assert!(r < 1e-3);
        assert_eq!(ctar_mass_identity(x0, m, &mut r), CtarStatus::Ok);
        assert!((r + 1.0).abs() < 1e-3);
        let mut small = [0.0; 4];
        assert_eq!(
            ctar_kernel_values(x0, small.as_mut_ptr(), 4),
            CtarStatus::BufferTooSmall
        );
        ctar_kernel_free(x0);
        ctar_measure_free(m);
    }
}

#[test]
fn zero_measure_reports_axis_zero() {
    let m = measure(&[], &[(1.0, 1.0, 1.0), (-2.0, 1.0, 2.0)]);
    unsafe {
        let mut strip = std::mem::zeroed::<CtarStripReport>();
        assert_eq!(ctar_find_strip(m, ptr::null(), &mut strip), CtarStatus::AxisZero);
        assert!(last_error().starts_with("h(iy)=0 at y=0"));
        ctar_measure_free(m);
    }
}

#[test]
fn fixtures_and_scan_config() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(ctar_measure_carma(3.0, 2.0, 1.0, &mut m), CtarStatus::Ok);
        let mut mass = 0.0;
        ctar_measure_total_mass(m, &mut mass);
        assert_eq!(mass, -2.0);
        let mut cfg = ctar_scan_config_default();
        cfg.points = 64;
        let mut strip = std::mem::zeroed::<CtarStripReport>();
        assert_eq!(ctar_find_strip(m, &cfg, &mut strip), CtarStatus::Ok);
        assert_eq!(strip.scan_points, 64);
        ctar_measure_free(m);
        let mut g = ptr::null_mut();
        assert_eq!(ctar_measure_gamma_delay(-2.0, 1.0, 0.5, 1.0, &mut g), CtarStatus::Ok);
        ctar_measure_free(g);
        assert_eq!(ctar_measure_carma(1.0, 1.0, 0.0, &mut g), CtarStatus::InvalidInput);
    }
}

#[test]
fn level_routes_agree() {
    unsafe {
        let mut theta = ptr::null_mut();
        assert_eq!(
            ctar_kernel_indicator(0.0, 1.0, 1.0 / 64.0, 64 * 64, &mut theta),
            CtarStatus::Ok
        );
        let phi = measure(&[(1.0, 0.5)], &[]);
        let (mut s, mut t) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(ctar_level_kernel_series(theta, phi, 1e-12, &mut s), CtarStatus::Ok);
        assert_eq!(ctar_level_kernel_transform(theta, phi, -0.25, &mut t), CtarStatus::Ok);
        let mut r = 1.0;
        assert_eq!(ctar_level_residual(s, theta, phi, &mut r), CtarStatus::Ok);
        assert!(r < 1e-6);
        assert_eq!(ctar_level_residual(t, theta, phi, &mut r), CtarStatus::Ok);
        assert!(r < 1e-6);
        for x in [1.0, 2.5, 7.25] {
            let (mut a, mut b) = (0.0, 0.0);
            ctar_kernel_value_at(s, x, &mut a);
            ctar_kernel_value_at(t, x, &mut b);
            assert!((a - b).abs() < 1e-6, "{x}: {a} vs {b}");
        }
        let strong = measure(&[(1.0, 2.0)], &[]);
        let mut k = ptr::null_mut();
        assert_eq!(
            ctar_level_kernel_series(theta, strong, 1e-12, &mut k),
            CtarStatus::ContractionViolated
        );
        assert!(k.is_null());
        for h in [s, t, theta] {
            ctar_kernel_free(h);
        }
        ctar_measure_free(phi);
        ctar_measure_free(strong);
    }
}

#[test]
fn kernel_from_samples() {
    let v = [0.0, 1.0, 2.0];
    unsafe {
        let mut k = ptr::null_mut();
        assert_eq!(ctar_kernel_new(0.5, -1, v.as_ptr(), 3, &mut k), CtarStatus::Ok);
        assert_eq!(ctar_kernel_start(k), -1);
        assert_eq!(ctar_kernel_atom_at_zero(k), 0.0);
        let mut x = 0.0;
        ctar_kernel_value_at(k, 0.25, &mut x);
        assert!((x - 1.5).abs() < 1e-14);
        assert_eq!(kernel_values(k), v);
        ctar_kernel_free(k);
        assert_eq!(
            ctar_kernel_new(-1.0, 0, v.as_ptr(), 3, &mut k),
            CtarStatus::InvalidInput
        );
        assert_eq!(ctar_kernel_new(1.0, 0, ptr::null(), 3, &mut k), CtarStatus::NullPointer);
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(ctar_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke test against the generated header and the static
/// library. Skipped when no C compiler or static library is available.
#[test]
fn c_program_links_against_the_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libctar_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {}", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let out = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
