use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ctar(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctar"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SIMULATE: &str = r#"
command = "simulate"
seed = 11

[model]
atoms = [[0.0, -1.0]]

[numerics]
dt = 0.0078125
n = 8192

[driver]
gaussian_var = 0.5
jump_rate = 2.0
jump_law = "two-point"
jump_scale = 0.5

[simulate]
n = 4000
kind = "both"
"#;

#[test]
fn simulate_is_reproducible_from_the_echoed_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), SIMULATE).unwrap();
    let first = ctar(&["--config", "run.toml", "--out", "a"], d);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = ctar(&["--config", "a/config.toml", "--out", "b"], d);
    assert!(second.status.success(), "{}", stderr(&second));
    for name in ["path.csv", "euler.csv"] {
        let a = fs::read(d.join("a").join(name)).unwrap();
        let b = fs::read(d.join("b").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between runs");
    }
    let text = fs::read_to_string(d.join("a/path.csv")).unwrap();
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert_eq!(header.len(), 5);
    assert!(header[0].ends_with("= 11"));
    assert!(header[1].starts_with("# config_hash = ") && header[1].len() == 16 + 64);
    assert!(header[2].contains("two_point"), "{}", header[2]);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4001);
}

#[test]
fn seed_flag_changes_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), SIMULATE).unwrap();
    assert!(ctar(&["--config", "run.toml", "--out", "a"], d).status.success());
    assert!(ctar(&["--config", "run.toml", "--out", "b", "--seed", "12"], d)
        .status
        .success());
    let a = fs::read_to_string(d.join("a/path.csv")).unwrap();
    let b = fs::read_to_string(d.join("b/path.csv")).unwrap();
    assert_ne!(a, b);
    assert!(fs::read_to_string(d.join("b/config.toml"))
        .unwrap()
        .contains("seed = 12"));
}

#[test]
fn verify_passes_on_the_shipped_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctar(&["verify", "--out", "v"], dir.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{out}{}", stderr(&o));
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 20);
    assert!(!out.contains("FAIL"));
    assert!(dir.path().join("v/verify.txt").exists());
}

#[test]
fn solve_x0_writes_kernel_strip_and_identities() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctar(
        &[
            "solve-x0",
            "--set",
            "model.carma=[3.0,2.0,1.5]",
            "--set",
            "numerics.n=16384",
            "--out",
            "k",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let k = dir.path().join("k");
    let csv = fs::read_to_string(k.join("x0.csv")).unwrap();
    assert!(csv.starts_with("t,value\n"));
    let row = csv.lines().nth(1).unwrap();
    // 17 significant digits
    assert!(
        row.split(',')
            .all(|f| f.split('e').next().unwrap().trim_start_matches('-').len() == 18),
        "{row}"
    );
    let strip = fs::read_to_string(k.join("strip.txt")).unwrap();
    assert!(strip.contains("causal = true"));
    let ids = fs::read_to_string(k.join("identities.txt")).unwrap();
    let res: f64 = ids
        .lines()
        .find_map(|l| l.strip_prefix("resolvent_residual = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(res < 1e-3);
}

#[test]
fn solve_level_reports_both_routes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctar(
        &[
            "solve-level",
            "--set",
            "model.phi={atoms=[[1.0,0.5]]}",
            "--set",
            "model.theta={indicator=[0.0,1.0]}",
            "--set",
            "numerics.dt=0.015625",
            "--out",
            "l",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let l = dir.path().join("l");
    assert!(l.join("psi_series.csv").exists() && l.join("psi_transform.csv").exists());
    let rep = fs::read_to_string(l.join("level.txt")).unwrap();
    let gap: f64 = rep
        .lines()
        .find_map(|x| x.strip_prefix("l2_gap = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap < 1e-4);
}

#[test]
fn grid_measure_file_is_resolved_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("cfg")).unwrap();
    // -e^{-u} on [0, 40] as a grid density
    let values: String = (0..=1280)
        .map(|k| format!("{}\n", -(-(k as f64) / 32.0).exp()))
        .collect();
    fs::write(d.join("cfg/eta.txt"), values).unwrap();
    fs::write(
        d.join("cfg/run.toml"),
        "command = \"solve-x0\"\n[model]\natoms = [[0.0, -1.0]]\ngrid = { dt = 0.03125, values_file = \"eta.txt\" }\n[numerics]\nn = 16384\n",
    )
    .unwrap();
    let o = ctar(&["--config", "cfg/run.toml", "--out", "g"], d);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn failures_exit_one_with_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "command = \"acf\"\n[acf]\nwindow = 3\n").unwrap();
    for args in [
        vec!["solve-x0"],
        vec!["--config", "bad.toml"],
        vec!["--config", "missing.toml"],
        vec!["simulate", "--set", "simulate.kind=sideways"],
        vec!["solve-level", "--set", "model.arma={phi=[1.5]}"],
        vec![],
    ] {
        let o = ctar(&args, d);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let e = stderr(&o);
        assert_eq!(e.lines().count(), 1, "{args:?}: {e}");
        assert!(e.starts_with("ctar: "));
    }
    let e = stderr(&ctar(&["solve-x0"], d));
    assert!(e.contains("h(iy)=0 at y=0"), "{e}");
}
