use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_warped-disk"));
    cmd.env_remove("WARPED_DISK_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn profiles_lists_all_builtins() {
    let out = run(&["profiles"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in ["euclidean", "hyperbolic", "log-threshold", "power-curvature", "quadratic-curvature"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn classify_euclidean_plane() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["classify", "--profile", "euclidean", "--horizon", "100", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert!(report.contains("harmonic = \"parabolic\""));
    assert!(report.contains("biharmonic = \"rigid\""));
    assert_eq!(csv_rows(&dir.path().join("evidence.csv")).len(), 9);
}

#[test]
fn classify_hyperbolic_plane() {
    let out = run(&["classify", "--profile", "hyperbolic", "--horizon", "50", "--mmax", "3"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("harmonic = \"hyperbolic\""));
    assert!(text.contains("biharmonic = \"liouville_to_harmonic\""));
}

#[test]
fn undetermined_regime_exits_two() {
    let out = run(&["classify", "--profile", "log-threshold", "--horizon", "100", "--mmax", "2"]);
    assert_eq!(code(&out), 2, "{}", stdout(&out));
    assert!(stdout(&out).contains("biharmonic = \"undetermined\""));
}

#[test]
fn euclidean_modes_are_powers_of_r() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["modes", "--profile", "euclidean", "--mmax", "3", "--grid", "geometric:0.1:10:21", "--out", d]);
    assert_eq!(code(&out), 0);
    for m in [-3i32, -1, 0, 2, 3] {
        let rows = csv_rows(&dir.path().join(format!("mode_{m}.csv")));
        assert_eq!(rows.len(), 21);
        for row in rows {
            let r: f64 = row[0].parse().unwrap();
            let lambda: f64 = row[1].parse().unwrap();
            let z: f64 = row[2].parse().unwrap();
            // φ_m = r^|m| and ψ_m = r^{|m|+2} / (4|m| + 4)
            let ma = m.unsigned_abs() as f64;
            assert!((lambda - ma * r.ln()).abs() < 1e-12, "m={m} r={r}");
            assert!((z / (r * r / (4.0 * ma + 4.0)) - 1.0).abs() < 1e-10, "m={m} r={r}");
        }
    }
    assert!(dir.path().join("profile.csv").exists());
    assert_eq!(stdout(&out).lines().count(), 5);
}

fn write_trace(path: &Path, n: usize, f: impl Fn(f64) -> (f64, f64)) {
    let mut text = String::from("theta,u,lap_u\n");
    for k in 0..n {
        let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let (u, l) = f(t);
        text.push_str(&format!("{t:e},{u:e},{l:e}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn bvp_recovers_quarter_r_squared() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    // u = r²/4 on the unit disk: Δu = 1, all weight on ψ_0
    write_trace(&trace, 32, |_| (0.25, 1.0));
    let d = dir.path().join("out");
    let out = run(&[
        "bvp",
        "--profile",
        "euclidean",
        "--trace",
        trace.to_str().unwrap(),
        "--radius",
        "1",
        "--order",
        "8",
        "--out",
        d.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&d.join("coefficients.csv"));
    assert_eq!(rows.len(), 17);
    for row in rows {
        let m: i64 = row[0].parse().unwrap();
        let vals: Vec<f64> = row[1..].iter().map(|v| v.parse().unwrap()).collect();
        let want = if m == 0 { [0.0, 0.0, 1.0, 0.0] } else { [0.0; 4] };
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-12, "m={m}: {vals:?}");
        }
    }
    assert!(stdout(&out).contains("reproduced = true"));
}

#[test]
fn bvp_truncated_trace_exits_one() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    write_trace(&trace, 64, |t| ((12.0 * t).cos(), 0.0));
    let out =
        run(&["bvp", "--profile", "euclidean", "--trace", trace.to_str().unwrap(), "--radius", "1", "--order", "4"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_detects_injected_fault() {
    let out = run(&["verify", "--suite", "stencil", "--inject-fault", "phi-second"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("FAIL stencil"));
    let clean = run(&["verify", "--suite", "stencil"]);
    assert_eq!(code(&clean), 0);
}

#[test]
fn verify_infeasible_tolerance_exits_two() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["verify", "--suite", "stencil", "--tol", "1e-20", "--out", d]);
    assert_eq!(code(&out), 2);
    let summary = fs::read_to_string(dir.path().join("verify_summary.txt")).unwrap();
    assert!(summary.contains("tolerance_infeasible"));
}

#[test]
fn bad_configuration_exits_64() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[classify]\nhorizon = 10.0\nunknown_key = 3\n").unwrap();
    let out = run(&["classify", "--profile", "euclidean", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 64);
    assert_eq!(code(&run(&["classify", "--profile", "no-such-profile"])), 64);
    assert_eq!(code(&run(&["classify", "--profile", "euclidean", "--rmax", "5", "--horizon", "10"])), 64);
    assert_eq!(code(&run(&["modes", "--profile", "euclidean", "--grid", "uniform:0:1"])), 64);
    assert_eq!(code(&run(&["no-such-command"])), 64);
    let out = bin().args(["profiles"]).env("WARPED_DISK_THREADS", "0").output().unwrap();
    assert_eq!(code(&out), 64);
}

#[test]
fn config_file_drives_a_run() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[profile]\nfamily = \"quadratic-curvature\"\neta = 2.0\n\n[classify]\nhorizon = 60.0\nm_max = 2\n\n[output]\ndir = \"results\"\n",
    )
    .unwrap();
    let out = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("results/report.toml")).unwrap();
    assert!(report.contains("horizon = 60.0"));
    assert!(report.contains("biharmonic = \"liouville_to_harmonic\""));
}

#[test]
fn runs_are_byte_identical() {
    let run_once = |threads: &str| {
        let dir = TempDir::new().unwrap();
        let d = dir.path().to_str().unwrap().to_string();
        let out = bin()
            .args(["classify", "--profile", "power-curvature", "--horizon", "20", "--mmax", "3", "--out", &d])
            .env("WARPED_DISK_THREADS", threads)
            .output()
            .unwrap();
        let a = fs::read(dir.path().join("report.toml")).unwrap();
        let b = fs::read(dir.path().join("evidence.csv")).unwrap();
        (code(&out), out.stdout, a, b)
    };
    assert_eq!(run_once("1"), run_once("3"));
}
