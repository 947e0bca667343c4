//! Acceptance criteria, run one after another so runtimes are not shared.
//! Prints one PASS/FAIL line per criterion and exits non-zero on any FAIL.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use warped_disk::asymptotics::{classify, loglog_slope, BiharmonicRegime, ClassifyOptions, HarmonicRegime};
use warped_disk::geometry::{
    log_threshold, profile_from_curvature, BuiltinParams, CurvatureProfile, MetricProfile, Surface, TailClass,
    BUILTIN_NAMES,
};
use warped_disk::grid::RadialGrid;
use warped_disk::modes::{verify_mode_residuals, ModeTable, Verdict};
use warped_disk::ode::Tolerances;
use warped_disk::verify::{self, bvp_round_trip, comparison_property, VerifyConfig};
use warped_disk::Error;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within_budget(elapsed: Duration, budget: Option<f64>) -> bool {
    budget.is_none_or(|b| elapsed.as_secs_f64() < b)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn builtin(name: &str, r_max: f64) -> Surface {
    Surface::builtin(name, &BuiltinParams::default(), r_max, Tolerances::default()).expect("built-in profile")
}

fn euclidean_oracle() -> Outcome {
    let grid = RadialGrid::geometric(0.1, 10.0, 81).unwrap();
    let table = ModeTable::new(&MetricProfile::euclidean(), &grid).unwrap();
    let mut phi_err = 0.0f64;
    for m in -8i64..=8 {
        let lm = table.log_mode(m);
        for (r, l) in grid.nodes().iter().zip(&lm.lambda) {
            phi_err = phi_err.max(rel(l.exp(), r.powi(m.abs() as i32)));
        }
    }
    let b0 = table.biharmonic(0).unwrap();
    let b2 = table.biharmonic(2).unwrap();
    let mut z_err = 0.0f64;
    let mut psi_err = 0.0f64;
    for (i, r) in grid.nodes().iter().enumerate() {
        z_err = z_err.max(rel(b0.z[i], r * r / 4.0));
        psi_err = psi_err.max(rel(b2.log_psi[i].exp(), r.powi(4) / 12.0));
    }
    outcome(
        phi_err <= 1e-8 && z_err <= 1e-6 && psi_err <= 1e-6,
        format!("phi_m rel err {phi_err:.2e} (<= 1e-8), z_0 {z_err:.2e}, psi_2 {psi_err:.2e} (<= 1e-6)"),
    )
}

fn hyperbolic_oracle() -> Outcome {
    let horizon = 1000.0;
    let surface = builtin("hyperbolic", horizon);
    let grid = RadialGrid::doubling(horizon / 2f64.powi(16), horizon, 8).unwrap();
    let table = ModeTable::new(&surface.metric, &grid).unwrap();
    let b1 = table.biharmonic(1).unwrap();
    let exact = |r: f64| ((r / 2.0).tanh() / 0.5f64.tanh()).ln();
    let lam_err = grid.nodes().iter().zip(&b1.lambda).map(|(&r, l)| (l - exact(r)).abs()).fold(0.0, f64::max);
    let phi = b1.phi_growth(horizon).unwrap().verdict;
    let z = b1.z_growth(horizon).unwrap().verdict;
    let report = classify(&surface, &ClassifyOptions { horizon, ..Default::default() }).unwrap();
    let labels = (report.harmonic_regime, report.biharmonic_regime);
    outcome(
        lam_err <= 1e-8
            && phi == Verdict::Bounded
            && z == Verdict::Unbounded
            && labels == (HarmonicRegime::Hyperbolic, BiharmonicRegime::LiouvilleToHarmonic),
        format!("Lambda_1 abs err {lam_err:.2e}, phi_1 {phi}, z {z}, classification ({}, {})", labels.0, labels.1),
    )
}

fn curvature_round_trip() -> Outcome {
    let tol = Tolerances::default();
    let flat = profile_from_curvature(&CurvatureProfile::new("zero", |_| 0.0), 6.0, tol).unwrap();
    let hyp = profile_from_curvature(&CurvatureProfile::new("minus-one", |_| -1.0), 6.0, tol).unwrap();
    let e_flat = rel(flat.phi(5.0).unwrap(), 5.0);
    let e_hyp = rel(hyp.phi(5.0).unwrap(), 5f64.sinh());
    let sphere = profile_from_curvature(&CurvatureProfile::new("plus-one", |_| 1.0), 6.0, tol);
    let (conj_ok, conj) = match sphere {
        Err(Error::ConjugatePoint { r_star }) => ((3.1405..=3.1427).contains(&r_star), format!("r* = {r_star:.6}")),
        other => (false, format!("unexpected {:?}", other.map(|p| p.label))),
    };
    outcome(
        e_flat <= 1e-8 && e_hyp <= 1e-8 && conj_ok,
        format!("phi(5) rel err {e_flat:.2e} (K=0), {e_hyp:.2e} (K=-1); K=+1 conjugate point {conj}"),
    )
}

fn residual_convergence() -> Outcome {
    let steps: [f64; 3] = [0.02, 0.01, 0.005];
    let floor = |h: f64| 100.0 * f64::EPSILON / (h * h);
    let mut worst = (f64::NAN, String::new());
    let mut failures = Vec::new();
    let mut exact = 0;
    let mut checked = 0;
    for name in BUILTIN_NAMES {
        let s = builtin(name, 5.0);
        let mut res = vec![[0.0; 3]; 10];
        for (k, &h) in steps.iter().enumerate() {
            let grid = RadialGrid::uniform(0.5, 4.5, (4.0 / h).round() as usize + 1).unwrap();
            let table = ModeTable::new(&s.metric, &grid).unwrap();
            for m in 0..=4i64 {
                let b = table.biharmonic(m).unwrap();
                res[2 * m as usize][k] = verify_mode_residuals(&s.metric, &table.log_mode(m)).unwrap().max;
                res[2 * m as usize + 1][k] = verify_mode_residuals(&s.metric, &b).unwrap().max;
            }
        }
        for (j, r) in res.iter().enumerate() {
            checked += 1;
            let label = format!("{name} m={} {}", j / 2, if j % 2 == 0 { "harmonic" } else { "biharmonic" });
            if r.iter().zip(&steps).all(|(v, &h)| *v <= floor(h)) {
                exact += 1;
                continue;
            }
            for q in [r[0] / r[1], r[1] / r[2]] {
                if !(3.5..=4.5).contains(&q) {
                    failures.push(format!("{label} ratio {q:.3}"));
                }
                if worst.0.is_nan() || (q - 4.0).abs() > (worst.0 - 4.0).abs() {
                    worst = (q, label.clone());
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checked} mode residuals, {exact} exact to rounding; worst ratio {:.3} ({}){}",
            worst.0,
            worst.1,
            if failures.is_empty() { String::new() } else { format!("; out of range: {}", failures.join(", ")) }
        ),
    )
}

/// Log-log slope of the `m = 0` inner ratio over `[30, 300]`.
fn mean_ratio_slope(profile: &MetricProfile) -> f64 {
    let grid = RadialGrid::geometric(30.0, 300.0, 41).unwrap();
    let w = ModeTable::new(profile, &grid).unwrap().inner_ratio(0).unwrap();
    loglog_slope(grid.nodes(), &w)
}

fn power_curvature_regime() -> Outcome {
    let horizon = 1000.0;
    let params = BuiltinParams { eps: Some(1.0), ..Default::default() };
    let surface = Surface::builtin("power-curvature", &params, horizon, Tolerances::default()).unwrap();
    let slope = mean_ratio_slope(&surface.metric);
    let report = classify(&surface, &ClassifyOptions { horizon, ..Default::default() }).unwrap();
    let z0 = report.evidence.modes.iter().find(|e| e.m == 0).unwrap().z.verdict;
    let z_all = report.evidence.modes.iter().all(|e| e.z.verdict == Verdict::Bounded);
    let label = report.biharmonic_regime;
    outcome(
        slope <= -1.8 && z_all && label == BiharmonicRegime::AdmitsNonharmonicBounded,
        format!("mean-ratio slope {slope:.4} (need <= -1.8); z_0 {z0}, all z bounded: {z_all}; classification {label}"),
    )
}

fn quadratic_curvature_regime() -> Outcome {
    let horizon = 1000.0;
    let params = BuiltinParams { eta: Some(1.0), ..Default::default() };
    let surface = Surface::builtin("quadratic-curvature", &params, horizon, Tolerances::default()).unwrap();
    let slope = mean_ratio_slope(&surface.metric);
    let grid = RadialGrid::doubling(horizon / 2f64.powi(16), horizon, 8).unwrap();
    let z = ModeTable::new(&surface.metric, &grid).unwrap().biharmonic(0).unwrap().z_growth(horizon).unwrap().verdict;
    outcome(slope >= -1.2 && z == Verdict::Unbounded, format!("mean-ratio slope {slope:.4} (need >= -1.2); z {z}"))
}

fn lemma_mechanism() -> Outcome {
    let horizon = 1000.0;
    let interior = CurvatureProfile::blended_tail("log-threshold-interior", |r| -0.5 * log_threshold(r), 2.0)
        .with_tail(TailClass::AboveLogThreshold, 3.0);
    let surfaces = [
        builtin("euclidean", horizon),
        Surface::from_curvature("log-threshold-interior", interior, horizon, Tolerances::default()).unwrap(),
    ];
    let grid = RadialGrid::doubling(horizon / 2f64.powi(16), horizon, 8).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for s in &surfaces {
        let w = ModeTable::new(&s.metric, &grid).unwrap().inner_ratio(1).unwrap();
        let first = grid.nodes().iter().zip(&w).find(|(_, &v)| v > 10.0).map(|(r, _)| *r);
        let phi_up = s.metric.ln_phi(horizon) > s.metric.ln_phi(horizon / 2.0) + 0.5;
        ok &= first.is_some() && phi_up;
        parts.push(match first {
            Some(r) => format!("{}: w_1 > 10 from r = {r:.1}", s.name),
            None => format!("{}: w_1 stays <= 10", s.name),
        });
    }
    let report = classify(&surfaces[0], &ClassifyOptions { horizon, ..Default::default() }).unwrap();
    let labels = (report.harmonic_regime, report.biharmonic_regime);
    ok &= labels == (HarmonicRegime::Parabolic, BiharmonicRegime::Rigid);
    outcome(ok, format!("{}; euclidean classification ({}, {})", parts.join("; "), labels.0, labels.1))
}

fn comparison_suite() -> Outcome {
    let t = comparison_property(VerifyConfig::default().seed, 1000, 1e-9).unwrap();
    outcome(
        t.conclusion_failures == 0,
        format!(
            "{} pairs: {} conclusion failures, {} sampled-hypothesis failures",
            t.pairs, t.conclusion_failures, t.hypothesis_failures
        ),
    )
}

/// `s^(1+ε) ∫_0^s e^{t^(2+ε) - s^(2+ε)} dt` by composite Simpson on a mesh
/// graded towards `t = s`, where the integrand lives.
fn sandwich_simpson(eps: f64, s: f64) -> f64 {
    let p = 2.0 + eps;
    let top = s.powf(p);
    let f = |t: f64| (t.powf(p) - top).exp();
    let width = 1.0 / (p * s.powf(p - 1.0));
    let mut total = 0.0;
    let mut hi = s;
    for k in 0..80 {
        let lo = (s - width * 2f64.powi(k - 10)).max(0.0);
        let n = 200;
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + h * i as f64);
        }
        total += acc * h / 3.0;
        if lo == 0.0 {
            break;
        }
        hi = lo;
    }
    s.powf(1.0 + eps) * total
}

fn sandwich_constant() -> Outcome {
    let mut worst = 0.0f64;
    let mut lib_gap = 0.0f64;
    for eps in [0.0, 1.0] {
        let limit = 1.0 / (2.0 + eps);
        for s in [20.0, 40.0, 80.0, 160.0] {
            let v = sandwich_simpson(eps, s);
            worst = worst.max(rel(v, limit));
            let lib = warped_disk::asymptotics::comparison_sandwich(1.0, eps, s).unwrap();
            lib_gap = lib_gap.max(rel(lib, v));
        }
    }
    outcome(
        worst <= 0.05 && lib_gap <= 1e-8,
        format!("max deviation from 1/((2+eps)A) {worst:.2e} (<= 0.05); library vs Simpson {lib_gap:.1e}"),
    )
}

fn bvp_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = [0.0f64; 3];
    for name in BUILTIN_NAMES {
        let s = builtin(name, 3.0);
        for radius in [1.0, 3.0] {
            let e = bvp_round_trip(&s.metric, radius, 8, 100, &mut rng).unwrap();
            worst[0] = worst[0].max(e.coefficients);
            worst[1] = worst[1].max(e.boundary);
            worst[2] = worst[2].max(e.interior);
        }
    }
    outcome(
        worst[0] <= 1e-6 && worst[1] <= 1e-8 && worst[2] <= 1e-5,
        format!(
            "coefficients {:.1e} (<= 1e-6), boundary {:.1e} (<= 1e-8), interior {:.1e} (<= 1e-5, relative to local magnitude)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn verify_determinism() -> Outcome {
    let cfg = VerifyConfig::default();
    let render = || {
        let rep = verify::run(&cfg).unwrap();
        let mut csv = Vec::new();
        rep.write_checks_csv(&mut csv).unwrap();
        (rep.summary(&cfg), csv)
    };
    let (a, b) = (render(), render());
    let status = a.0.lines().last().unwrap_or("").to_string();
    outcome(a == b, format!("two default verify runs byte-identical: {} ({status})", a == b))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Option<f64>, fn() -> Outcome); 11] = [
        (1, "euclidean oracle", Some(5.0), euclidean_oracle),
        (2, "hyperbolic oracle", Some(10.0), hyperbolic_oracle),
        (3, "curvature round trip", None, curvature_round_trip),
        (4, "residual convergence", None, residual_convergence),
        (5, "power-curvature regime", Some(30.0), power_curvature_regime),
        (6, "quadratic-curvature regime", Some(30.0), quadratic_curvature_regime),
        (7, "inner-ratio mechanism", None, lemma_mechanism),
        (8, "comparison property suite", None, comparison_suite),
        (9, "sandwich constant", None, sandwich_constant),
        (10, "BVP round trip", Some(20.0), bvp_round_trips),
        (11, "verify determinism", None, verify_determinism),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let timely = within_budget(elapsed, budget);
        let pass = out.passed && timely;
        failed += (!pass) as u32;
        let budget_note = budget.map_or(String::new(), |b| format!(" (budget {b} s)"));
        println!(
            "{} criterion {n} [{name}]: {}; {:.2} s{budget_note}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
