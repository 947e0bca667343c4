//! Deterministic invariant suites: stencils, mode residuals, the comparison
//! lemma, BVP round trips and regime evidence on the built-in profiles.

use std::fmt;
use std::io::Write;
use std::ops::ControlFlow;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    classify, comparison_sandwich, sandwich_limit, BiharmonicRegime, ClassifyOptions, HarmonicRegime,
};
use crate::bvp::{analyze_trace, DiskModes, ModeCoefficients};
use crate::error::{Error, Result};
use crate::geometry::{BuiltinParams, MetricProfile, Surface, BUILTIN_NAMES};
use crate::grid::RadialGrid;
use crate::io::fmt_num;
use crate::modes::{verify_mode_residuals, ModeTable};
use crate::ode::{Dopri5, Tolerances};
use crate::operators::{derivatives, sturm_compare, RadialFunctionSamples};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Stencil,
    Residuals,
    Comparison,
    RoundTrip,
    Regimes,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Stencil, Suite::Residuals, Suite::Comparison, Suite::RoundTrip, Suite::Regimes];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Stencil => "stencil",
            Suite::Residuals => "residuals",
            Suite::Comparison => "comparison",
            Suite::RoundTrip => "round_trip",
            Suite::Regimes => "regimes",
        })
    }
}

/// Deliberate defects for exercising the failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// `φ''` reported as `φ'' + φ/10`.
    PhiSecondMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub suites: Vec<Suite>,
    pub seed: u64,
    /// Relative tolerance of the comparison checks.
    pub tol: f64,
    /// Relative tolerance of the mode quadratures.
    pub quad_tol: f64,
    pub comparison_pairs: usize,
    pub horizon: f64,
    pub radii: Vec<f64>,
    pub order: usize,
    pub interior_points: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            seed: 20240611,
            tol: 1e-9,
            quad_tol: 1e-13,
            comparison_pairs: 1000,
            horizon: 1000.0,
            radii: vec![1.0, 3.0],
            order: 8,
            interior_points: 100,
            fault: None,
        }
    }
}

/// Smallest relative tolerance a suite can honour in double precision.
pub const TOLERANCE_FLOOR: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub limit: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyStatus {
    Passed,
    Failed,
    ToleranceInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub status: VerifyStatus,
    pub checks: Vec<Check>,
    pub infeasible: Vec<String>,
}

impl VerifyReport {
    pub fn suite_passed(&self, suite: Suite) -> bool {
        self.checks.iter().filter(|c| c.suite == suite).all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One line per suite plus one per failed check.
    pub fn summary(&self, config: &VerifyConfig) -> String {
        let mut out = String::new();
        for msg in &self.infeasible {
            out.push_str(&format!("tolerance infeasible: {msg}\n"));
        }
        for &suite in &config.suites {
            let checks: Vec<&Check> = self.checks.iter().filter(|c| c.suite == suite).collect();
            if checks.is_empty() {
                continue;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            let tag = if failed == 0 { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {suite}: {} checks, {failed} failed\n", checks.len()));
            for c in checks.iter().filter(|c| !c.passed) {
                out.push_str(&format!("  {}: {} (need {})\n", c.name, fmt_num(c.value), c.limit));
            }
        }
        let status = match self.status {
            VerifyStatus::Passed => "passed",
            VerifyStatus::Failed => "failed",
            VerifyStatus::ToleranceInfeasible => "tolerance_infeasible",
        };
        out.push_str(&format!("status: {status}\n"));
        out
    }

    pub fn write_checks_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["suite", "check", "value", "limit", "passed"]).map_err(err)?;
        for c in &self.checks {
            out.write_record([
                c.suite.to_string(),
                c.name.clone(),
                fmt_num(c.value),
                c.limit.clone(),
                c.passed.to_string(),
            ])
            .map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut infeasible = Vec::new();
    for (name, v) in [("tol", config.tol), ("quad_tol", config.quad_tol)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
        if v < TOLERANCE_FLOOR {
            infeasible.push(format!("{name} = {v:e} is below {TOLERANCE_FLOOR:e}"));
        }
    }
    if !infeasible.is_empty() {
        return Ok(VerifyReport { status: VerifyStatus::ToleranceInfeasible, checks: Vec::new(), infeasible });
    }
    let mut checks = Vec::new();
    for &suite in &config.suites {
        checks.extend(match suite {
            Suite::Stencil => stencil_suite(config)?,
            Suite::Residuals => residual_suite(config)?,
            Suite::Comparison => comparison_suite(config)?,
            Suite::RoundTrip => round_trip_suite(config)?,
            Suite::Regimes => regime_suite(config)?,
        });
    }
    let status = if checks.iter().all(|c| c.passed) { VerifyStatus::Passed } else { VerifyStatus::Failed };
    Ok(VerifyReport { status, checks, infeasible })
}

/// Step sizes of the refinement study on `[0.5, 4.5]`.
pub const REFINEMENT_STEPS: [f64; 3] = [0.02, 0.01, 0.005];
pub const REFINEMENT_INTERVAL: (f64, f64) = (0.5, 4.5);
/// Accepted residual ratio per halving of `h`.
pub const SECOND_ORDER_RANGE: (f64, f64) = (3.5, 4.5);

/// Rounding floor of a scaled second-difference residual at step `h`.
pub fn rounding_floor(h: f64) -> f64 {
    100.0 * f64::EPSILON / (h * h)
}

/// Outcome of a three-level refinement: the two ratios, or exactness at the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub residuals: [f64; 3],
    pub ratios: [f64; 2],
    pub exact: bool,
    pub passed: bool,
}

pub fn judge_refinement(residuals: [f64; 3], steps: [f64; 3]) -> Refinement {
    let exact = residuals.iter().zip(&steps).all(|(r, &h)| *r <= rounding_floor(h));
    let ratios = [residuals[0] / residuals[1], residuals[1] / residuals[2]];
    let (lo, hi) = SECOND_ORDER_RANGE;
    let passed = exact || ratios.iter().all(|q| (lo..=hi).contains(q));
    Refinement { residuals, ratios, exact, passed }
}

fn refinement_grid(h: f64) -> Result<RadialGrid> {
    let (a, b) = REFINEMENT_INTERVAL;
    RadialGrid::uniform(a, b, ((b - a) / h).round() as usize + 1)
}

fn refinement_surfaces(config: &VerifyConfig) -> Result<Vec<(String, MetricProfile)>> {
    BUILTIN_NAMES
        .iter()
        .map(|&name| {
            let s =
                Surface::builtin(name, &BuiltinParams::default(), REFINEMENT_INTERVAL.1 + 0.5, Tolerances::default())?;
            let metric = match config.fault {
                Some(Fault::PhiSecondMismatch) => faulty(&s.metric),
                None => s.metric,
            };
            Ok((name.to_string(), metric))
        })
        .collect()
}

fn faulty(p: &MetricProfile) -> MetricProfile {
    let (a, b, c) = (p.clone(), p.clone(), p.clone());
    MetricProfile::analytic(
        format!("{} (faulty)", p.label),
        p.r_max(),
        move |r| a.ln_phi(r).exp(),
        move |r| b.dlog(r) * b.ln_phi(r).exp(),
        move |r| (c.second_ratio(r) + 0.1) * c.ln_phi(r).exp(),
    )
}

fn refinement_check(suite: Suite, name: String, r: Refinement) -> Check {
    let value = if r.exact {
        r.residuals[2]
    } else if (r.ratios[0] - 4.0).abs() > (r.ratios[1] - 4.0).abs() {
        r.ratios[0]
    } else {
        r.ratios[1]
    };
    let limit = if r.exact { "rounding floor".to_string() } else { "ratio in [3.5, 4.5]".to_string() };
    Check { suite, name, value, limit, passed: r.passed }
}

/// Second differences of sampled φ against the profile's own φ''.
fn stencil_suite(config: &VerifyConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, p) in refinement_surfaces(config)? {
        let mut res = [0.0; 3];
        for (k, &h) in REFINEMENT_STEPS.iter().enumerate() {
            let grid = refinement_grid(h)?;
            let nodes = grid.nodes();
            let phi: Vec<f64> = nodes.iter().map(|&r| p.ln_phi(r).exp()).collect();
            let (_, d2) = derivatives(nodes, &phi);
            let n = nodes.len();
            res[k] = (1..n - 1)
                .map(|i| (d2[i] - p.second_ratio(nodes[i]) * phi[i]).abs() / phi[i].max(1.0))
                .fold(0.0, f64::max);
        }
        checks.push(refinement_check(Suite::Stencil, format!("{name} phi''"), judge_refinement(res, REFINEMENT_STEPS)));
    }
    Ok(checks)
}

/// Mode residual convergence for `|m| ≤ 4`.
fn residual_suite(config: &VerifyConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, p) in refinement_surfaces(config)? {
        let mut res = [[0.0; 3]; 10];
        for (k, &h) in REFINEMENT_STEPS.iter().enumerate() {
            let grid = refinement_grid(h)?;
            let table = ModeTable::with_tolerance(&p, &grid, config.quad_tol)?;
            let rows = (0..=4i64)
                .into_par_iter()
                .map(|m| {
                    let b = table.biharmonic(m)?;
                    Ok([verify_mode_residuals(&p, &table.log_mode(m))?.max, verify_mode_residuals(&p, &b)?.max])
                })
                .collect::<Result<Vec<_>>>()?;
            for (m, pair) in rows.iter().enumerate() {
                res[2 * m][k] = pair[0];
                res[2 * m + 1][k] = pair[1];
            }
        }
        for (j, r) in res.iter().enumerate() {
            let kind = if j % 2 == 0 { "harmonic" } else { "biharmonic" };
            let label = format!("{name} m={} {kind}", j / 2);
            checks.push(refinement_check(Suite::Residuals, label, judge_refinement(*r, REFINEMENT_STEPS)));
        }
    }
    Ok(checks)
}

/// A randomized pair `f'' = q_f f`, `h'' = q_h h` with `q_f ≤ q_h` and
/// `f'/f ≤ h'/h` at the left end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonPair {
    pub a0: f64,
    pub a1: f64,
    pub omega: f64,
    pub phase: f64,
    pub b0: f64,
    pub b1: f64,
    pub nu: f64,
    pub slope_f: f64,
    pub slope_h: f64,
}

impl ComparisonPair {
    pub fn random(rng: &mut impl Rng) -> Self {
        let a0 = rng.gen_range(0.0..2.0);
        let equal = rng.gen_bool(0.1);
        let slope_f = rng.gen_range(-0.5..1.0);
        Self {
            a0,
            a1: rng.gen_range(-a0..=a0),
            omega: rng.gen_range(0.5..6.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            b0: if equal { 0.0 } else { rng.gen_range(0.0..1.0) },
            b1: if equal { 0.0 } else { rng.gen_range(0.0..1.0) },
            nu: rng.gen_range(0.5..6.0),
            slope_f,
            slope_h: if equal { slope_f } else { slope_f + rng.gen_range(0.0..0.5) },
        }
    }

    pub fn q_f(&self, r: f64) -> f64 {
        self.a0 + self.a1 * (self.omega * r + self.phase).cos()
    }

    pub fn q_h(&self, r: f64) -> f64 {
        self.q_f(r) + self.b0 + self.b1 * (self.nu * r).sin().powi(2)
    }
}

/// Samples of the solution of `f'' = q f`, `f(a) = 1`, `f'(a) = slope`,
/// integrated in `(log f, f'/f)` form node to node.
pub fn sample_linear_ode(q: impl Fn(f64) -> f64, slope: f64, grid: &RadialGrid) -> Result<Vec<f64>> {
    let solver = Dopri5::new(Tolerances::new(1e-13, 1e-15)?);
    let rhs = |t: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
        dy[0] = y[1];
        dy[1] = q(t) - y[1] * y[1];
    };
    let nodes = grid.nodes();
    let mut state = [0.0, slope];
    let mut out = Vec::with_capacity(nodes.len());
    out.push(1.0);
    for w in nodes.windows(2) {
        state = solver.integrate(&rhs, w[0], state, w[1], |_, _, _| ControlFlow::Continue(()))?.y;
        out.push(state[0].exp());
    }
    Ok(out)
}

pub const COMPARISON_INTERVAL: (f64, f64) = (1.0, 3.0);
pub const COMPARISON_NODES: usize = 101;

/// Counts of pairs whose sampled hypotheses or conclusion failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonTally {
    pub pairs: usize,
    pub hypothesis_failures: usize,
    pub conclusion_failures: usize,
}

pub fn comparison_property(seed: u64, pairs: usize, tol: f64) -> Result<ComparisonTally> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<ComparisonPair> = (0..pairs).map(|_| ComparisonPair::random(&mut rng)).collect();
    let grid = RadialGrid::uniform(COMPARISON_INTERVAL.0, COMPARISON_INTERVAL.1, COMPARISON_NODES)?;
    let outcomes = specs
        .par_iter()
        .map(|p| {
            let f = sample_linear_ode(|r| p.q_f(r), p.slope_f, &grid)?;
            let h = sample_linear_ode(|r| p.q_h(r), p.slope_h, &grid)?;
            let rep = sturm_compare(
                &RadialFunctionSamples::linear(grid.clone(), f)?,
                &RadialFunctionSamples::linear(grid.clone(), h)?,
                tol,
            )?;
            Ok((rep.hypotheses_hold(), rep.conclusion_holds()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTally {
        pairs,
        hypothesis_failures: outcomes.iter().filter(|o| !o.0).count(),
        conclusion_failures: outcomes.iter().filter(|o| !o.1).count(),
    })
}

fn comparison_suite(config: &VerifyConfig) -> Result<Vec<Check>> {
    let t = comparison_property(config.seed, config.comparison_pairs, config.tol)?;
    let mut checks = vec![
        Check {
            suite: Suite::Comparison,
            name: format!("{} pairs: sampled hypotheses", t.pairs),
            value: t.hypothesis_failures as f64,
            limit: "0 failures".into(),
            passed: t.hypothesis_failures == 0,
        },
        Check {
            suite: Suite::Comparison,
            name: format!("{} pairs: f'/f <= h'/h", t.pairs),
            value: t.conclusion_failures as f64,
            limit: "0 failures".into(),
            passed: t.conclusion_failures == 0,
        },
    ];
    for eps in [0.0, 1.0] {
        for s in [20.0, 40.0] {
            let v = comparison_sandwich(1.0, eps, s)?;
            let rel = (v / sandwich_limit(1.0, eps) - 1.0).abs();
            checks.push(Check {
                suite: Suite::Comparison,
                name: format!("sandwich eps={eps} s={s}"),
                value: rel,
                limit: "<= 0.05".into(),
                passed: rel <= 0.05,
            });
        }
    }
    Ok(checks)
}

/// Errors of one synthesized BVP round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripErrors {
    /// Largest relative coefficient error.
    pub coefficients: f64,
    /// Largest boundary-coefficient mismatch, relative to the boundary size.
    pub boundary: f64,
    /// Largest interior error, relative to `Σ|c_m φ_m| + |d_m ψ_m|` at each point.
    pub interior: f64,
}

pub fn random_coefficients(rng: &mut impl Rng, radius: f64, order: usize) -> Result<ModeCoefficients> {
    let n = 2 * order + 1;
    let mut draw = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let c: Vec<Complex64> = (0..n).map(|_| draw()).collect();
    let d: Vec<Complex64> = (0..n).map(|_| draw()).collect();
    ModeCoefficients::from_plain(radius, order, &c, &d)
}

/// Synthesize traces from random coefficients, solve, and compare; interior
/// values are checked against modes computed directly at the sample radii.
pub fn bvp_round_trip(
    profile: &MetricProfile,
    radius: f64,
    order: usize,
    points: usize,
    rng: &mut impl Rng,
) -> Result<RoundTripErrors> {
    let truth = random_coefficients(rng, radius, order)?;
    let modes = DiskModes::new(profile, radius, order)?;
    let spectrum = modes.boundary_spectrum(&truth)?;
    let n = (2 * order + 2).next_power_of_two().max(16);
    let trace = spectrum.synthesize(radius, n)?;
    let analyzed = analyze_trace(&trace, order)?;
    let solved = modes.solve(&analyzed)?;

    let mut coefficients = 0.0f64;
    for (a, b) in solved.entries.iter().zip(&truth.entries) {
        coefficients = coefficients.max(a.c.relative_difference(b.c)).max(a.d.relative_difference(b.d));
    }
    let implied = modes.boundary_spectrum(&solved)?;
    let size = spectrum.alpha.iter().chain(&spectrum.beta).fold(1.0f64, |a, z| a.max(z.norm()));
    let boundary = implied
        .modes()
        .map(|m| (implied.alpha(m) - spectrum.alpha(m)).norm().max((implied.beta(m) - spectrum.beta(m)).norm()))
        .fold(0.0f64, f64::max)
        / size;

    let mut pts: Vec<(f64, f64)> =
        (0..points).map(|_| (radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let grid = RadialGrid::from_nodes(pts.iter().map(|p| p.0).collect())?;
    let table = ModeTable::new(profile, &grid)?;
    let direct = (0..=order as i64).into_par_iter().map(|m| table.biharmonic(m)).collect::<Result<Vec<_>>>()?;
    let mut interior = 0.0f64;
    for (i, &(r, theta)) in pts.iter().enumerate() {
        let mut exact = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        for e in &truth.entries {
            let b = &direct[e.m.unsigned_abs() as usize];
            let term = e.c.to_complex() * b.lambda[i].exp() + e.d.to_complex() * b.log_psi[i].exp();
            scale += term.norm();
            exact += term * Complex64::from_polar(1.0, e.m as f64 * theta);
        }
        let got = modes.evaluate(&solved, r, theta)?.value;
        interior = interior.max((got - exact).norm() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(RoundTripErrors { coefficients, boundary, interior })
}

pub const ROUND_TRIP_COEFFICIENT_TOL: f64 = 1e-6;
pub const ROUND_TRIP_BOUNDARY_TOL: f64 = 1e-8;
pub const ROUND_TRIP_INTERIOR_TOL: f64 = 1e-5;

fn round_trip_suite(config: &VerifyConfig) -> Result<Vec<Check>> {
    let r_max = config.radii.iter().fold(1.0f64, |a, &b| a.max(b));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut checks = Vec::new();
    for name in BUILTIN_NAMES {
        let s = Surface::builtin(name, &BuiltinParams::default(), r_max, Tolerances::default())?;
        for &radius in &config.radii {
            let e = bvp_round_trip(&s.metric, radius, config.order, config.interior_points, &mut rng)?;
            for (what, value, tol) in [
                ("coefficients", e.coefficients, ROUND_TRIP_COEFFICIENT_TOL),
                ("boundary", e.boundary, ROUND_TRIP_BOUNDARY_TOL),
                ("interior", e.interior, ROUND_TRIP_INTERIOR_TOL),
            ] {
                checks.push(Check {
                    suite: Suite::RoundTrip,
                    name: format!("{name} R={radius} {what}"),
                    value,
                    limit: format!("<= {tol:e}"),
                    passed: value <= tol,
                });
            }
        }
    }
    Ok(checks)
}

/// Labels the built-in families are expected to receive.
pub fn expected_regimes(name: &str) -> Option<(HarmonicRegime, BiharmonicRegime)> {
    use BiharmonicRegime as B;
    use HarmonicRegime as H;
    Some(match name {
        "euclidean" => (H::Parabolic, B::Rigid),
        "hyperbolic" => (H::Hyperbolic, B::LiouvilleToHarmonic),
        "log-threshold" => (H::Hyperbolic, B::Undetermined),
        "power-curvature" => (H::Hyperbolic, B::AdmitsNonharmonicBounded),
        "quadratic-curvature" => (H::Hyperbolic, B::LiouvilleToHarmonic),
        _ => return None,
    })
}

fn regime_suite(config: &VerifyConfig) -> Result<Vec<Check>> {
    let opts = ClassifyOptions { horizon: config.horizon, ..Default::default() };
    let mut checks = Vec::new();
    for name in BUILTIN_NAMES {
        let s = Surface::builtin(name, &BuiltinParams::default(), config.horizon, Tolerances::default())?;
        let report = classify(&s, &opts)?;
        let (h, b) = expected_regimes(name).expect("built-in");
        checks.push(Check {
            suite: Suite::Regimes,
            name: format!("{name} harmonic {}", report.harmonic_regime),
            value: (report.harmonic_regime == h) as u8 as f64,
            limit: format!("{h}"),
            passed: report.harmonic_regime == h,
        });
        checks.push(Check {
            suite: Suite::Regimes,
            name: format!("{name} biharmonic {}", report.biharmonic_regime),
            value: (report.biharmonic_regime == b) as u8 as f64,
            limit: format!("{b}"),
            passed: report.biharmonic_regime == b,
        });
    }
    Ok(checks)
}
