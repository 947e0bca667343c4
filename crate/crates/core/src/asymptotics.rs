//! Regime classification: declared curvature tails checked on samples,
//! cross-examined by finite-horizon growth of the modes.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{log_threshold, CurvatureProfile, MetricProfile, Surface, TailCheck, TailClass};
use crate::grid::RadialGrid;
use crate::modes::{exponent_growth_verdict, GrowthCheck, ModeTable, Verdict};
use crate::quad::{integrate, QuadSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicRegime {
    Parabolic,
    Hyperbolic,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiharmonicRegime {
    Rigid,
    LiouvilleToHarmonic,
    AdmitsNonharmonicBounded,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    DeclaredTail,
    Numeric,
    Both,
    /// No route produced a label.
    None,
}

impl fmt::Display for HarmonicRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HarmonicRegime::Parabolic => "parabolic",
            HarmonicRegime::Hyperbolic => "hyperbolic",
            HarmonicRegime::Undetermined => "undetermined",
        })
    }
}

impl fmt::Display for BiharmonicRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiharmonicRegime::Rigid => "rigid",
            BiharmonicRegime::LiouvilleToHarmonic => "liouville_to_harmonic",
            BiharmonicRegime::AdmitsNonharmonicBounded => "admits_nonharmonic_bounded",
            BiharmonicRegime::Undetermined => "undetermined",
        })
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::DeclaredTail => "declared_tail",
            Route::Numeric => "numeric",
            Route::Both => "both",
            Route::None => "none",
        })
    }
}

/// Samples of `φ'/φ` at `R/2^k` and an extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub last: f64,
    /// Aitken extrapolation from the last three samples.
    pub extrapolated: f64,
    pub monotone: bool,
}

pub fn estimate_log_derivative_limit(profile: &MetricProfile, horizon: f64) -> Result<LimitEstimate> {
    if !(horizon > 0.0) || horizon > profile.r_max() * (1.0 + 1e-12) {
        return Err(Error::Domain { r: horizon, r_max: profile.r_max() });
    }
    let radii: Vec<f64> = (0..8).rev().map(|k| horizon / 2f64.powi(k)).collect();
    let values = radii.iter().map(|&r| profile.log_derivative(r)).collect::<Result<Vec<_>>>()?;
    let n = values.len();
    let (x0, x1, x2) = (values[n - 3], values[n - 2], values[n - 1]);
    let denom = (x2 - x1) - (x1 - x0);
    let extrapolated = if denom.abs() > 1e-14 * x2.abs().max(1e-300) && (x2 - x1) * (x1 - x0) > 0.0 {
        x2 - (x2 - x1) * (x2 - x1) / denom
    } else {
        x2
    };
    let inc = values.windows(2).all(|w| w[1] >= w[0]);
    let dec = values.windows(2).all(|w| w[1] <= w[0]);
    Ok(LimitEstimate { radii, last: x2, values, extrapolated, monotone: inc || dec })
}

/// Largest log-log RMS residual accepted by [`fit_tail_exponent`].
pub const FIT_RMS_LIMIT: f64 = 0.05;

/// Least-squares fits of `log(-K)` against `log r` and against `log(1/(r² log r))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub window: (f64, f64),
    pub samples: usize,
    /// `-K ≈ power_coefficient · r^power_exponent`.
    pub power_exponent: f64,
    pub power_coefficient: f64,
    pub power_rms: f64,
    /// `-K ≈ template_coefficient · (r² log r)^(-template_slope)`.
    pub template_slope: f64,
    pub template_coefficient: f64,
    pub template_rms: f64,
    /// Matched class, or `None` when no fit is good enough or the match lies
    /// in a range no theorem covers.
    pub class: Option<TailClass>,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// Log-log slope of `values` against `radii` by least squares.
pub fn loglog_slope(radii: &[f64], values: &[f64]) -> f64 {
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    ols(&x, &y).0
}

pub fn fit_tail_exponent(k: &CurvatureProfile, window: (f64, f64), samples: usize) -> Result<TailFit> {
    let (lo, hi) = window;
    if samples < 16 {
        return Err(Error::InvalidParameter(format!("tail fit needs at least 16 samples, got {samples}")));
    }
    if !(lo > 1.0) || !(hi > lo) {
        return Err(Error::InvalidParameter(format!("tail fit window must satisfy 1 < lo < hi, got [{lo}, {hi}]")));
    }
    let grid = RadialGrid::geometric(lo, hi, samples)?;
    let mut lr = Vec::with_capacity(samples);
    let mut lt = Vec::with_capacity(samples);
    let mut lk = Vec::with_capacity(samples);
    for &r in grid.nodes() {
        let kv = k.eval(r);
        if !(kv < 0.0) {
            return Err(Error::NotClassifiable { r, k: kv });
        }
        lr.push(r.ln());
        lt.push(log_threshold(r).ln());
        lk.push((-kv).ln());
    }
    let (p, a, p_rms) = ols(&lr, &lk);
    let (q, c, q_rms) = ols(&lt, &lk);
    let template_fits = q_rms <= FIT_RMS_LIMIT && (q - 1.0).abs() <= 0.1;
    let power_fits = p_rms <= FIT_RMS_LIMIT;
    let mut class = if template_fits && (!power_fits || q_rms <= p_rms) {
        let coef = c.exp();
        if coef <= 1.0 {
            Some(TailClass::AboveLogThreshold)
        } else {
            Some(TailClass::BelowLogThreshold { eps: coef - 1.0 })
        }
    } else if power_fits && p > 2.05 {
        // halve the excess so the declared bound has room below the fit
        Some(TailClass::BelowPower { eps: 0.5 * (p - 2.0) })
    } else if power_fits && (p - 2.0).abs() <= 0.05 {
        Some(TailClass::Between { eta: 2.0 * a.exp(), eps: 1.0 })
    } else {
        None
    };
    // A matched class must also hold on the samples themselves.
    if let Some(c) = &class {
        if !grid.nodes().iter().all(|&r| c.holds_at(r, k.eval(r))) {
            class = None;
        }
    }
    Ok(TailFit {
        window,
        samples,
        power_exponent: p,
        power_coefficient: a.exp(),
        power_rms: p_rms,
        template_slope: q,
        template_coefficient: c.exp(),
        template_rms: q_rms,
        class,
    })
}

/// Verdicts for one angular frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEvidence {
    pub m: i64,
    pub phi_m: GrowthCheck,
    pub z: GrowthCheck,
    pub psi: GrowthCheck,
    /// Log-log slope of the inner ratio `w_m` over the last decade.
    pub ratio_slope: f64,
    /// Largest `w_m` seen on the grid.
    pub max_inner_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericEvidence {
    pub horizon: f64,
    pub modes: Vec<ModeEvidence>,
    /// Growth of `log φ` itself: unbounded means `φ → ∞`.
    pub phi_growth: GrowthCheck,
    /// Log-log slope of the mean-integral ratio over the last decade.
    pub mean_ratio_slope: f64,
}

/// Nodes per doubling of the evidence grid.
pub const EVIDENCE_PER_DOUBLING: usize = 8;

/// Geometric grid from about 0.01 to `horizon` through every `horizon/2^k`.
pub fn evidence_grid(horizon: f64) -> Result<RadialGrid> {
    let octaves = (horizon / 0.01).log2().ceil().max(4.0);
    RadialGrid::doubling(horizon / 2f64.powf(octaves), horizon, EVIDENCE_PER_DOUBLING)
}

pub fn numeric_evidence(profile: &MetricProfile, ms: &[i64], horizon: f64) -> Result<NumericEvidence> {
    if ms.is_empty() {
        return Err(Error::InvalidParameter("numeric evidence needs at least one m".into()));
    }
    let grid = evidence_grid(horizon)?;
    let table = ModeTable::new(profile, &grid)?;
    let decade: Vec<usize> = (0..grid.len()).filter(|&i| grid.nodes()[i] >= horizon / 10.0 * (1.0 - 1e-12)).collect();
    let radii: Vec<f64> = decade.iter().map(|&i| grid.nodes()[i]).collect();
    let mut ms_all: Vec<i64> = ms.to_vec();
    if !ms_all.contains(&0) {
        ms_all.push(0);
    }
    let modes = table.biharmonic_modes(&ms_all)?;
    let mut evidence = Vec::with_capacity(ms.len());
    let mut mean_ratio_slope = f64::NAN;
    for b in &modes {
        let w: Vec<f64> = decade.iter().map(|&i| b.w[i]).collect();
        let slope = loglog_slope(&radii, &w);
        if b.m == 0 {
            mean_ratio_slope = slope;
        }
        if ms.contains(&b.m) {
            evidence.push(ModeEvidence {
                m: b.m,
                phi_m: b.phi_growth(horizon)?,
                z: b.z_growth(horizon)?,
                psi: b.psi_growth(horizon)?,
                ratio_slope: slope,
                max_inner_ratio: b.w.iter().fold(0.0, |a: f64, &v| a.max(v)),
            });
        }
    }
    let rs = [horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon];
    let phi_growth = exponent_growth_verdict(rs, rs.map(|r| profile.ln_phi(r)));
    Ok(NumericEvidence { horizon, modes: evidence, phi_growth, mean_ratio_slope })
}

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub horizon: f64,
    pub m_max: i64,
    /// Samples for checking a declared tail.
    pub tail_samples: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { horizon: 1000.0, m_max: 8, tail_samples: 256 }
    }
}

/// Outcome of the declared (or fitted) tail route.
#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredRoute {
    pub class: Option<TailClass>,
    pub from_radius: f64,
    /// `None` when the class came from a fit.
    pub check: Option<TailCheck>,
    pub fit: Option<TailFit>,
    /// Why the route could not be used, if it could not.
    pub note: Option<String>,
    pub phi_nondecreasing: bool,
    pub harmonic: HarmonicRegime,
    pub biharmonic: BiharmonicRegime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub surface: String,
    pub horizon: f64,
    pub harmonic_regime: HarmonicRegime,
    pub biharmonic_regime: BiharmonicRegime,
    pub route: Route,
    pub harmonic_route: Route,
    pub biharmonic_route: Route,
    pub declared: DeclaredRoute,
    pub numeric_harmonic: HarmonicRegime,
    pub numeric_biharmonic: BiharmonicRegime,
    pub log_derivative: LimitEstimate,
    pub evidence: NumericEvidence,
}

fn sample_radii(from: f64, to: f64, n: usize) -> Vec<f64> {
    let from = from.max(1e-6);
    if to <= from {
        return vec![to];
    }
    let ratio = (to / from).ln() / n as f64;
    (1..=n).map(|i| if i == n { to } else { from * (ratio * i as f64).exp() }).collect()
}

fn declared_route(surface: &Surface, evidence: &NumericEvidence, opts: &ClassifyOptions) -> DeclaredRoute {
    let horizon = opts.horizon;
    let k = &surface.curvature;
    let mut route = DeclaredRoute {
        class: None,
        from_radius: horizon / 10.0,
        check: None,
        fit: None,
        note: None,
        phi_nondecreasing: false,
        harmonic: HarmonicRegime::Undetermined,
        biharmonic: BiharmonicRegime::Undetermined,
    };
    if let Some(desc) = &k.tail {
        route.from_radius = desc.from_radius;
        let check = k.verify_tail(horizon, opts.tail_samples).expect("descriptor present");
        if check.holds {
            route.class = Some(desc.class.clone());
        } else {
            route.note = Some(match check.first_violation {
                Some((r, kv)) => format!("declared tail fails at r = {r:e} (K = {kv:e})"),
                None => "horizon does not reach the declared tail".into(),
            });
        }
        route.check = Some(check);
    } else {
        match fit_tail_exponent(k, (horizon / 10.0, horizon), 32) {
            Ok(fit) => {
                if fit.class.is_none() {
                    route.note = Some("no tail class matches the fitted curvature".into());
                }
                route.class = fit.class.clone();
                route.fit = Some(fit);
            }
            Err(e) => route.note = Some(format!("tail fit refused: {e}")),
        }
    }
    let Some(class) = route.class.clone() else {
        return route;
    };
    let radii = sample_radii(route.from_radius, horizon, opts.tail_samples);
    route.phi_nondecreasing = radii.iter().all(|&r| surface.metric.dlog(r) >= 0.0);
    let phi_unbounded = evidence.phi_growth.verdict == Verdict::Unbounded;
    let below_threshold =
        |eps: f64| eps > 0.0 && radii.iter().all(|&r| r > 1.0 && k.eval(r) <= -(1.0 + eps) * log_threshold(r));
    match class {
        TailClass::AboveLogThreshold => {
            if phi_unbounded {
                route.harmonic = HarmonicRegime::Parabolic;
                route.biharmonic = BiharmonicRegime::Rigid;
            } else {
                route.note = Some("φ not seen to grow without bound; the parabolic branch needs φ → ∞".into());
            }
        }
        TailClass::BelowLogThreshold { eps } => {
            if below_threshold(eps) {
                route.harmonic = HarmonicRegime::Hyperbolic;
            }
        }
        TailClass::Between { eps, .. } => {
            if below_threshold(eps) {
                route.harmonic = HarmonicRegime::Hyperbolic;
            }
            if route.phi_nondecreasing {
                route.biharmonic = BiharmonicRegime::LiouvilleToHarmonic;
            }
        }
        TailClass::BelowPower { eps } => {
            if below_threshold(eps) {
                route.harmonic = HarmonicRegime::Hyperbolic;
            }
            if route.phi_nondecreasing {
                route.biharmonic = BiharmonicRegime::AdmitsNonharmonicBounded;
            }
        }
        TailClass::Custom(_) => {
            route.note = Some("custom tail classes carry no theorem".into());
        }
    }
    route
}

fn all_verdicts(modes: &[ModeEvidence], pick: impl Fn(&ModeEvidence) -> Verdict, v: Verdict) -> bool {
    !modes.is_empty() && modes.iter().all(|e| pick(e) == v)
}

fn numeric_route(evidence: &NumericEvidence) -> (HarmonicRegime, BiharmonicRegime) {
    let nonzero: Vec<ModeEvidence> = evidence.modes.iter().filter(|e| e.m != 0).cloned().collect();
    let phi_bounded = all_verdicts(&nonzero, |e| e.phi_m.verdict, Verdict::Bounded);
    let phi_unbounded = all_verdicts(&nonzero, |e| e.phi_m.verdict, Verdict::Unbounded);
    let z_bounded = all_verdicts(&evidence.modes, |e| e.z.verdict, Verdict::Bounded);
    let z_unbounded = all_verdicts(&evidence.modes, |e| e.z.verdict, Verdict::Unbounded);
    let psi_bounded = all_verdicts(&evidence.modes, |e| e.psi.verdict, Verdict::Bounded);
    let harmonic = if phi_bounded {
        HarmonicRegime::Hyperbolic
    } else if phi_unbounded {
        HarmonicRegime::Parabolic
    } else {
        HarmonicRegime::Undetermined
    };
    let biharmonic = if phi_unbounded && z_unbounded {
        BiharmonicRegime::Rigid
    } else if phi_bounded && z_unbounded {
        BiharmonicRegime::LiouvilleToHarmonic
    } else if phi_bounded && z_bounded && psi_bounded {
        BiharmonicRegime::AdmitsNonharmonicBounded
    } else {
        BiharmonicRegime::Undetermined
    };
    (harmonic, biharmonic)
}

fn merge<T: Copy + PartialEq>(declared: T, numeric: T, undetermined: T) -> (T, Route) {
    match (declared == undetermined, numeric == undetermined) {
        (true, true) => (undetermined, Route::None),
        (false, true) => (declared, Route::DeclaredTail),
        (true, false) => (numeric, Route::Numeric),
        (false, false) if declared == numeric => (declared, Route::Both),
        // the routes disagree: refuse to pick one
        (false, false) => (undetermined, Route::Both),
    }
}

pub fn classify(surface: &Surface, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    if opts.m_max < 1 {
        return Err(Error::InvalidParameter(format!("m_max must be at least 1, got {}", opts.m_max)));
    }
    let horizon = opts.horizon;
    let log_derivative = estimate_log_derivative_limit(&surface.metric, horizon)?;
    let ms: Vec<i64> = (0..=opts.m_max).collect();
    let evidence = numeric_evidence(&surface.metric, &ms, horizon)?;
    let declared = declared_route(surface, &evidence, opts);
    let (numeric_harmonic, numeric_biharmonic) = numeric_route(&evidence);

    let (harmonic_regime, harmonic_route) = merge(declared.harmonic, numeric_harmonic, HarmonicRegime::Undetermined);
    let (mut biharmonic_regime, mut biharmonic_route) =
        merge(declared.biharmonic, numeric_biharmonic, BiharmonicRegime::Undetermined);
    // Rigidity and bounded non-harmonic functions are claims about the modes
    // themselves; without matching numeric verdicts they are withheld.
    if matches!(biharmonic_regime, BiharmonicRegime::Rigid | BiharmonicRegime::AdmitsNonharmonicBounded)
        && numeric_biharmonic != biharmonic_regime
    {
        biharmonic_regime = BiharmonicRegime::Undetermined;
        biharmonic_route = Route::None;
    }
    let route = match (harmonic_route, biharmonic_route) {
        (Route::None, r) | (r, Route::None) => r,
        (a, b) if a == b => a,
        _ => Route::Both,
    };
    Ok(ClassificationReport {
        surface: surface.name.clone(),
        horizon,
        harmonic_regime,
        biharmonic_regime,
        route,
        harmonic_route,
        biharmonic_route,
        declared,
        numeric_harmonic,
        numeric_biharmonic,
        log_derivative,
        evidence,
    })
}

pub fn classify_harmonic(surface: &Surface, horizon: f64) -> Result<HarmonicRegime> {
    Ok(classify(surface, &ClassifyOptions { horizon, ..Default::default() })?.harmonic_regime)
}

pub fn classify_biharmonic(surface: &Surface, horizon: f64) -> Result<BiharmonicRegime> {
    Ok(classify(surface, &ClassifyOptions { horizon, ..Default::default() })?.biharmonic_regime)
}

/// `s^(1+ε) ∫_0^s exp(A (t^(2+ε) - s^(2+ε))) dt`, the comparison-function
/// product whose limit is `1/((2+ε) A)`.
pub fn comparison_sandwich(a: f64, eps: f64, s: f64) -> Result<f64> {
    if !(a > 0.0) || !(eps >= 0.0) || !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("sandwich needs A > 0, ε ≥ 0, s > 0; got {a}, {eps}, {s}")));
    }
    let p = 2.0 + eps;
    let top = s.powf(p);
    // The integrand is below e^-60 of its peak left of `lower`.
    let lower = (top - 60.0 / a).max(0.0).powf(1.0 / p);
    let q = integrate(|t| (a * (t.powf(p) - top)).exp(), lower, s, QuadSettings::rel(1e-12))?;
    Ok(s.powf(1.0 + eps) * q.value)
}

pub fn sandwich_limit(a: f64, eps: f64) -> f64 {
    1.0 / ((2.0 + eps) * a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_derivative_limits() {
        let e = estimate_log_derivative_limit(&MetricProfile::hyperbolic(), 100.0).unwrap();
        assert!((e.extrapolated - 1.0).abs() < 1e-12);
        let e = estimate_log_derivative_limit(&MetricProfile::euclidean(), 1000.0).unwrap();
        assert!(e.extrapolated.abs() < 1e-9 && e.monotone);
    }

    #[test]
    fn fits_match_synthetic_tails() {
        let fit = fit_tail_exponent(&CurvatureProfile::new("r4", |r| -r.powi(4)), (100.0, 1000.0), 32).unwrap();
        assert!((fit.power_exponent - 4.0).abs() < 0.05);
        assert!(matches!(fit.class, Some(TailClass::BelowPower { .. })));

        let fit = fit_tail_exponent(&CurvatureProfile::new("flat-ish", |_| -1.0), (100.0, 1000.0), 32).unwrap();
        assert!(fit.power_exponent.abs() < 1e-12);
        assert_eq!(fit.class, None);

        let k = CurvatureProfile::new("thr", |r| -2.0 * log_threshold(r));
        let fit = fit_tail_exponent(&k, (100.0, 1000.0), 32).unwrap();
        assert!((fit.template_coefficient - 2.0).abs() < 1e-9);
        assert!(matches!(fit.class, Some(TailClass::BelowLogThreshold { eps }) if (eps - 1.0).abs() < 1e-9));
    }

    #[test]
    fn fit_refuses_nonnegative_curvature() {
        let r = fit_tail_exponent(&CurvatureProfile::new("flat", |_| 0.0), (100.0, 1000.0), 32);
        assert!(matches!(r, Err(Error::NotClassifiable { .. })));
        assert!(fit_tail_exponent(&CurvatureProfile::new("k", |_| -1.0), (100.0, 1000.0), 8).is_err());
    }

    #[test]
    fn sandwich_approaches_limit() {
        for (eps, s) in [(0.0, 20.0), (1.0, 20.0), (1.0, 200.0)] {
            let v = comparison_sandwich(1.0, eps, s).unwrap();
            assert!((v / sandwich_limit(1.0, eps) - 1.0).abs() < 0.05, "{eps}: {v}");
        }
    }

    #[test]
    fn merge_rules() {
        let u = HarmonicRegime::Undetermined;
        assert_eq!(merge(HarmonicRegime::Parabolic, u, u), (HarmonicRegime::Parabolic, Route::DeclaredTail));
        assert_eq!(merge(u, HarmonicRegime::Hyperbolic, u), (HarmonicRegime::Hyperbolic, Route::Numeric));
        assert_eq!(merge(HarmonicRegime::Parabolic, HarmonicRegime::Hyperbolic, u), (u, Route::Both));
    }
}
