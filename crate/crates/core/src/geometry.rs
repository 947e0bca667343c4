//! Rotationally symmetric metrics `dr² + φ(r)² dθ²`.
//!
//! A [`MetricProfile`] is the warp function φ together with its first two
//! derivatives. Profiles are either analytic (euclidean, hyperbolic, or a
//! user closure) or obtained by integrating `φ'' = -K φ` from the origin for
//! a prescribed [`CurvatureProfile`]. Integrated profiles are stored as
//! `log φ` and `φ'/φ`, so warp functions far beyond the range of `f64` stay
//! usable.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ode::{Dopri5, Tolerances};
use crate::operators::fornberg_weights;

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Starting radius of the curvature IVP.
pub const IVP_START: f64 = 1e-6;
/// Relative knot spacing kept from the integrator's accepted steps.
const KNOT_SPACING: f64 = 2e-3;
const CONJUGATE_SLOPE: f64 = -1e7;

/// Declared asymptotic behaviour of a curvature function.
#[derive(Debug, Clone, PartialEq)]
pub enum TailClass {
    /// `K ≥ -1/(r² log r)`.
    AboveLogThreshold,
    /// `K ≤ -(1+ε)/(r² log r)`.
    BelowLogThreshold {
        eps: f64,
    },
    /// `-η r² ≤ K ≤ -(1+ε)/(r² log r)`.
    Between {
        eta: f64,
        eps: f64,
    },
    /// `K ≤ -r^(2+ε)`.
    BelowPower {
        eps: f64,
    },
    Custom(String),
}

/// `1/(r² log r)`, defined for `r > 1`.
pub fn log_threshold(r: f64) -> f64 {
    1.0 / (r * r * r.ln())
}

const SLACK: f64 = 1e-12;

impl TailClass {
    /// Whether `k = K(r)` satisfies the declared inequality at `r`.
    /// Custom classes carry no checkable inequality and always hold.
    pub fn holds_at(&self, r: f64, k: f64) -> bool {
        let le = |a: f64, b: f64| a <= b + SLACK * b.abs().max(a.abs());
        match *self {
            TailClass::AboveLogThreshold => r > 1.0 && le(-log_threshold(r), k),
            TailClass::BelowLogThreshold { eps } => r > 1.0 && le(k, -(1.0 + eps) * log_threshold(r)),
            TailClass::Between { eta, eps } => r > 1.0 && le(-eta * r * r, k) && le(k, -(1.0 + eps) * log_threshold(r)),
            TailClass::BelowPower { eps } => le(k, -r.powf(2.0 + eps)),
            TailClass::Custom(_) => true,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TailClass::AboveLogThreshold => "K >= -1/(r^2 log r)".into(),
            TailClass::BelowLogThreshold { eps } => format!("K <= -(1+{eps})/(r^2 log r)"),
            TailClass::Between { eta, eps } => format!("-{eta} r^2 <= K <= -(1+{eps})/(r^2 log r)"),
            TailClass::BelowPower { eps } => format!("K <= -r^(2+{eps})"),
            TailClass::Custom(s) => format!("custom: {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailDescriptor {
    pub class: TailClass,
    /// Radius beyond which the declaration holds.
    pub from_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub holds: bool,
    pub samples: usize,
    pub first_violation: Option<(f64, f64)>,
}

/// Gaussian curvature as a function of geodesic radius.
#[derive(Clone)]
pub struct CurvatureProfile {
    pub label: String,
    k: RadialFn,
    pub tail: Option<TailDescriptor>,
}

impl fmt::Debug for CurvatureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurvatureProfile").field("label", &self.label).field("tail", &self.tail).finish()
    }
}

/// Quintic smoothstep, C² at both ends.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

impl CurvatureProfile {
    pub fn new(label: impl Into<String>, k: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), k: Arc::new(k), tail: None }
    }

    pub fn with_tail(mut self, class: TailClass, from_radius: f64) -> Self {
        self.tail = Some(TailDescriptor { class, from_radius });
        self
    }

    /// Curvature equal to `tail(r)` for `r ≥ r0 + 1`, constant `tail(r0 + 1)`
    /// on `[0, r0]`, and a quintic blend in between.
    pub fn blended_tail(label: impl Into<String>, tail: impl Fn(f64) -> f64 + Send + Sync + 'static, r0: f64) -> Self {
        let cap = tail(r0 + 1.0);
        Self::new(label, move |r| {
            if r <= r0 {
                cap
            } else if r >= r0 + 1.0 {
                tail(r)
            } else {
                let s = smoothstep(r - r0);
                cap + (tail(r) - cap) * s
            }
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.k)(r)
    }

    /// Samples the declared inequality at `samples` geometric radii in
    /// `(from_radius, r_end]`.
    pub fn verify_tail(&self, r_end: f64, samples: usize) -> Option<TailCheck> {
        let desc = self.tail.as_ref()?;
        let start = desc.from_radius.max(1e-9);
        if r_end <= start {
            return Some(TailCheck { holds: false, samples: 0, first_violation: None });
        }
        let n = samples.max(2);
        let ratio = (r_end / start).ln() / n as f64;
        for i in 1..=n {
            let r = if i == n { r_end } else { start * (ratio * i as f64).exp() };
            let k = self.eval(r);
            if !k.is_finite() || !desc.class.holds_at(r, k) {
                return Some(TailCheck { holds: false, samples: i, first_violation: Some((r, k)) });
            }
        }
        Some(TailCheck { holds: true, samples: n, first_violation: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Analytic,
    CurvatureIntegrated,
}

#[derive(Clone)]
struct ClosureFns {
    phi: RadialFn,
    dphi: RadialFn,
    ddphi: RadialFn,
}

#[derive(Debug, Clone)]
struct IntegratedProfile {
    k0: f64,
    start: f64,
    r: Vec<f64>,
    log_phi: Vec<f64>,
    slope: Vec<f64>,
    dslope: Vec<f64>,
    steps: usize,
}

#[derive(Clone)]
enum Repr {
    Euclidean,
    Hyperbolic,
    Closure(ClosureFns),
    Integrated(Arc<IntegratedProfile>),
}

/// The warp function φ of a rotationally symmetric metric.
#[derive(Clone)]
pub struct MetricProfile {
    pub label: String,
    repr: Repr,
    r_max: f64,
}

impl fmt::Debug for MetricProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricProfile")
            .field("label", &self.label)
            .field("source", &self.source())
            .field("r_max", &self.r_max)
            .finish()
    }
}

fn ln_sinh(r: f64) -> f64 {
    if r < 20.0 {
        r.sinh().ln()
    } else {
        r - std::f64::consts::LN_2 + (-(-2.0 * r).exp()).ln_1p()
    }
}

impl IntegratedProfile {
    /// Returns `(log φ, φ'/φ, d/dr (φ'/φ))` at `r`.
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.start {
            let k0 = self.k0;
            let phi = r * (1.0 - k0 * r * r / 6.0);
            let dphi = 1.0 - 0.5 * k0 * r * r;
            let y = dphi / phi;
            // d/dr (φ'/φ) = φ''/φ - y² with φ'' ≈ -K0 r
            return (phi.ln(), y, -k0 * r / phi - y * y);
        }
        // Quintic Hermite in (log φ, φ'/φ, d/dr φ'/φ): C² across knots, and
        // the returned slope is the exact derivative of the returned log φ.
        let n = self.r.len();
        let i = self.r.partition_point(|&x| x <= r).clamp(1, n - 1) - 1;
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let h = r1 - r0;
        let t = ((r - r0) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let c = [
            self.log_phi[i],
            h * self.slope[i],
            h * h * self.dslope[i],
            self.log_phi[i + 1],
            h * self.slope[i + 1],
            h * h * self.dslope[i + 1],
        ];
        let b0 = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ];
        let b1 = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ];
        let b2 = [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
        ];
        let dot = |b: &[f64; 6]| b.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
        let u = dot(&b0);
        let y = dot(&b1) / h;
        let dy = dot(&b2) / (h * h);
        (u, y, dy)
    }
}

impl MetricProfile {
    pub fn euclidean() -> Self {
        Self { label: "euclidean".into(), repr: Repr::Euclidean, r_max: f64::INFINITY }
    }

    pub fn hyperbolic() -> Self {
        Self { label: "hyperbolic".into(), repr: Repr::Hyperbolic, r_max: f64::INFINITY }
    }

    /// Analytic profile from closures for φ, φ' and φ''.
    pub fn analytic(
        label: impl Into<String>,
        r_max: f64,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            repr: Repr::Closure(ClosureFns { phi: Arc::new(phi), dphi: Arc::new(dphi), ddphi: Arc::new(ddphi) }),
            r_max,
        }
    }

    pub fn source(&self) -> ProfileSource {
        match self.repr {
            Repr::Integrated(_) => ProfileSource::CurvatureIntegrated,
            _ => ProfileSource::Analytic,
        }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of accepted integrator steps (integrated profiles only).
    pub fn integration_steps(&self) -> Option<usize> {
        match &self.repr {
            Repr::Integrated(p) => Some(p.steps),
            _ => None,
        }
    }

    fn check(&self, r: f64) -> Result<()> {
        if r > 0.0 && r <= self.r_max * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::Domain { r, r_max: self.r_max })
        }
    }

    /// `log φ(r)`; unchecked, valid on `(0, R_max]`.
    pub fn ln_phi(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Euclidean => r.ln(),
            Repr::Hyperbolic => ln_sinh(r),
            Repr::Closure(c) => (c.phi)(r).ln(),
            Repr::Integrated(p) => p.eval(r).0,
        }
    }

    /// `φ'(r)/φ(r)`; unchecked.
    pub fn dlog(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Euclidean => 1.0 / r,
            Repr::Hyperbolic => 1.0 / r.tanh(),
            Repr::Closure(c) => (c.dphi)(r) / (c.phi)(r),
            Repr::Integrated(p) => p.eval(r).1,
        }
    }

    /// `1/φ(r)`; unchecked, underflows to zero for huge φ.
    pub fn inv_phi(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Euclidean => 1.0 / r,
            Repr::Hyperbolic => {
                if r < 20.0 {
                    1.0 / r.sinh()
                } else {
                    (-ln_sinh(r)).exp()
                }
            }
            Repr::Closure(c) => 1.0 / (c.phi)(r),
            Repr::Integrated(p) => (-p.eval(r).0).exp(),
        }
    }

    /// `φ''(r)/φ(r)`; unchecked.
    pub fn second_ratio(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Euclidean => 0.0,
            Repr::Hyperbolic => 1.0,
            Repr::Closure(c) => (c.ddphi)(r) / (c.phi)(r),
            Repr::Integrated(p) => {
                let (_, y, dy) = p.eval(r);
                dy + y * y
            }
        }
    }

    pub fn phi(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(match &self.repr {
            Repr::Euclidean => r,
            Repr::Hyperbolic => r.sinh(),
            Repr::Closure(c) => (c.phi)(r),
            Repr::Integrated(p) => p.eval(r).0.exp(),
        })
    }

    pub fn phi_prime(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(match &self.repr {
            Repr::Euclidean => 1.0,
            Repr::Hyperbolic => r.cosh(),
            Repr::Closure(c) => (c.dphi)(r),
            Repr::Integrated(p) => {
                let (u, y, _) = p.eval(r);
                y * u.exp()
            }
        })
    }

    pub fn phi_second(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(match &self.repr {
            Repr::Euclidean => 0.0,
            Repr::Hyperbolic => r.sinh(),
            Repr::Closure(c) => (c.ddphi)(r),
            Repr::Integrated(p) => {
                let (u, y, dy) = p.eval(r);
                (dy + y * y) * u.exp()
            }
        })
    }

    /// Gaussian curvature `K = -φ''/φ`.
    pub fn curvature_of(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(-self.second_ratio(r))
    }

    /// `φ'/φ` at `r`.
    pub fn log_derivative(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.dlog(r))
    }
}

/// Integrates `φ'' = -K φ`, `φ(0) = 0`, `φ'(0) = 1` up to `r_max`.
///
/// The state is `(log φ, φ'/φ)`, which obeys `u' = y`, `y' = -K - y²`. The
/// integration starts at [`IVP_START`] from the series `φ ≈ r - K(0) r³/6`.
pub fn profile_from_curvature(k: &CurvatureProfile, r_max: f64, tol: Tolerances) -> Result<MetricProfile> {
    if !(r_max > 10.0 * IVP_START) || !r_max.is_finite() {
        return Err(Error::InvalidParameter(format!("R_max must be finite and positive, got {r_max}")));
    }
    let h0 = IVP_START;
    let k0 = k.eval(h0);
    if !k0.is_finite() {
        return Err(Error::Integration { r: h0, reason: "curvature not finite near the origin".into() });
    }
    let phi0 = h0 * (1.0 - k0 * h0 * h0 / 6.0);
    let dphi0 = 1.0 - 0.5 * k0 * h0 * h0;
    let y0 = [phi0.ln(), dphi0 / phi0];

    let kf = k.clone();
    let rhs = move |r: f64, s: &[f64; 2], ds: &mut [f64; 2]| {
        ds[0] = s[1];
        ds[1] = -kf.eval(r) - s[1] * s[1];
    };

    let mut knots_r = vec![h0];
    let mut knots_u = vec![y0[0]];
    let mut knots_y = vec![y0[1]];
    let mut knots_dy = vec![-k0 - y0[1] * y0[1]];
    let mut last_t = h0;
    let mut last_y = y0[1];
    let mut pending: Option<(f64, f64, f64, f64)> = None;

    let solver = Dopri5::new(tol).with_initial_step(1e-3 * h0);
    let outcome = solver.integrate(&rhs, h0, y0, r_max, |t, s, ds| {
        last_t = t;
        last_y = s[1];
        if s[1] < CONJUGATE_SLOPE {
            return ControlFlow::Break(());
        }
        let prev = *knots_r.last().unwrap();
        if t - prev >= KNOT_SPACING * t || t >= r_max {
            knots_r.push(t);
            knots_u.push(s[0]);
            knots_y.push(s[1]);
            knots_dy.push(ds[1]);
            pending = None;
        } else {
            pending = Some((t, s[0], s[1], ds[1]));
        }
        ControlFlow::Continue(())
    });

    let outcome = match outcome {
        Ok(o) => o,
        Err(Error::Integration { r, .. }) if last_y < -1e3 => {
            return Err(Error::ConjugatePoint { r_star: r - 1.0 / last_y });
        }
        Err(e) => return Err(e),
    };
    if outcome.stopped {
        return Err(Error::ConjugatePoint { r_star: last_t - 1.0 / last_y });
    }
    if let Some((t, u, y, dy)) = pending {
        knots_r.push(t);
        knots_u.push(u);
        knots_y.push(y);
        knots_dy.push(dy);
    }
    if knots_r.len() < 2 {
        return Err(Error::Integration { r: r_max, reason: "no accepted steps".into() });
    }
    Ok(MetricProfile {
        label: k.label.clone(),
        repr: Repr::Integrated(Arc::new(IntegratedProfile {
            k0,
            start: h0,
            r: knots_r,
            log_phi: knots_u,
            slope: knots_y,
            dslope: knots_dy,
            steps: outcome.accepted,
        })),
        r_max,
    })
}

/// Parameters of the built-in families; unset fields take family defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BuiltinParams {
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub r0: Option<f64>,
}

pub const BUILTIN_NAMES: [&str; 5] =
    ["euclidean", "hyperbolic", "log-threshold", "power-curvature", "quadratic-curvature"];

#[derive(Debug, Clone)]
pub enum BuiltinProfile {
    Analytic { metric: MetricProfile, curvature: CurvatureProfile },
    Curvature(CurvatureProfile),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Smallest `r ≥ start` with `η r⁴ log r ≥ 2`, so that `-η r² ≤ -2/(r² log r)`.
fn quadratic_threshold_radius(eta: f64, start: f64) -> f64 {
    let f = |r: f64| eta * r.powi(4) * r.ln() - 2.0;
    let lo0 = start.max(1.0 + 1e-9);
    if f(lo0) >= 0.0 {
        return lo0;
    }
    let (mut lo, mut hi) = (lo0, lo0 * 2.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn builtin_profile(name: &str, params: &BuiltinParams) -> Result<BuiltinProfile> {
    match name {
        "euclidean" => Ok(BuiltinProfile::Analytic {
            metric: MetricProfile::euclidean(),
            curvature: CurvatureProfile::new("euclidean", |_| 0.0).with_tail(TailClass::AboveLogThreshold, 2.0),
        }),
        "hyperbolic" => Ok(BuiltinProfile::Analytic {
            metric: MetricProfile::hyperbolic(),
            curvature: CurvatureProfile::new("hyperbolic", |_| -1.0)
                .with_tail(TailClass::Between { eta: 1.0, eps: 1.0 }, 2.0),
        }),
        "log-threshold" => {
            let eps = positive("eps", params.eps.unwrap_or(0.5))?;
            let r0 = params.r0.unwrap_or(2.0);
            if !(r0 >= 2.0) {
                return Err(Error::InvalidParameter(format!("log-threshold needs R0 >= 2, got {r0}")));
            }
            let k = CurvatureProfile::blended_tail("log-threshold", move |r| -(1.0 + eps) * log_threshold(r), r0)
                .with_tail(TailClass::BelowLogThreshold { eps }, r0 + 1.0);
            Ok(BuiltinProfile::Curvature(k))
        }
        "power-curvature" => {
            let eps = positive("eps", params.eps.unwrap_or(1.0))?;
            let r0 = positive("r0", params.r0.unwrap_or(1.0))?;
            let k = CurvatureProfile::blended_tail("power-curvature", move |r| -r.powf(2.0 + eps), r0)
                .with_tail(TailClass::BelowPower { eps }, r0 + 1.0);
            Ok(BuiltinProfile::Curvature(k))
        }
        "quadratic-curvature" => {
            let eta = positive("eta", params.eta.unwrap_or(1.0))?;
            let r0 = positive("r0", params.r0.unwrap_or(1.0))?;
            let from = quadratic_threshold_radius(eta, r0 + 1.0);
            let k = CurvatureProfile::blended_tail("quadratic-curvature", move |r| -eta * r * r, r0)
                .with_tail(TailClass::Between { eta, eps: 1.0 }, from);
            Ok(BuiltinProfile::Curvature(k))
        }
        other => Err(Error::UnknownProfile(other.to_string())),
    }
}

/// A metric profile together with its curvature description.
#[derive(Debug, Clone)]
pub struct Surface {
    pub name: String,
    pub metric: MetricProfile,
    pub curvature: CurvatureProfile,
}

impl Surface {
    pub fn builtin(name: &str, params: &BuiltinParams, r_max: f64, tol: Tolerances) -> Result<Self> {
        match builtin_profile(name, params)? {
            BuiltinProfile::Analytic { metric, curvature } => Ok(Self { name: name.into(), metric, curvature }),
            BuiltinProfile::Curvature(curvature) => Self::from_curvature(name, curvature, r_max, tol),
        }
    }

    pub fn from_curvature(name: &str, curvature: CurvatureProfile, r_max: f64, tol: Tolerances) -> Result<Self> {
        let metric = profile_from_curvature(&curvature, r_max, tol)?;
        Ok(Self { name: name.into(), metric, curvature })
    }

    /// Wraps an analytic metric; its curvature is read back from φ''/φ.
    pub fn from_metric(name: &str, metric: MetricProfile) -> Self {
        let m = metric.clone();
        let curvature = CurvatureProfile::new(name.to_string(), move |r| -m.second_ratio(r));
        Self { name: name.into(), metric, curvature }
    }
}

/// Default pass/fail tolerance of [`check_origin_smoothness`].
pub const ORIGIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OriginReport {
    pub h: f64,
    pub phi0: f64,
    pub dphi0: f64,
    pub ddphi0: f64,
    pub tolerance: f64,
    pub phi0_ok: bool,
    pub dphi0_ok: bool,
    pub ddphi0_ok: bool,
}

impl OriginReport {
    pub fn passed(&self) -> bool {
        self.phi0_ok && self.dphi0_ok && self.ddphi0_ok
    }
}

/// Extrapolates φ, φ', φ'' to the origin from samples at `h, 2h, ..., 6h`
/// and compares them against `(0, 1, 0)`.
pub fn check_origin_smoothness(profile: &MetricProfile, h: f64, tolerance: f64) -> Result<OriginReport> {
    if !(h > 0.0) || h > profile.r_max() / 10.0 {
        return Err(Error::InvalidParameter(format!("origin probe radius {h} out of range")));
    }
    let nodes: Vec<f64> = (1..=6).map(|k| k as f64 * h).collect();
    let values = nodes.iter().map(|&r| profile.phi(r)).collect::<Result<Vec<_>>>()?;
    let w = fornberg_weights(0.0, &nodes, 2);
    let est = |d: usize| w[d].iter().zip(&values).map(|(a, b)| a * b).sum::<f64>();
    let (phi0, dphi0, ddphi0) = (est(0), est(1), est(2));
    Ok(OriginReport {
        h,
        phi0,
        dphi0,
        ddphi0,
        tolerance,
        phi0_ok: phi0.abs() <= tolerance,
        dphi0_ok: (dphi0 - 1.0).abs() <= tolerance,
        ddphi0_ok: ddphi0.abs() <= tolerance,
    })
}
