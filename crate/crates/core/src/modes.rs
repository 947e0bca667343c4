//! Radial harmonic modes `φ_m = exp Λ_m`, the reduction factor `z` and the
//! biharmonic modes `ψ_m = z φ_m`, all carried in log form where they can
//! overflow.
//!
//! Everything is computed segment by segment between consecutive
//! breakpoints (`0`, `1` and the grid nodes). On each segment a Chebyshev
//! primitive of `1/φ` is built once and shared by every `m`; on segments
//! below `r = 1` the primitive is of `1/φ - 1/r` and the logarithm is added
//! analytically, which keeps the origin well conditioned.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::MetricProfile;
use crate::grid::RadialGrid;
use crate::operators::{radial_laplacian_apply, relative_laplacian, RadialFunctionSamples, Representation};
use crate::quad::{integrate, ChebPrimitive, QuadSettings};

/// Default relative tolerance for the mode quadratures.
pub const DEFAULT_REL_TOL: f64 = 1e-13;

/// Drop of the inner kernel's exponent beyond which it is neglected.
const KERNEL_CUTOFF: f64 = 40.0;

/// Above this log-magnitude, residual checks switch to the log representation.
pub const LINEAR_LOG_LIMIT: f64 = 300.0;

#[derive(Debug, Clone)]
struct Segment {
    a: f64,
    b: f64,
    /// The primitive holds `∫ (1/φ - 1/r)`; `ln r` is added separately.
    split: bool,
    prim: ChebPrimitive,
}

impl Segment {
    /// `H(t) = ln φ(t) + 2|m| J(t)` up to a constant fixed per segment, so
    /// that `exp(H(t) - H(s))` is the inner kernel `φφ_{2m}(t) / φφ_{2m}(s)`.
    fn h(&self, profile: &MetricProfile, two_m: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut j = self.prim.eval(t);
        if self.split {
            j += t.ln();
        }
        if two_m == 0.0 {
            profile.ln_phi(t)
        } else {
            profile.ln_phi(t) + two_m * j
        }
    }

    /// `∫_a^b 1/φ`; infinite on the segment starting at the origin.
    fn length(&self) -> f64 {
        if self.split {
            (self.b / self.a).ln() + self.prim.total()
        } else {
            self.prim.total()
        }
    }
}

/// The `m`-independent part of the mode computation for one profile and grid.
#[derive(Debug, Clone)]
pub struct ModeTable {
    profile: MetricProfile,
    grid: RadialGrid,
    rel_tol: f64,
    segments: Vec<Segment>,
    /// Breakpoint index of every grid node.
    node_bp: Vec<usize>,
    /// `J(r) = ∫_1^r 1/φ` at the breakpoints (index 0 is the origin).
    j: Vec<f64>,
    j_err: Vec<f64>,
}

impl ModeTable {
    pub fn new(profile: &MetricProfile, grid: &RadialGrid) -> Result<Self> {
        Self::with_tolerance(profile, grid, DEFAULT_REL_TOL)
    }

    pub fn with_tolerance(profile: &MetricProfile, grid: &RadialGrid, rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("quadrature tolerance must be positive, got {rel_tol}")));
        }
        if grid.first() <= 0.0 {
            return Err(Error::Grid("mode grids must start above r = 0".into()));
        }
        let r_max = profile.r_max();
        if grid.last() > r_max * (1.0 + 1e-12) {
            return Err(Error::Domain { r: grid.last(), r_max });
        }
        if r_max < 1.0 {
            return Err(Error::Domain { r: 1.0, r_max });
        }

        let mut bps = vec![0.0];
        let mut node_bp = Vec::with_capacity(grid.len());
        let mut one_inserted = false;
        for &node in grid.nodes() {
            // a node within rounding of 1 shares the breakpoint at 1
            let r = if (node - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { node };
            if !one_inserted && r > 1.0 {
                bps.push(1.0);
                one_inserted = true;
            }
            if r == 1.0 {
                one_inserted = true;
            }
            node_bp.push(bps.len());
            bps.push(r);
        }
        if !one_inserted {
            bps.push(1.0);
        }
        let one = bps.iter().position(|&r| r == 1.0).expect("breakpoint at 1");

        let pairs: Vec<(f64, f64)> = bps.windows(2).map(|w| (w[0], w[1])).collect();
        let segments = pairs
            .par_iter()
            .map(|&(a, b)| {
                let split = b <= 1.0;
                let prim = if split {
                    ChebPrimitive::build_with_magnitude(|t| (profile.inv_phi(t) - 1.0 / t, 1.0 / t), a, b, 1e-16)?
                } else {
                    ChebPrimitive::build(|t| profile.inv_phi(t), a, b, 1e-16)?
                };
                Ok(Segment { a, b, split, prim })
            })
            .collect::<Result<Vec<_>>>()?;

        let n = bps.len();
        let mut j = vec![0.0; n];
        let mut j_err = vec![0.0; n];
        for k in one + 1..n {
            let s = &segments[k - 1];
            j[k] = j[k - 1] + s.length();
            j_err[k] = j_err[k - 1] + s.prim.error;
        }
        for k in (1..one).rev() {
            let s = &segments[k];
            j[k] = j[k + 1] - s.length();
            j_err[k] = j_err[k + 1] + s.prim.error;
        }
        j[0] = f64::NEG_INFINITY;

        Ok(Self { profile: profile.clone(), grid: grid.clone(), rel_tol, segments, node_bp, j, j_err })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn profile(&self) -> &MetricProfile {
        &self.profile
    }

    /// `∫_1^r ds/φ` at the grid nodes.
    pub fn inverse_phi_integral(&self) -> Vec<f64> {
        self.node_bp.iter().map(|&k| self.j[k]).collect()
    }

    pub fn log_mode(&self, m: i64) -> LogMode {
        let am = m.unsigned_abs() as f64;
        let (lambda, quadrature_error) = self
            .node_bp
            .iter()
            .map(|&k| if m == 0 { (0.0, 0.0) } else { (am * self.j[k], am * self.j_err[k]) })
            .unzip();
        LogMode { m, grid: self.grid.clone(), lambda, quadrature_error }
    }

    /// `∫_a^s exp(H(t) - H(s)) dt` over the segment starting at `a`. Where
    /// `H` rises steeply the kernel is a boundary layer at `s`; the part where
    /// it has dropped below `exp(-KERNEL_CUTOFF)` is bounded rather than
    /// integrated, provided φ is increasing there.
    fn kernel_integral(
        &self,
        seg: &Segment,
        two_m: f64,
        s: f64,
        hs: f64,
        settings: QuadSettings,
    ) -> Result<crate::quad::QuadResult> {
        let p = &self.profile;
        let a = seg.a;
        let mut start = a;
        let slope = p.dlog(s) + two_m * p.inv_phi(s);
        if a > 0.0 && slope > 0.0 && (s - a) * slope > KERNEL_CUTOFF && p.dlog(a) > 0.0 {
            let mut len = KERNEL_CUTOFF / slope;
            while s - len > a {
                let t0 = s - len;
                if hs - seg.h(p, two_m, t0) >= KERNEL_CUTOFF && p.dlog(t0) > 0.0 {
                    start = t0;
                    break;
                }
                len *= 2.0;
            }
        }
        if s <= start {
            return Ok(crate::quad::QuadResult { value: 0.0, error: 0.0, evals: 0 });
        }
        let mut q = integrate(|t| (seg.h(p, two_m, t) - hs).exp(), start, s, settings)?;
        if start > a {
            q.error += (start - a) * (seg.h(p, two_m, start) - hs).exp();
        }
        Ok(q)
    }

    /// `w(s) = (1/(φφ_{2m}))(s) ∫_0^s φφ_{2m}` and `z = ∫_0^r w` at the breakpoints.
    fn reduction(&self, m: i64) -> Result<Reduction> {
        let two_m = 2.0 * m.unsigned_abs() as f64;
        let p = &self.profile;
        let n = self.segments.len() + 1;
        let mut w = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut w_err = vec![0.0; n];
        let mut z_err = vec![0.0; n];
        for (k, seg) in self.segments.iter().enumerate() {
            let (a, b) = (seg.a, seg.b);
            let ha = seg.h(p, two_m, a);
            let hb = seg.h(p, two_m, b);
            // The kernel is exp of a difference of values of size |H|, so its
            // relative rounding noise grows with |H|.
            let noise = 64.0 * f64::EPSILON * (1.0 + hb.abs().max(if ha.is_finite() { ha.abs() } else { 0.0 }));
            let inner = QuadSettings::rel(self.rel_tol.max(noise));
            let wa = w[k];
            let decay = if wa == 0.0 { 0.0 } else { (ha - hb).exp() };
            let tail = self.kernel_integral(seg, two_m, b, hb, inner)?;
            w[k + 1] = wa * decay + tail.value;
            w_err[k + 1] = w_err[k] * decay + tail.error;

            let mut worst_inner: f64 = 0.0;
            let mut failure = None;
            let outer = integrate(
                |s| {
                    let hs = seg.h(p, two_m, s);
                    let carried = if wa == 0.0 { 0.0 } else { wa * (ha - hs).exp() };
                    match self.kernel_integral(seg, two_m, s, hs, inner) {
                        Ok(q) => {
                            worst_inner = worst_inner.max(q.error);
                            carried + q.value
                        }
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    }
                },
                a,
                b,
                inner,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let outer = outer?;
            z[k + 1] = z[k] + outer.value;
            z_err[k + 1] = z_err[k] + outer.error + (b - a) * (worst_inner + w_err[k]);
            if !w[k + 1].is_finite() || !z[k + 1].is_finite() {
                return Err(Error::Overflow { r: b });
            }
        }
        Ok(Reduction { w, z, w_err, z_err })
    }

    /// The inner ratio `w` at the grid nodes; for `m = 0` this is the mean-integral ratio.
    pub fn inner_ratio(&self, m: i64) -> Result<Vec<f64>> {
        let red = self.reduction(m)?;
        Ok(self.node_bp.iter().map(|&k| red.w[k]).collect())
    }

    pub fn biharmonic(&self, m: i64) -> Result<BiharmonicMode> {
        let red = self.reduction(m)?;
        let harmonic = self.log_mode(m);
        let pick = |v: &[f64]| self.node_bp.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let z = pick(&red.z);
        let w = pick(&red.w);
        let quadrature_error = pick(&red.z_err);
        let mut log_psi = Vec::with_capacity(z.len());
        for (i, (&zi, &li)) in z.iter().zip(&harmonic.lambda).enumerate() {
            if !(zi > 0.0) {
                return Err(Error::Quadrature { a: 0.0, b: self.grid.nodes()[i], estimate: quadrature_error[i] });
            }
            log_psi.push(li + zi.ln());
        }
        Ok(BiharmonicMode {
            m,
            grid: self.grid.clone(),
            lambda: harmonic.lambda,
            lambda_error: harmonic.quadrature_error,
            w,
            z,
            log_psi,
            quadrature_error,
        })
    }

    /// Biharmonic modes for several `m`, computed in parallel.
    pub fn biharmonic_modes(&self, ms: &[i64]) -> Result<Vec<BiharmonicMode>> {
        ms.par_iter().map(|&m| self.biharmonic(m)).collect()
    }
}

struct Reduction {
    w: Vec<f64>,
    z: Vec<f64>,
    #[allow(dead_code)]
    w_err: Vec<f64>,
    z_err: Vec<f64>,
}

/// `Λ_m(r) = |m| ∫_1^r ds/φ` at the grid nodes, so that `φ_m = exp Λ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMode {
    pub m: i64,
    pub grid: RadialGrid,
    pub lambda: Vec<f64>,
    pub quadrature_error: Vec<f64>,
}

impl LogMode {
    /// `φ_m` at the nodes; `inf` where it overflows.
    pub fn values(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l.exp()).collect()
    }
}

/// `ψ_m = z φ_m` with `z(r) = ∫_0^r w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiharmonicMode {
    pub m: i64,
    pub grid: RadialGrid,
    pub lambda: Vec<f64>,
    pub lambda_error: Vec<f64>,
    /// `z'`, the scaled inner integral.
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub log_psi: Vec<f64>,
    /// Error bound on `z`.
    pub quadrature_error: Vec<f64>,
}

pub fn harmonic_log_mode(profile: &MetricProfile, m: i64, grid: &RadialGrid) -> Result<LogMode> {
    Ok(ModeTable::new(profile, grid)?.log_mode(m))
}

pub fn reduction_factor(profile: &MetricProfile, m: i64, grid: &RadialGrid) -> Result<Vec<f64>> {
    let table = ModeTable::new(profile, grid)?;
    let red = table.reduction(m)?;
    Ok(table.node_bp.iter().map(|&k| red.z[k]).collect())
}

pub fn biharmonic_mode(profile: &MetricProfile, m: i64, grid: &RadialGrid) -> Result<BiharmonicMode> {
    ModeTable::new(profile, grid)?.biharmonic(m)
}

/// `(1/φ(s)) ∫_0^s φ`.
pub fn mean_integral_ratio(profile: &MetricProfile, s: f64) -> Result<f64> {
    if !(s > 0.0) || s > profile.r_max() * (1.0 + 1e-12) {
        return Err(Error::Domain { r: s, r_max: profile.r_max() });
    }
    let grid = RadialGrid::from_nodes(vec![0.25 * s, 0.5 * s, s])?;
    let w = ModeTable::new(profile, &grid)?.inner_ratio(0)?;
    Ok(w[2])
}

#[derive(Debug, Clone, Copy)]
pub enum ModeRef<'a> {
    Harmonic(&'a LogMode),
    Biharmonic(&'a BiharmonicMode),
}

impl<'a> From<&'a LogMode> for ModeRef<'a> {
    fn from(m: &'a LogMode) -> Self {
        ModeRef::Harmonic(m)
    }
}

impl<'a> From<&'a BiharmonicMode> for ModeRef<'a> {
    fn from(m: &'a BiharmonicMode) -> Self {
        ModeRef::Biharmonic(m)
    }
}

/// Scaled residuals `|L_m φ_m| / max(1, φ_m)` or `|L_m ψ_m - φ_m| / max(1, φ_m)`
/// at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub m: i64,
    pub biharmonic: bool,
    pub representation: Representation,
    pub r: Vec<f64>,
    pub residual: Vec<f64>,
    pub max: f64,
    pub rms: f64,
}

pub fn verify_mode_residuals<'a>(profile: &MetricProfile, mode: impl Into<ModeRef<'a>>) -> Result<ResidualReport> {
    let mode = mode.into();
    let (m, grid, lambda, log_psi) = match mode {
        ModeRef::Harmonic(h) => (h.m, &h.grid, &h.lambda, None),
        ModeRef::Biharmonic(b) => (b.m, &b.grid, &b.lambda, Some(&b.log_psi)),
    };
    let peak = lambda.iter().chain(log_psi.into_iter().flatten()).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let representation = if peak <= LINEAR_LOG_LIMIT { Representation::Linear } else { Representation::Logarithmic };
    // φ_m / max(1, φ_m)
    let damp: Vec<f64> = lambda.iter().map(|&l| (l - l.max(0.0)).exp()).collect();
    let full: Vec<f64> = match (representation, log_psi) {
        (Representation::Linear, None) => {
            let f = RadialFunctionSamples::linear(grid.clone(), lambda.iter().map(|l| l.exp()).collect())?;
            let lf = radial_laplacian_apply(profile, m, &f)?;
            lf.values.iter().zip(lambda).map(|(v, l)| v.abs() / l.exp().max(1.0)).collect()
        }
        (Representation::Linear, Some(lp)) => {
            let f = RadialFunctionSamples::linear(grid.clone(), lp.iter().map(|l| l.exp()).collect())?;
            let lf = radial_laplacian_apply(profile, m, &f)?;
            lf.values.iter().zip(lambda).map(|(v, l)| (v - l.exp()).abs() / l.exp().max(1.0)).collect()
        }
        (Representation::Logarithmic, None) => {
            let f = RadialFunctionSamples::new(grid.clone(), lambda.clone(), Representation::Logarithmic)?;
            let q = relative_laplacian(profile, m, &f)?;
            q.iter().zip(&damp).map(|(q, d)| (q * d).abs()).collect()
        }
        (Representation::Logarithmic, Some(lp)) => {
            let f = RadialFunctionSamples::new(grid.clone(), lp.clone(), Representation::Logarithmic)?;
            let q = relative_laplacian(profile, m, &f)?;
            q.iter()
                .zip(lp.iter().zip(lambda))
                .zip(&damp)
                .map(|((q, (lp, l)), d)| (d * ((lp - l).exp() * q - 1.0)).abs())
                .collect()
        }
    };
    let n = full.len();
    let residual = full[1..n - 1].to_vec();
    let r = grid.nodes()[1..n - 1].to_vec();
    let max = residual.iter().fold(0.0f64, |a, &b| a.max(b));
    let rms = (residual.iter().map(|v| v * v).sum::<f64>() / residual.len() as f64).sqrt();
    Ok(ResidualReport { m, biharmonic: log_psi.is_some(), representation, r, residual, max, rms })
}

/// Finite-horizon boundedness verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Unbounded,
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Unbounded => "unbounded",
            Verdict::Undetermined => "undetermined",
        })
    }
}

/// Increments over the last two doublings below this fraction of `v(R)`: convergent.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Final increment at least this fraction of `v(R)` and not shrinking: divergent.
pub const DIVERGENCE_TOL: f64 = 1e-2;
/// Largest ratio between successive increments accepted as geometric decay.
pub const GEOMETRIC_RATIO: f64 = 0.75;
/// Largest extrapolated remaining growth, relative to `v(R)`, for geometric decay.
pub const TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCheck {
    pub verdict: Verdict,
    /// `R/8, R/4, R/2, R`.
    pub radii: [f64; 4],
    /// Increments over the three doublings, relative to `v(R)`.
    pub increments: [f64; 3],
}

fn judge(increments: [f64; 3]) -> Verdict {
    let [i1, i2, i3] = increments;
    if !increments.iter().all(|v| v.is_finite()) {
        Verdict::Undetermined
    } else if i2 <= CONVERGENCE_TOL && i3 <= CONVERGENCE_TOL {
        Verdict::Bounded
    } else if i3 >= DIVERGENCE_TOL && i3 >= 0.95 * i2 {
        Verdict::Unbounded
    } else if i1 > 0.0 && i2 <= GEOMETRIC_RATIO * i1 && i3 <= GEOMETRIC_RATIO * i2 {
        let q = (i2 / i1).max(i3 / i2);
        if i3 * q / (1.0 - q) <= TAIL_FRACTION {
            Verdict::Bounded
        } else {
            Verdict::Undetermined
        }
    } else {
        Verdict::Undetermined
    }
}

/// Applies the convergence rule to a positive, nondecreasing quantity given
/// by its logarithm at `R/8, R/4, R/2, R`; increments are taken relative to
/// the value at `R`.
///
/// Convergent when the last two increments are below [`CONVERGENCE_TOL`],
/// or when the increments shrink at least geometrically with an extrapolated
/// remainder below [`TAIL_FRACTION`]; divergent when the last increment is
/// at least [`DIVERGENCE_TOL`] and no smaller than 0.95 of the previous one.
pub fn growth_verdict(radii: [f64; 4], log_values: [f64; 4]) -> GrowthCheck {
    let top = log_values[3];
    let rel = |k: usize| (log_values[k] - top).exp();
    let increments = [rel(1) - rel(0), rel(2) - rel(1), 1.0 - rel(2)];
    GrowthCheck { verdict: judge(increments), radii, increments }
}

/// The same rule applied to the exponent `Λ` of `e^Λ`, using plain
/// increments of `Λ`. Boundedness of `e^Λ` is boundedness of `Λ`, and this
/// keeps slowly convergent exponents from being magnified by the exponential.
pub fn exponent_growth_verdict(radii: [f64; 4], exponent: [f64; 4]) -> GrowthCheck {
    let increments = [exponent[1] - exponent[0], exponent[2] - exponent[1], exponent[3] - exponent[2]];
    GrowthCheck { verdict: judge(increments), radii, increments }
}

fn verdict_samples(grid: &RadialGrid, values: &[f64], horizon: f64) -> Result<([f64; 4], [f64; 4])> {
    let radii = [horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon];
    let mut picked = [0.0; 4];
    for (l, &r) in picked.iter_mut().zip(&radii) {
        let i = grid.index_of(r).ok_or_else(|| Error::Grid(format!("grid lacks the verdict radius {r}")))?;
        *l = values[i];
    }
    Ok((radii, picked))
}

/// [`growth_verdict`] on samples over `grid`, which must contain `R/8, ..., R`.
pub fn growth_verdict_on(grid: &RadialGrid, log_values: &[f64], horizon: f64) -> Result<GrowthCheck> {
    let (radii, logs) = verdict_samples(grid, log_values, horizon)?;
    Ok(growth_verdict(radii, logs))
}

/// [`exponent_growth_verdict`] on samples over `grid`.
pub fn exponent_growth_verdict_on(grid: &RadialGrid, exponent: &[f64], horizon: f64) -> Result<GrowthCheck> {
    let (radii, e) = verdict_samples(grid, exponent, horizon)?;
    Ok(exponent_growth_verdict(radii, e))
}

impl LogMode {
    pub fn growth(&self, horizon: f64) -> Result<GrowthCheck> {
        exponent_growth_verdict_on(&self.grid, &self.lambda, horizon)
    }
}

impl BiharmonicMode {
    pub fn z_growth(&self, horizon: f64) -> Result<GrowthCheck> {
        let logs: Vec<f64> = self.z.iter().map(|z| z.ln()).collect();
        growth_verdict_on(&self.grid, &logs, horizon)
    }

    pub fn psi_growth(&self, horizon: f64) -> Result<GrowthCheck> {
        growth_verdict_on(&self.grid, &self.log_psi, horizon)
    }

    pub fn phi_growth(&self, horizon: f64) -> Result<GrowthCheck> {
        exponent_growth_verdict_on(&self.grid, &self.lambda, horizon)
    }
}
