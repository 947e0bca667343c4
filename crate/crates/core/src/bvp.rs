//! Biharmonic Dirichlet problem on a geodesic disk: boundary traces of `u`
//! and `Δu` are split into Fourier modes and matched to `φ_m`, `ψ_m`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::MetricProfile;
use crate::grid::RadialGrid;
use crate::modes::ModeTable;
use crate::operators::{radial_laplacian_apply, RadialFunctionSamples};

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 32;
/// Out-of-band energy, relative to the total, above which aliasing is reported.
pub const ALIASING_THRESHOLD: f64 = 1e-8;
/// `|Λ_m(R)|` beyond which coefficients are kept as log-magnitude and phase.
pub const LOG_SCALE_THRESHOLD: f64 = 500.0;
/// Octaves below `R` covered by the interpolation tables.
pub const TABLE_OCTAVES: usize = 12;
/// Interpolation nodes per octave.
pub const TABLE_PER_DOUBLING: usize = 16;

/// Samples of `u` and `Δu` at `θ_k = 2πk/N` on the circle `r = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub radius: f64,
    pub u: Vec<Complex64>,
    pub lap_u: Vec<Complex64>,
}

impl BoundaryTrace {
    pub fn new(radius: f64, u: Vec<Complex64>, lap_u: Vec<Complex64>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("disk radius must be positive, got {radius}")));
        }
        if u.len() != lap_u.len() {
            return Err(Error::InvalidParameter(format!(
                "trace arrays differ in length ({} vs {})",
                u.len(),
                lap_u.len()
            )));
        }
        if u.len() < 4 || !u.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!("trace length must be a power of two ≥ 4, got {}", u.len())));
        }
        if let Some(i) = u.iter().chain(&lap_u).position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(i % u.len()));
        }
        Ok(Self { radius, u, lap_u })
    }

    pub fn from_real(radius: f64, u: &[f64], lap_u: &[f64]) -> Result<Self> {
        let c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(radius, c(u), c(lap_u))
    }

    /// Samples two functions of θ.
    pub fn sample(
        radius: f64,
        n: usize,
        u: impl Fn(f64) -> Complex64,
        lap_u: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let thetas: Vec<f64> = (0..n).map(|k| theta_node(k, n)).collect();
        Self::new(radius, thetas.iter().map(|&t| u(t)).collect(), thetas.iter().map(|&t| lap_u(t)).collect())
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn theta(&self, k: usize) -> f64 {
        theta_node(k, self.len())
    }

    pub fn is_real(&self) -> bool {
        self.u.iter().chain(&self.lap_u).all(|z| z.im == 0.0)
    }
}

pub fn theta_node(k: usize, n: usize) -> f64 {
    2.0 * PI * k as f64 / n as f64
}

/// Boundary coefficients `α_m` (of `u`) and `β_m` (of `Δu`) for `|m| ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    pub order: usize,
    /// Indexed by `m + M`.
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    /// Mean square of the traces.
    pub energy_u: f64,
    pub energy_lap_u: f64,
    /// Energy in the discarded frequencies.
    pub truncation_u: f64,
    pub truncation_lap_u: f64,
    pub aliasing_warning: bool,
}

impl FourierSpectrum {
    /// A band-limited spectrum with no discarded energy.
    pub fn from_coefficients(order: usize, alpha: Vec<Complex64>, beta: Vec<Complex64>) -> Result<Self> {
        let n = 2 * order + 1;
        if alpha.len() != n || beta.len() != n {
            return Err(Error::InvalidParameter(format!("expected {n} coefficients for order {order}")));
        }
        let energy = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        Ok(Self {
            order,
            energy_u: energy(&alpha),
            energy_lap_u: energy(&beta),
            alpha,
            beta,
            truncation_u: 0.0,
            truncation_lap_u: 0.0,
            aliasing_warning: false,
        })
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        -(self.order as i64)..=self.order as i64
    }

    fn index(&self, m: i64) -> Option<usize> {
        (m.unsigned_abs() as usize <= self.order).then(|| (m + self.order as i64) as usize)
    }

    pub fn alpha(&self, m: i64) -> Complex64 {
        self.index(m).map_or(Complex64::new(0.0, 0.0), |i| self.alpha[i])
    }

    pub fn beta(&self, m: i64) -> Complex64 {
        self.index(m).map_or(Complex64::new(0.0, 0.0), |i| self.beta[i])
    }

    /// Samples `Σ α_m e^{imθ}` and `Σ β_m e^{imθ}` on `n` equispaced angles.
    pub fn synthesize(&self, radius: f64, n: usize) -> Result<BoundaryTrace> {
        if n < 2 * self.order + 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "synthesis needs a power of two ≥ {}, got {n}",
                2 * self.order + 2
            )));
        }
        let inverse = FftPlanner::new().plan_fft_inverse(n);
        let bins = |coef: &[Complex64]| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for (i, m) in self.modes().enumerate() {
                buf[m.rem_euclid(n as i64) as usize] = coef[i];
            }
            inverse.process(&mut buf);
            buf
        };
        let u = bins(&self.alpha);
        let lap = bins(&self.beta);
        BoundaryTrace::new(radius, u, lap)
    }
}

pub fn analyze_trace(trace: &BoundaryTrace, order: usize) -> Result<FourierSpectrum> {
    let n = trace.len();
    if n < 2 * order + 2 {
        return Err(Error::InvalidParameter(format!(
            "order {order} needs at least {} samples, trace has {n}",
            2 * order + 2
        )));
    }
    let forward = FftPlanner::new().plan_fft_forward(n);
    let transform = |v: &[Complex64]| {
        let mut buf = v.to_vec();
        forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    };
    let fu = transform(&trace.u);
    let fl = transform(&trace.lap_u);
    let mut alpha = Vec::with_capacity(2 * order + 1);
    let mut beta = Vec::with_capacity(2 * order + 1);
    for m in -(order as i64)..=order as i64 {
        let k = m.rem_euclid(n as i64) as usize;
        alpha.push(fu[k]);
        beta.push(fl[k]);
    }
    let out_of_band = |f: &[Complex64]| {
        (0..n)
            .filter(|&k| {
                let m = if k <= n / 2 { k } else { n - k };
                m > order
            })
            .map(|k| f[k].norm_sqr())
            .sum::<f64>()
    };
    let mean_sq = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    let (energy_u, energy_lap_u) = (mean_sq(&trace.u), mean_sq(&trace.lap_u));
    let (truncation_u, truncation_lap_u) = (out_of_band(&fu), out_of_band(&fl));
    let aliasing_warning =
        truncation_u > ALIASING_THRESHOLD * energy_u || truncation_lap_u > ALIASING_THRESHOLD * energy_lap_u;
    Ok(FourierSpectrum { order, alpha, beta, energy_u, energy_lap_u, truncation_u, truncation_lap_u, aliasing_warning })
}

/// `mantissa · e^{log_scale}`, for values beyond the range of `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub fn plain(z: Complex64) -> Self {
        Self { mantissa: z, log_scale: 0.0 }
    }

    /// `z · e^{log_factor}`, folded into the mantissa when that is safe.
    pub fn scaled(z: Complex64, log_factor: f64) -> Self {
        if log_factor.abs() > LOG_SCALE_THRESHOLD {
            Self { mantissa: z, log_scale: log_factor }
        } else {
            Self::plain(z * log_factor.exp())
        }
    }

    pub fn to_complex(self) -> Complex64 {
        if self.log_scale == 0.0 {
            self.mantissa
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }

    /// `self · e^{log_factor}` as an ordinary number.
    pub fn times_exp(self, log_factor: f64) -> Complex64 {
        self.mantissa * (self.log_scale + log_factor).exp()
    }

    pub fn ln_abs(self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    /// Nonzero but not representable as an ordinary number.
    pub fn underflows(self) -> bool {
        let z = self.to_complex();
        self.mantissa != Complex64::new(0.0, 0.0) && z.re == 0.0 && z.im == 0.0
    }

    pub fn overflows(self) -> bool {
        !self.to_complex().norm().is_finite()
    }

    /// `|self - other| / |other|`, computed at the scale of `other`.
    pub fn relative_difference(self, other: ScaledComplex) -> f64 {
        let diff = self.times_exp(-other.log_scale) - other.mantissa;
        if other.mantissa.norm() == 0.0 {
            diff.norm()
        } else {
            diff.norm() / other.mantissa.norm()
        }
    }
}

/// `Λ_m` and `ln z_m` on a geometric table, interpolated in `s = ln r`.
#[derive(Debug, Clone)]
pub struct ModeCurve {
    /// `|m|`.
    pub order: u64,
    s: Vec<f64>,
    lambda: Vec<f64>,
    dlambda: Vec<f64>,
    log_z: Vec<f64>,
    dlog_z: Vec<f64>,
    pub lambda_at_radius: f64,
    pub z_at_radius: f64,
    /// Error bounds on `Λ_m(R)` and `z_m(R)`.
    pub lambda_error: f64,
    pub z_error: f64,
}

/// Fritsch–Carlson limited slopes for increasing data.
fn limit_slopes(h: f64, y0: f64, y1: f64, mut d0: f64, mut d1: f64) -> (f64, f64) {
    let delta = (y1 - y0) / h;
    if delta <= 0.0 {
        return if delta == 0.0 { (0.0, 0.0) } else { (d0, d1) };
    }
    d0 = d0.max(0.0);
    d1 = d1.max(0.0);
    let (a, b) = (d0 / delta, d1 / delta);
    let q = a * a + b * b;
    if q > 9.0 {
        let t = 3.0 / q.sqrt();
        d0 = t * a * delta;
        d1 = t * b * delta;
    }
    (d0, d1)
}

fn hermite(s: &[f64], y: &[f64], dy: &[f64], x: f64) -> f64 {
    let i = match s.partition_point(|&v| v <= x) {
        0 => 0,
        k if k >= s.len() => s.len() - 2,
        k => k - 1,
    };
    let h = s[i + 1] - s[i];
    let (d0, d1) = limit_slopes(h, y[i], y[i + 1], dy[i], dy[i + 1]);
    let t = (x - s[i]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y[i]
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y[i + 1]
        + (t3 - t2) * h * d1
}

impl ModeCurve {
    /// `(Λ_m(r), ln z_m(r))`; both may be `-∞` at the origin.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let s0 = self.s[0];
        if r <= 0.0 {
            let lambda = if self.order == 0 { 0.0 } else { f64::NEG_INFINITY };
            return (lambda, f64::NEG_INFINITY);
        }
        let x = r.ln();
        if x < s0 {
            // φ ~ r and z ~ r² below the table
            let d = x - s0;
            return (self.lambda[0] + self.order as f64 * d, self.log_z[0] + 2.0 * d);
        }
        (hermite(&self.s, &self.lambda, &self.dlambda, x), hermite(&self.s, &self.log_z, &self.dlog_z, x))
    }
}

/// Mode tables on `[0, R]` for `|m| ≤ M`.
#[derive(Clone)]
pub struct DiskModes {
    profile: MetricProfile,
    radius: f64,
    curves: Vec<ModeCurve>,
}

impl std::fmt::Debug for DiskModes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiskModes").field("radius", &self.radius).field("order", &self.order()).finish()
    }
}

impl DiskModes {
    pub fn new(profile: &MetricProfile, radius: f64, order: usize) -> Result<Self> {
        if !(radius > 0.0) || radius > profile.r_max() * (1.0 + 1e-12) {
            return Err(Error::Domain { r: radius, r_max: profile.r_max() });
        }
        let grid = RadialGrid::doubling(radius / 2f64.powi(TABLE_OCTAVES as i32), radius, TABLE_PER_DOUBLING)?;
        let table = ModeTable::new(profile, &grid)?;
        let ms: Vec<i64> = (0..=order as i64).collect();
        let nodes = grid.nodes();
        let inv_phi: Vec<f64> = nodes.iter().map(|&r| profile.inv_phi(r)).collect();
        let curves = ms
            .par_iter()
            .map(|&m| {
                let b = table.biharmonic(m)?;
                let n = nodes.len();
                let mf = m as f64;
                Ok(ModeCurve {
                    order: m as u64,
                    s: nodes.iter().map(|r| r.ln()).collect(),
                    dlambda: (0..n).map(|i| mf * nodes[i] * inv_phi[i]).collect(),
                    log_z: b.z.iter().map(|z| z.ln()).collect(),
                    dlog_z: (0..n).map(|i| nodes[i] * b.w[i] / b.z[i]).collect(),
                    lambda_at_radius: b.lambda[n - 1],
                    z_at_radius: b.z[n - 1],
                    lambda_error: b.lambda_error[n - 1],
                    z_error: b.quadrature_error[n - 1],
                    lambda: b.lambda,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { profile: profile.clone(), radius, curves })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> usize {
        self.curves.len() - 1
    }

    pub fn profile(&self) -> &MetricProfile {
        &self.profile
    }

    pub fn curve(&self, m: i64) -> Option<&ModeCurve> {
        self.curves.get(m.unsigned_abs() as usize)
    }

    fn curve_or_err(&self, m: i64) -> Result<&ModeCurve> {
        self.curve(m)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {m} beyond the tabulated order {}", self.order())))
    }

    /// Solves `c φ_m(R) + d ψ_m(R) = α_m`, `d φ_m(R) = β_m` for every mode.
    pub fn solve(&self, spectrum: &FourierSpectrum) -> Result<ModeCoefficients> {
        if spectrum.order > self.order() {
            return Err(Error::InvalidParameter(format!(
                "spectrum order {} exceeds tabulated order {}",
                spectrum.order,
                self.order()
            )));
        }
        let entries = spectrum
            .modes()
            .map(|m| {
                let curve = self.curve_or_err(m)?;
                let (alpha, beta) = (spectrum.alpha(m), spectrum.beta(m));
                let lr = curve.lambda_at_radius;
                // ψ/φ = z, so c = (α - β z(R)) / φ(R)
                let c = ScaledComplex::scaled(alpha - beta * curve.z_at_radius, -lr);
                let d = ScaledComplex::scaled(beta, -lr);
                Ok(ModeCoefficient {
                    m,
                    c,
                    d,
                    psi_over_phi: curve.z_at_radius,
                    underflow: c.underflows() || d.underflows(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeCoefficients {
            radius: self.radius,
            order: spectrum.order,
            entries,
            truncation_energy: spectrum.truncation_u,
        })
    }

    /// Boundary coefficients `(α_m, β_m)` implied by `coeffs`.
    pub fn boundary_spectrum(&self, coeffs: &ModeCoefficients) -> Result<FourierSpectrum> {
        let mut alpha = Vec::with_capacity(coeffs.entries.len());
        let mut beta = Vec::with_capacity(coeffs.entries.len());
        for e in &coeffs.entries {
            let curve = self.curve_or_err(e.m)?;
            let lr = curve.lambda_at_radius;
            let d_phi = e.d.times_exp(lr);
            alpha.push(e.c.times_exp(lr) + d_phi * curve.z_at_radius);
            beta.push(d_phi);
        }
        FourierSpectrum::from_coefficients(coeffs.order, alpha, beta)
    }

    /// `Σ (c_m φ_m(r) + d_m ψ_m(r)) e^{imθ}` for `r ≤ R`.
    pub fn evaluate(&self, coeffs: &ModeCoefficients, r: f64, theta: f64) -> Result<Evaluation> {
        if !(r >= 0.0) || r > self.radius * (1.0 + 1e-12) {
            return Err(Error::Domain { r, r_max: self.radius });
        }
        let mut value = Complex64::new(0.0, 0.0);
        for e in &coeffs.entries {
            let (lambda, log_z) = self.curve_or_err(e.m)?.eval(r);
            let phase = Complex64::from_polar(1.0, e.m as f64 * theta);
            let mut term = Complex64::new(0.0, 0.0);
            if lambda > f64::NEG_INFINITY {
                term += e.c.times_exp(lambda);
                if log_z > f64::NEG_INFINITY {
                    term += e.d.times_exp(lambda + log_z);
                }
            }
            value += term * phase;
        }
        Ok(Evaluation { value, truncation_estimate: coeffs.truncation_energy.sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficient {
    pub m: i64,
    pub c: ScaledComplex,
    pub d: ScaledComplex,
    /// `ψ_m(R)/φ_m(R)`: how strongly `β_m` feeds into `c_m`.
    pub psi_over_phi: f64,
    /// A coefficient is nonzero but rounds to zero as an ordinary number.
    pub underflow: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    pub radius: f64,
    pub order: usize,
    /// Ordered by `m` from `-M` to `M`.
    pub entries: Vec<ModeCoefficient>,
    /// Energy of the boundary trace beyond the truncation order.
    pub truncation_energy: f64,
}

impl ModeCoefficients {
    /// Coefficients given directly as ordinary numbers, indexed by `m + M`.
    pub fn from_plain(radius: f64, order: usize, c: &[Complex64], d: &[Complex64]) -> Result<Self> {
        let n = 2 * order + 1;
        if c.len() != n || d.len() != n {
            return Err(Error::InvalidParameter(format!("expected {n} coefficients for order {order}")));
        }
        let entries = (0..n)
            .map(|i| ModeCoefficient {
                m: i as i64 - order as i64,
                c: ScaledComplex::plain(c[i]),
                d: ScaledComplex::plain(d[i]),
                psi_over_phi: f64::NAN,
                underflow: false,
            })
            .collect();
        Ok(Self { radius, order, entries, truncation_energy: 0.0 })
    }

    pub fn get(&self, m: i64) -> Option<&ModeCoefficient> {
        self.entries.iter().find(|e| e.m == m)
    }

    pub fn any_underflow(&self) -> bool {
        self.entries.iter().any(|e| e.underflow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    /// Root energy of the discarded boundary frequencies.
    pub truncation_estimate: f64,
}

pub fn solve_disk_biharmonic(
    profile: &MetricProfile,
    radius: f64,
    spectrum: &FourierSpectrum,
) -> Result<(DiskModes, ModeCoefficients)> {
    let modes = DiskModes::new(profile, radius, spectrum.order)?;
    let coeffs = modes.solve(spectrum)?;
    Ok((modes, coeffs))
}

pub fn evaluate_solution(modes: &DiskModes, coeffs: &ModeCoefficients, r: f64, theta: f64) -> Result<Evaluation> {
    modes.evaluate(coeffs, r, theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResidual {
    pub m: i64,
    /// Largest `|L_m f - d φ_m|` over interior nodes, relative to the mode's boundary size.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiskReport {
    pub modes: Vec<ModeResidual>,
    pub max_residual: f64,
    /// Largest mismatch between the re-sampled and the given boundary coefficients.
    pub boundary_error: f64,
    /// Largest mismatch against the raw trace samples, relative to the trace size.
    pub trace_error: Option<f64>,
}

/// Per-mode residuals of the coupled system on `grid` plus boundary checks.
pub fn verify_disk_solution(
    modes: &DiskModes,
    coeffs: &ModeCoefficients,
    grid: &RadialGrid,
    spectrum: Option<&FourierSpectrum>,
    trace: Option<&BoundaryTrace>,
) -> Result<DiskReport> {
    if grid.last() > modes.radius * (1.0 + 1e-12) {
        return Err(Error::Domain { r: grid.last(), r_max: modes.radius });
    }
    let profile = &modes.profile;
    let table = ModeTable::new(profile, grid)?;
    let mut residuals = Vec::with_capacity(coeffs.entries.len());
    for e in &coeffs.entries {
        let curve = modes.curve_or_err(e.m)?;
        let b = table.biharmonic(e.m)?;
        let lr = curve.lambda_at_radius;
        // f = (a + b z) e^{Λ - Λ(R)} with a = c φ(R), b = d φ(R)
        let a = e.c.times_exp(lr);
        let bb = e.d.times_exp(lr);
        let scale = (a.norm() + bb.norm() * curve.z_at_radius).max(f64::MIN_POSITIVE);
        let decay: Vec<f64> = b.lambda.iter().map(|l| (l - lr).exp()).collect();
        let mut worst = 0.0f64;
        for part in [0usize, 1] {
            let pick = |z: Complex64| if part == 0 { z.re } else { z.im };
            let values: Vec<f64> = decay.iter().zip(&b.z).map(|(g, z)| pick(a + bb * *z) * g).collect();
            let lf = radial_laplacian_apply(profile, e.m, &RadialFunctionSamples::linear(grid.clone(), values)?)?;
            let n = grid.len();
            for i in 1..n - 1 {
                let res = (lf.values[i] - pick(bb) * decay[i]).abs() / scale;
                worst = worst.max(res);
            }
        }
        residuals.push(ModeResidual { m: e.m, max_residual: worst });
    }
    let max_residual = residuals.iter().fold(0.0f64, |a, r| a.max(r.max_residual));
    let implied = modes.boundary_spectrum(coeffs)?;
    let boundary_error = match spectrum {
        Some(s) => {
            let size = s.alpha.iter().chain(&s.beta).fold(1.0f64, |a, z| a.max(z.norm()));
            implied
                .modes()
                .map(|m| (implied.alpha(m) - s.alpha(m)).norm().max((implied.beta(m) - s.beta(m)).norm()))
                .fold(0.0f64, f64::max)
                / size
        }
        None => 0.0,
    };
    let trace_error = match trace {
        Some(t) => {
            let resampled = implied.synthesize(t.radius, t.len())?;
            let size = t.u.iter().chain(&t.lap_u).fold(1.0f64, |a, z| a.max(z.norm()));
            let err = resampled
                .u
                .iter()
                .zip(&t.u)
                .chain(resampled.lap_u.iter().zip(&t.lap_u))
                .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
            Some(err / size)
        }
        None => None,
    };
    Ok(DiskReport { modes: residuals, max_residual, boundary_error, trace_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_and_cosine_traces() {
        let t = BoundaryTrace::sample(1.0, 16, |_| c(1.0, 0.0), |_| c(0.0, 0.0)).unwrap();
        let s = analyze_trace(&t, 4).unwrap();
        assert!((s.alpha(0) - 1.0).norm() < 1e-15);
        assert!(s.modes().filter(|&m| m != 0).all(|m| s.alpha(m).norm() < 1e-15));

        let t = BoundaryTrace::sample(1.0, 16, |th| c((2.0 * th).cos(), 0.0), |_| c(0.0, 0.0)).unwrap();
        let s = analyze_trace(&t, 4).unwrap();
        assert!((s.alpha(2) - 0.5).norm() < 1e-15 && (s.alpha(-2) - 0.5).norm() < 1e-15);
        assert!(!s.aliasing_warning);
    }

    #[test]
    fn out_of_band_content_is_reported() {
        let t = BoundaryTrace::sample(1.0, 32, |th| c((9.0 * th).sin(), 0.0), |_| c(0.0, 0.0)).unwrap();
        let s = analyze_trace(&t, 4).unwrap();
        assert!(s.aliasing_warning);
        assert!((s.truncation_u - 0.5).abs() < 1e-14);
        assert!(analyze_trace(&t, 15).is_ok() && analyze_trace(&t, 16).is_err());
    }

    #[test]
    fn trace_validation() {
        assert!(BoundaryTrace::from_real(1.0, &[0.0; 6], &[0.0; 6]).is_err());
        assert!(BoundaryTrace::from_real(1.0, &[0.0; 8], &[0.0; 4]).is_err());
        assert!(BoundaryTrace::from_real(0.0, &[0.0; 8], &[0.0; 8]).is_err());
        assert!(BoundaryTrace::from_real(1.0, &[f64::NAN; 8], &[0.0; 8]).is_err());
    }

    #[test]
    fn euclidean_quadratic_solution() {
        let flat = MetricProfile::euclidean();
        let s = FourierSpectrum::from_coefficients(0, vec![c(0.25, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let (modes, coeffs) = solve_disk_biharmonic(&flat, 1.0, &s).unwrap();
        let e = coeffs.get(0).unwrap();
        assert!((e.d.to_complex() - 1.0).norm() < 1e-12, "{:?}", e.d);
        assert!(e.c.to_complex().norm() < 1e-12, "{:?}", e.c);
        for (r, th) in [(0.0, 0.0), (0.3, 1.0), (0.77, 4.0), (1.0, 2.0)] {
            let v = modes.evaluate(&coeffs, r, th).unwrap().value;
            assert!((v - r * r / 4.0).norm() < 1e-9, "{r}: {v}");
        }
        assert!(modes.evaluate(&coeffs, 1.01, 0.0).is_err());
        let grid = RadialGrid::uniform(0.05, 1.0, 40).unwrap();
        let rep = verify_disk_solution(&modes, &coeffs, &grid, Some(&s), None).unwrap();
        assert!(rep.max_residual < 1e-10 && rep.boundary_error < 1e-15, "{rep:?}");
    }

    #[test]
    fn harmonic_degeneration() {
        let hyp = MetricProfile::hyperbolic();
        let alpha: Vec<Complex64> = (-2..=2).map(|m| c(m as f64, 1.0)).collect();
        let s = FourierSpectrum::from_coefficients(2, alpha.clone(), vec![c(0.0, 0.0); 5]).unwrap();
        let (modes, coeffs) = solve_disk_biharmonic(&hyp, 2.0, &s).unwrap();
        for (e, a) in coeffs.entries.iter().zip(&alpha) {
            assert_eq!(e.d.to_complex(), c(0.0, 0.0));
            let phi = modes.curve(e.m).unwrap().lambda_at_radius.exp();
            assert!((e.c.to_complex() * phi - a).norm() < 1e-13);
        }
    }

    #[test]
    fn scaled_coefficients_survive_huge_modes() {
        let z = ScaledComplex::scaled(c(2.0, 0.0), -800.0);
        assert!(z.underflows());
        assert!((z.times_exp(800.0) - 2.0).norm() < 1e-15);
        assert!((z.ln_abs() - (2f64.ln() - 800.0)).abs() < 1e-12);
        let w = ScaledComplex::scaled(c(2.0, 0.0), 1.0);
        assert!(w.log_scale == 0.0 && (w.to_complex() - 2.0 * 1f64.exp()).norm() < 1e-15);
    }
}
