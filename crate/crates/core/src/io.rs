//! Profile definition files and CSV / key-value exports.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::ClassificationReport;
use crate::bvp::{theta_node, BoundaryTrace, ModeCoefficients};
use crate::error::{Error, Result};
use crate::geometry::{BuiltinParams, MetricProfile, Surface, BUILTIN_NAMES};
use crate::grid::RadialGrid;
use crate::modes::{BiharmonicMode, ResidualReport};
use crate::ode::Tolerances;

/// Seventeen significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush()?;
    Ok(())
}

/// A surface described by a built-in family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDefinition {
    #[serde(default)]
    pub name: Option<String>,
    pub family: String,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_r_max() -> f64 {
    1000.0
}

fn default_rtol() -> f64 {
    Tolerances::default().rtol
}

fn default_atol() -> f64 {
    Tolerances::default().atol
}

impl ProfileDefinition {
    pub fn builtin(family: &str) -> Self {
        Self {
            name: None,
            family: family.into(),
            eps: None,
            eta: None,
            r0: None,
            r_max: default_r_max(),
            rtol: default_rtol(),
            atol: default_atol(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let def: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        def.validate()?;
        Ok(def)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !BUILTIN_NAMES.contains(&self.family.as_str()) {
            return Err(Error::UnknownProfile(self.family.clone()));
        }
        if !(self.r_max >= 1.0) || !self.r_max.is_finite() {
            return Err(Error::InvalidParameter(format!("r_max must be at least 1, got {}", self.r_max)));
        }
        Tolerances::new(self.rtol, self.atol)?;
        Ok(())
    }

    pub fn params(&self) -> BuiltinParams {
        BuiltinParams { eps: self.eps, eta: self.eta, r0: self.r0 }
    }

    pub fn build(&self) -> Result<Surface> {
        self.validate()?;
        let mut s = Surface::builtin(&self.family, &self.params(), self.r_max, Tolerances::new(self.rtol, self.atol)?)?;
        if let Some(n) = &self.name {
            s.name = n.clone();
        }
        Ok(s)
    }
}

pub fn write_profile_csv<W: Write>(w: W, surface: &Surface, grid: &RadialGrid) -> Result<()> {
    let mut out = writer(w, &["r", "phi", "phi_prime", "K"])?;
    for &r in grid.nodes() {
        let p: &MetricProfile = &surface.metric;
        let row = [fmt_num(r), fmt_num(p.phi(r)?), fmt_num(p.phi_prime(r)?), fmt_num(surface.curvature.eval(r))];
        out.write_record(&row).map_err(csv_err)?;
    }
    finish(out)
}

/// One row per node; `err_bound` bounds the error of `log_psi_m`.
pub fn write_mode_csv<W: Write>(w: W, mode: &BiharmonicMode) -> Result<()> {
    let mut out = writer(w, &["r", "lambda_m", "z", "log_psi_m", "err_bound"])?;
    for (i, &r) in mode.grid.nodes().iter().enumerate() {
        let bound = mode.lambda_error[i] + mode.quadrature_error[i] / mode.z[i];
        let row = [fmt_num(r), fmt_num(mode.lambda[i]), fmt_num(mode.z[i]), fmt_num(mode.log_psi[i]), fmt_num(bound)];
        out.write_record(&row).map_err(csv_err)?;
    }
    finish(out)
}

pub fn write_residual_csv<W: Write>(w: W, report: &ResidualReport) -> Result<()> {
    let mut out = writer(w, &["r", "residual"])?;
    for (r, v) in report.r.iter().zip(&report.residual) {
        out.write_record([fmt_num(*r), fmt_num(*v)]).map_err(csv_err)?;
    }
    finish(out)
}

pub fn write_evidence_csv<W: Write>(w: W, report: &ClassificationReport) -> Result<()> {
    let mut out = writer(w, &["m", "phi_m_verdict", "z_verdict", "ratio_slope"])?;
    for e in &report.evidence.modes {
        out.write_record([
            e.m.to_string(),
            e.phi_m.verdict.to_string(),
            e.z.verdict.to_string(),
            fmt_num(e.ratio_slope),
        ])
        .map_err(csv_err)?;
    }
    finish(out)
}

#[derive(Serialize)]
struct ReportText<'a> {
    surface: &'a str,
    horizon: f64,
    harmonic: String,
    biharmonic: String,
    route: String,
    harmonic_route: String,
    biharmonic_route: String,
    numeric: NumericText,
    declared: DeclaredText,
}

#[derive(Serialize)]
struct NumericText {
    harmonic: String,
    biharmonic: String,
    log_derivative_limit: f64,
    phi_growth: String,
    mean_ratio_slope: f64,
}

#[derive(Serialize)]
struct DeclaredText {
    class: String,
    from_radius: f64,
    verified: bool,
    phi_nondecreasing: bool,
    harmonic: String,
    biharmonic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_exponent: Option<f64>,
}

/// Key-value text form of a classification report.
pub fn report_text(report: &ClassificationReport) -> Result<String> {
    let d = &report.declared;
    let text = ReportText {
        surface: &report.surface,
        horizon: report.horizon,
        harmonic: report.harmonic_regime.to_string(),
        biharmonic: report.biharmonic_regime.to_string(),
        route: report.route.to_string(),
        harmonic_route: report.harmonic_route.to_string(),
        biharmonic_route: report.biharmonic_route.to_string(),
        numeric: NumericText {
            harmonic: report.numeric_harmonic.to_string(),
            biharmonic: report.numeric_biharmonic.to_string(),
            log_derivative_limit: report.log_derivative.extrapolated,
            phi_growth: report.evidence.phi_growth.verdict.to_string(),
            mean_ratio_slope: report.evidence.mean_ratio_slope,
        },
        declared: DeclaredText {
            class: d.class.as_ref().map_or_else(|| "none".into(), |c| c.label()),
            from_radius: d.from_radius,
            verified: d.check.as_ref().is_some_and(|c| c.holds),
            phi_nondecreasing: d.phi_nondecreasing,
            harmonic: d.harmonic.to_string(),
            biharmonic: d.biharmonic.to_string(),
            note: d.note.clone(),
            fitted_exponent: d.fit.as_ref().map(|f| f.power_exponent),
        },
    };
    toml::to_string(&text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_coefficients_csv<W: Write>(w: W, coeffs: &ModeCoefficients) -> Result<()> {
    let mut out = writer(w, &["m", "re_c", "im_c", "re_d", "im_d"])?;
    for e in &coeffs.entries {
        let (c, d) = (e.c.to_complex(), e.d.to_complex());
        out.write_record([e.m.to_string(), fmt_num(c.re), fmt_num(c.im), fmt_num(d.re), fmt_num(d.im)])
            .map_err(csv_err)?;
    }
    finish(out)
}

/// Writes the real parts of a trace.
pub fn write_trace_csv<W: Write>(w: W, trace: &BoundaryTrace) -> Result<()> {
    let mut out = writer(w, &["theta", "u", "lap_u"])?;
    for k in 0..trace.len() {
        out.write_record([fmt_num(trace.theta(k)), fmt_num(trace.u[k].re), fmt_num(trace.lap_u[k].re)])
            .map_err(csv_err)?;
    }
    finish(out)
}

/// Reads a real trace; the angles must be the equispaced nodes `2πk/N`.
pub fn read_trace_csv<R: Read>(r: R, radius: f64) -> Result<BoundaryTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["theta", "u", "lap_u"] {
        return Err(Error::Parse(format!(
            "expected header theta,u,lap_u, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut theta = Vec::new();
    let mut u = Vec::new();
    let mut lap = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {i}", line + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))
        };
        theta.push(field(0)?);
        u.push(Complex64::new(field(1)?, 0.0));
        lap.push(Complex64::new(field(2)?, 0.0));
    }
    let n = theta.len();
    for (k, &t) in theta.iter().enumerate() {
        if (t - theta_node(k, n)).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "row {}: theta {t} is not the equispaced node {}",
                k + 1,
                theta_node(k, n)
            )));
        }
    }
    BoundaryTrace::new(radius, u, lap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_definition_round_trip() {
        let text = "family = \"power-curvature\"\neps = 1.0\nr_max = 50.0\n";
        let def = ProfileDefinition::parse(text).unwrap();
        assert_eq!(def.eps, Some(1.0));
        assert_eq!(def.rtol, 1e-10);
        assert_eq!(ProfileDefinition::parse(&def.to_toml().unwrap()).unwrap(), def);
        assert!(ProfileDefinition::parse("family = \"sphere\"").is_err());
        assert!(ProfileDefinition::parse("family = \"euclidean\"\nbogus = 1").is_err());
        assert!(ProfileDefinition::parse("family = \"euclidean\"\nrtol = -1.0").is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let t =
            BoundaryTrace::sample(1.0, 8, |th| Complex64::new(th.cos(), 0.0), |_| Complex64::new(0.5, 0.0)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,u,lap_u\n0.0000000000000000e0,1.0000000000000000e0,"));
        let back = read_trace_csv(buf.as_slice(), 1.0).unwrap();
        assert_eq!(back, t);
        let bad = "theta,u,lap_u\n0,1,0\n0.5,1,0\n";
        assert!(read_trace_csv(bad.as_bytes(), 1.0).is_err());
    }

    #[test]
    fn profile_csv_header() {
        let s = Surface::builtin("euclidean", &BuiltinParams::default(), 10.0, Tolerances::default()).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &s, &RadialGrid::uniform(1.0, 2.0, 3).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r,phi,phi_prime,K");
        assert_eq!(lines[2], "1.5000000000000000e0,1.5000000000000000e0,1.0000000000000000e0,0.0000000000000000e0");
    }
}
