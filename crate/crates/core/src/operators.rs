//! Separated radial Laplacian `L_m f = f'' + (φ'/φ) f' - (m²/φ²) f` on
//! sampled functions, and a numerical checker for the Sturm comparison lemma.

use crate::error::{Error, Result};
use crate::geometry::MetricProfile;
use crate::grid::RadialGrid;

/// Finite-difference weights (Fornberg) for derivatives `0..=max_deriv` at
/// `x0` from values at `nodes`. Returns `w[d][j]`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Linear,
    /// Values hold `log f` of a positive function.
    Logarithmic,
}

/// Samples of a radial factor `f(r)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunctionSamples {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
    pub representation: Representation,
}

impl RadialFunctionSamples {
    pub fn new(grid: RadialGrid, values: Vec<f64>, representation: Representation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values, representation })
    }

    pub fn linear(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, Representation::Linear)
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::linear(grid, values)
    }

    /// Linear values; overflows to `inf` for large logarithmic samples.
    pub fn linear_values(&self) -> Vec<f64> {
        match self.representation {
            Representation::Linear => self.values.clone(),
            Representation::Logarithmic => self.values.iter().map(|v| v.exp()).collect(),
        }
    }
}

/// First and second derivatives: three-point centered stencils inside,
/// four-point one-sided stencils at the ends. All are exact on quadratics.
pub fn derivatives(nodes: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let range = if i == 0 {
            0..4
        } else if i == n - 1 {
            n - 4..n
        } else {
            i - 1..i + 2
        };
        let w = fornberg_weights(nodes[i], &nodes[range.clone()], 2);
        let vals = &values[range];
        d1[i] = w[1].iter().zip(vals).map(|(a, b)| a * b).sum();
        d2[i] = w[2].iter().zip(vals).map(|(a, b)| a * b).sum();
    }
    (d1, d2)
}

/// Five-point (fourth order inside) derivatives, used as the reference for
/// finite-difference error estimates.
fn derivatives_wide(nodes: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(2).min(n - 5);
        let w = fornberg_weights(nodes[i], &nodes[lo..lo + 5], 2);
        let vals = &values[lo..lo + 5];
        d1[i] = w[1].iter().zip(vals).map(|(a, b)| a * b).sum();
        d2[i] = w[2].iter().zip(vals).map(|(a, b)| a * b).sum();
    }
    (d1, d2)
}

fn validate(profile: &MetricProfile, m: i64, f: &RadialFunctionSamples) -> Result<()> {
    if f.grid.len() < 5 {
        return Err(Error::Grid(format!("need at least 5 nodes, got {}", f.grid.len())));
    }
    if let Some(i) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if m != 0 && f.grid.first() <= 0.0 {
        return Err(Error::Grid("grid must exclude r = 0 when m != 0".into()));
    }
    if f.grid.last() > profile.r_max() * (1.0 + 1e-12) {
        return Err(Error::Domain { r: f.grid.last(), r_max: profile.r_max() });
    }
    Ok(())
}

/// Applies `L_m` to `f`. For logarithmic input the result is still returned
/// as linear samples of `L_m f`.
pub fn radial_laplacian_apply(
    profile: &MetricProfile,
    m: i64,
    f: &RadialFunctionSamples,
) -> Result<RadialFunctionSamples> {
    validate(profile, m, f)?;
    let nodes = f.grid.nodes();
    let values = match f.representation {
        Representation::Linear => {
            let (d1, d2) = derivatives(nodes, &f.values);
            let m2 = (m * m) as f64;
            nodes
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    if r == 0.0 {
                        // radial limit: f'' + f'/r -> 2 f''(0)
                        2.0 * d2[i]
                    } else {
                        let ip = profile.inv_phi(r);
                        d2[i] + profile.dlog(r) * d1[i] - m2 * ip * ip * f.values[i]
                    }
                })
                .collect::<Vec<_>>()
        }
        Representation::Logarithmic => {
            let rel = relative_laplacian(profile, m, f)?;
            rel.iter().zip(&f.values).map(|(q, l)| q * l.exp()).collect()
        }
    };
    if let Some(i) = values.iter().position(|v: &f64| !v.is_finite()) {
        return Err(Error::Overflow { r: nodes[i] });
    }
    RadialFunctionSamples::linear(f.grid.clone(), values)
}

/// `(L_m f)/f` for a positive function given as `log f` samples.
pub fn relative_laplacian(profile: &MetricProfile, m: i64, f: &RadialFunctionSamples) -> Result<Vec<f64>> {
    validate(profile, m, f)?;
    if f.representation != Representation::Logarithmic {
        return Err(Error::InvalidParameter("relative Laplacian needs logarithmic samples".into()));
    }
    let nodes = f.grid.nodes();
    if nodes[0] <= 0.0 {
        return Err(Error::Grid("logarithmic samples need r > 0".into()));
    }
    let (l1, l2) = derivatives(nodes, &f.values);
    let m2 = (m * m) as f64;
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let ip = profile.inv_phi(r);
            l2[i] + l1[i] * l1[i] + profile.dlog(r) * l1[i] - m2 * ip * ip
        })
        .collect())
}

/// Outcome of checking the comparison lemma on sampled `f`, `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `f'/f(a) ≤ h'/h(a)`.
    pub initial_ordering: bool,
    /// Per node (index ≥ 1): `f''/f ≤ h''/h`.
    pub curvature_ordering: Vec<bool>,
    /// Per node (index ≥ 1): `f'/f ≤ h'/h`.
    pub conclusion: Vec<bool>,
    pub first_hypothesis_violation: Option<usize>,
    pub first_conclusion_violation: Option<usize>,
    pub f_log_derivative: Vec<f64>,
    pub h_log_derivative: Vec<f64>,
}

impl ComparisonReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.initial_ordering && self.curvature_ordering.iter().all(|&b| b)
    }

    pub fn conclusion_holds(&self) -> bool {
        self.conclusion.iter().all(|&b| b)
    }

    /// False only when the hypotheses hold but the conclusion fails.
    pub fn consistent(&self) -> bool {
        !self.hypotheses_hold() || self.conclusion_holds()
    }
}

/// Default relative tolerance of [`sturm_compare`], added on top of the
/// estimated finite-difference error at each node.
pub const COMPARISON_REL_TOL: f64 = 1e-9;

/// Checks the comparison lemma on `[a, ∞)` for samples on a common grid
/// whose first node is `a`. Comparisons at each node allow the relative
/// tolerance plus the estimated finite-difference error of both sides.
pub fn sturm_compare(f: &RadialFunctionSamples, h: &RadialFunctionSamples, rel_tol: f64) -> Result<ComparisonReport> {
    if f.grid != h.grid {
        return Err(Error::Grid("comparison needs a common grid".into()));
    }
    if f.grid.len() < 5 {
        return Err(Error::Grid("comparison needs at least 5 nodes".into()));
    }
    let fv = f.linear_values();
    let hv = h.linear_values();
    for (i, (&a, &b)) in fv.iter().zip(&hv).enumerate() {
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("samples must be positive (index {i})")));
        }
    }
    let nodes = f.grid.nodes();
    let ratios = |v: &[f64]| {
        let (d1, d2) = derivatives(nodes, v);
        let (w1, w2) = derivatives_wide(nodes, v);
        let n = v.len();
        let mut first = vec![0.0; n];
        let mut second = vec![0.0; n];
        let mut err1 = vec![0.0; n];
        let mut err2 = vec![0.0; n];
        for i in 0..n {
            first[i] = w1[i] / v[i];
            second[i] = w2[i] / v[i];
            err1[i] = (w1[i] - d1[i]).abs() / v[i];
            err2[i] = (w2[i] - d2[i]).abs() / v[i];
        }
        (first, second, err1, err2)
    };
    let (f1, f2, fe1, fe2) = ratios(&fv);
    let (h1, h2, he1, he2) = ratios(&hv);
    let le = |a: f64, b: f64, err: f64| a <= b + rel_tol * a.abs().max(b.abs()).max(1.0) + err;

    let initial_ordering = le(f1[0], h1[0], fe1[0] + he1[0]);
    let n = fv.len();
    let mut curvature_ordering = Vec::with_capacity(n - 1);
    let mut conclusion = Vec::with_capacity(n - 1);
    for i in 1..n {
        curvature_ordering.push(le(f2[i], h2[i], fe2[i] + he2[i]));
        conclusion.push(le(f1[i], h1[i], fe1[i] + he1[i]));
    }
    let first_hypothesis_violation =
        if !initial_ordering { Some(0) } else { curvature_ordering.iter().position(|&b| !b).map(|i| i + 1) };
    let first_conclusion_violation = conclusion.iter().position(|&b| !b).map(|i| i + 1);
    Ok(ComparisonReport {
        initial_ordering,
        curvature_ordering,
        conclusion,
        first_hypothesis_violation,
        first_conclusion_violation,
        f_log_derivative: f1,
        h_log_derivative: h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_centered_second_difference() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn flat_laplacian_of_r_squared() {
        let grid = RadialGrid::uniform(0.0, 2.0, 41).unwrap();
        let f = RadialFunctionSamples::from_fn(grid.clone(), |r| r * r).unwrap();
        let lf = radial_laplacian_apply(&MetricProfile::euclidean(), 0, &f).unwrap();
        for v in &lf.values {
            assert!((v - 4.0).abs() < 1e-10, "{v}");
        }
        let grid = RadialGrid::geometric(0.1, 3.0, 40).unwrap();
        let f = RadialFunctionSamples::from_fn(grid, |r| r * r).unwrap();
        let lf = radial_laplacian_apply(&MetricProfile::euclidean(), 2, &f).unwrap();
        assert!(lf.values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn laplacian_input_errors() {
        let p = MetricProfile::euclidean();
        let small = RadialFunctionSamples::from_fn(RadialGrid::uniform(0.1, 1.0, 4).unwrap(), |r| r).unwrap();
        assert!(matches!(radial_laplacian_apply(&p, 0, &small), Err(Error::Grid(_))));
        let at_zero = RadialFunctionSamples::from_fn(RadialGrid::uniform(0.0, 1.0, 8).unwrap(), |r| r).unwrap();
        assert!(radial_laplacian_apply(&p, 1, &at_zero).is_err());
        let grid = RadialGrid::uniform(0.1, 1.0, 8).unwrap();
        assert!(RadialFunctionSamples::linear(grid, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn second_order_convergence_on_uniform_grids() {
        // f = sin r, L_1 f in the flat metric: -sin r + cos r / r - sin r / r²
        let exact = |r: f64| -r.sin() + r.cos() / r - r.sin() / (r * r);
        let residual = |n: usize| {
            let grid = RadialGrid::uniform(0.5, 3.0, n).unwrap();
            let f = RadialFunctionSamples::from_fn(grid.clone(), f64::sin).unwrap();
            let lf = radial_laplacian_apply(&MetricProfile::euclidean(), 1, &f).unwrap();
            grid.nodes()[1..n - 1]
                .iter()
                .zip(&lf.values[1..n - 1])
                .map(|(&r, v)| (v - exact(r)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = residual(51) / residual(101);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn comparison_reflexive_and_violated_hypothesis() {
        let grid = RadialGrid::uniform(1.0, 10.0, 181).unwrap();
        let f = RadialFunctionSamples::from_fn(grid.clone(), f64::sinh).unwrap();
        let same = sturm_compare(&f, &f, COMPARISON_REL_TOL).unwrap();
        assert!(same.hypotheses_hold() && same.conclusion_holds());

        let h = RadialFunctionSamples::from_fn(grid, f64::exp).unwrap();
        let rep = sturm_compare(&f, &h, COMPARISON_REL_TOL).unwrap();
        assert!(!rep.initial_ordering);
        assert!(rep.curvature_ordering.iter().all(|&b| b));
        assert!(!rep.hypotheses_hold());
        assert_eq!(rep.first_hypothesis_violation, Some(0));
        assert!(rep.consistent());
    }

    #[test]
    fn comparison_with_threshold_function() {
        // ψ = (r - R0 + 1) log(r - R0 + 1) against h = e^{2r}, starting at a = R0 + 1
        let r0 = 3.0;
        let grid = RadialGrid::uniform(r0 + 1.0, 30.0, 400).unwrap();
        let f = RadialFunctionSamples::from_fn(grid.clone(), |r| {
            let x = r - r0 + 1.0;
            x * x.ln()
        })
        .unwrap();
        let h = RadialFunctionSamples::from_fn(grid, |r| (2.0 * (r - 4.0)).exp()).unwrap();
        let rep = sturm_compare(&f, &h, COMPARISON_REL_TOL).unwrap();
        assert!(rep.hypotheses_hold());
        assert!(rep.conclusion_holds());
    }

    #[test]
    fn comparison_rejects_nonpositive() {
        let grid = RadialGrid::uniform(0.0, 1.0, 10).unwrap();
        let f = RadialFunctionSamples::from_fn(grid.clone(), |r| r).unwrap();
        let h = RadialFunctionSamples::from_fn(grid, |r| 1.0 + r).unwrap();
        assert!(sturm_compare(&f, &h, COMPARISON_REL_TOL).is_err());
    }
}
