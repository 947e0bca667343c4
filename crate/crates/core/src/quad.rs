//! Adaptive Gauss–Kronrod quadrature and piecewise Chebyshev primitives.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 4000 }
    }
}

impl QuadSettings {
    pub fn rel(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let asc = asc * half.abs();
    let value = kronrod * half;
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * value.abs();
    if error < floor {
        error = floor;
    }
    Panel { a, b, value, error }
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, settings: QuadSettings) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("bad quadrature interval [{a}, {b}]")));
    }
    let first = gk15(&mut f, a, b);
    let mut evals = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        if !value.is_finite() {
            return Err(Error::Quadrature { a, b, estimate: f64::INFINITY });
        }
        let target = settings.abs_tol.max(settings.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult { value, error, evals });
        }
        let worst = heap.pop().expect("heap is never empty");
        if heap.len() + 2 > settings.max_panels || worst.b - worst.a <= 1e-15 * worst.a.abs().max(worst.b.abs()) {
            return Err(Error::Quadrature { a: worst.a, b: worst.b, estimate: error });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        evals += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Refresh the running sums occasionally so cancellation does not drift.
        if evals % 3000 == 0 {
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}

const CHEB_ORDER: usize = 24;

#[derive(Debug, Clone)]
struct ChebPiece {
    a: f64,
    b: f64,
    /// Chebyshev coefficients of the primitive on this piece (zero at `a`).
    coef: Vec<f64>,
    offset: f64,
}

/// Piecewise Chebyshev representation of `x -> ∫_a^x f`, built adaptively.
#[derive(Debug, Clone)]
pub struct ChebPrimitive {
    pieces: Vec<ChebPiece>,
    /// Bound on the absolute error of the primitive over the whole interval.
    pub error: f64,
}

fn clenshaw(coef: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coef.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + 0.5 * coef[0]
}

impl ChebPrimitive {
    pub fn build<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<Self> {
        Self::build_with_magnitude(
            |x| {
                let v = f(x);
                (v, v.abs())
            },
            a,
            b,
            abs_tol,
        )
    }

    /// Like [`build`](Self::build), but `f` also returns the magnitude of
    /// the terms whose difference forms the value, which sets the rounding
    /// floor when the value is a cancellation.
    pub fn build_with_magnitude<F: FnMut(f64) -> (f64, f64)>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidParameter(format!("bad primitive interval [{a}, {b}]")));
        }
        let mut pieces = Vec::new();
        let mut error = 0.0;
        let mut stack = vec![(a, b, 0u32, f64::INFINITY)];
        while let Some((lo, hi, depth, parent_tail)) = stack.pop() {
            let (coef, tail, magnitude) = Self::fit(&mut f, lo, hi);
            // Rounding floor of the fit on this piece, independent of its width share.
            let scale = coef.iter().map(|c| c.abs()).sum::<f64>();
            let floor = 64.0 * f64::EPSILON * (scale + 0.5 * (hi - lo) * magnitude);
            let local_tol = (abs_tol * (hi - lo) / (b - a)).max(floor);
            // Once the tail is tiny, halving that fails to shrink it means
            // the remainder is evaluation noise rather than structure.
            let stalled = tail <= 1e-9 * scale && tail > 0.25 * parent_tail;
            if tail > local_tol && !stalled && depth < 30 && pieces.len() + stack.len() < 100_000 {
                let mid = 0.5 * (lo + hi);
                stack.push((mid, hi, depth + 1, tail));
                stack.push((lo, mid, depth + 1, tail));
                continue;
            }
            if !coef.iter().all(|c| c.is_finite()) {
                return Err(Error::Quadrature { a: lo, b: hi, estimate: f64::INFINITY });
            }
            error += tail;
            pieces.push(ChebPiece { a: lo, b: hi, coef, offset: 0.0 });
        }
        let mut running = 0.0;
        for p in pieces.iter_mut() {
            p.offset = running;
            running += clenshaw(&p.coef, 1.0);
        }
        Ok(Self { pieces, error })
    }

    fn fit<F: FnMut(f64) -> (f64, f64)>(f: &mut F, a: f64, b: f64) -> (Vec<f64>, f64, f64) {
        let n = CHEB_ORDER;
        let half = 0.5 * (b - a);
        let center = 0.5 * (a + b);
        let theta: Vec<f64> = (0..n).map(|k| std::f64::consts::PI * (k as f64 + 0.5) / n as f64).collect();
        let mut magnitude: f64 = 0.0;
        let values: Vec<f64> = theta
            .iter()
            .map(|t| {
                let (v, mag) = f(center + half * t.cos());
                magnitude = magnitude.max(mag);
                v
            })
            .collect();
        let mut c = vec![0.0; n + 2];
        for (j, cj) in c.iter_mut().enumerate().take(n) {
            let s: f64 = values.iter().zip(&theta).map(|(v, t)| v * (j as f64 * t).cos()).sum();
            *cj = 2.0 * s / n as f64;
        }
        let tail = (c[n - 1].abs() + c[n - 2].abs() + c[n - 3].abs()) * half.abs();
        // Primitive coefficients with the convention f = c0/2 + sum c_j T_j.
        let mut big = vec![0.0; n + 1];
        for k in 1..=n {
            big[k] = half * (c[k - 1] - c[k + 1]) / (2.0 * k as f64);
        }
        // Choose the constant so the primitive vanishes at x = -1.
        let mut at_minus_one = 0.0;
        for (k, bk) in big.iter().enumerate().skip(1) {
            at_minus_one += if k % 2 == 0 { *bk } else { -*bk };
        }
        big[0] = -2.0 * at_minus_one;
        (big, tail, magnitude)
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn start(&self) -> f64 {
        self.pieces[0].a
    }

    pub fn end(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].b
    }

    /// `∫_start^x f`, for `x` clamped into the interval.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.b < x).min(self.pieces.len() - 1);
        let p = &self.pieces[i];
        let t = ((2.0 * x - p.a - p.b) / (p.b - p.a)).clamp(-1.0, 1.0);
        p.offset + clenshaw(&p.coef, t)
    }

    pub fn total(&self) -> f64 {
        self.eval(self.end())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, QuadSettings::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn gk_boundary_layer() {
        // ∫_0^10 exp(1e4 (x - 10)) dx = (1 - e^{-1e5}) / 1e4
        let r = integrate(|x| (1e4 * (x - 10.0)).exp(), 0.0, 10.0, QuadSettings::rel(1e-12)).unwrap();
        assert!((r.value * 1e4 - 1.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn gk_integrable_log_singularity() {
        let r = integrate(|x: f64| if x > 0.0 { x.ln() } else { 0.0 }, 0.0, 1.0, QuadSettings::rel(1e-10)).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn cheb_primitive_matches_closed_form() {
        let p = ChebPrimitive::build(|x: f64| x.cos(), 0.0, 7.0, 1e-15).unwrap();
        for x in [0.0, 0.3, 2.0, 5.5, 7.0] {
            assert!((p.eval(x) - x.sin()).abs() < 1e-13, "x={x}");
        }
        assert!(p.error < 1e-12);
    }

    #[test]
    fn cheb_primitive_splits_when_needed() {
        let p = ChebPrimitive::build(|x: f64| 1.0 / x, 1e-3, 1.0, 1e-14).unwrap();
        assert!(p.pieces.len() > 1);
        assert!((p.total() - 1e3f64.ln()).abs() < 1e-11);
    }
}
