//! Dormand–Prince 5(4) embedded Runge–Kutta integrator with adaptive steps.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol > 0.0) || !(atol > 0.0) || !rtol.is_finite() || !atol.is_finite() {
            return Err(Error::InvalidParameter(format!("tolerances must be positive (rtol = {rtol}, atol = {atol})")));
        }
        Ok(Self { rtol, atol })
    }
}

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]);
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]),
{
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// True when the step observer requested an early stop.
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol, initial_step: None, max_step: f64::INFINITY, max_steps: 50_000_000 }
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.initial_step = Some(h);
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    /// Integrates from `t0` to exactly `t_end`, calling `observe(t, y, dy)`
    /// after every accepted step. Returning `ControlFlow::Break` stops the
    /// integration at that step.
    pub fn integrate<const N: usize, S, F>(
        &self,
        system: &S,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut observe: F,
    ) -> Result<Outcome<N>>
    where
        S: OdeSystem<N>,
        F: FnMut(f64, &[f64; N], &[f64; N]) -> ControlFlow<()>,
    {
        let span = t_end - t0;
        if !(span > 0.0) {
            return Err(Error::InvalidParameter(format!("empty interval [{t0}, {t_end}]")));
        }
        let mut t = t0;
        let mut y = y0;
        let mut k1 = [0.0; N];
        system.rhs(t, &y, &mut k1);
        let mut h =
            self.initial_step.unwrap_or_else(|| 1e-3 * span.min(t0.abs().max(1e-3))).min(span).min(self.max_step);
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
            ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);
        let mut tmp = [0.0; N];
        let mut y_new = [0.0; N];

        loop {
            if accepted + rejected > self.max_steps {
                return Err(Error::Integration { r: t, reason: "step budget exhausted".into() });
            }
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }
            if h <= 1e-14 * t.abs().max(1e-300) {
                return Err(Error::Integration { r: t, reason: "step size underflow".into() });
            }

            for i in 0..N {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            system.rhs(t + C2 * h, &tmp, &mut k2);
            for i in 0..N {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            system.rhs(t + C3 * h, &tmp, &mut k3);
            for i in 0..N {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            system.rhs(t + C4 * h, &tmp, &mut k4);
            for i in 0..N {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            system.rhs(t + C5 * h, &tmp, &mut k5);
            for i in 0..N {
                tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_next = if last { t_end } else { t + h };
            system.rhs(t_next, &tmp, &mut k6);
            for i in 0..N {
                y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            system.rhs(t_next, &y_new, &mut k7);

            let mut err = 0.0f64;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                rejected += 1;
                h *= 0.2;
                continue;
            }

            if err <= 1.0 {
                t = t_next;
                y = y_new;
                k1 = k7;
                accepted += 1;
                if let ControlFlow::Break(()) = observe(t, &y, &k1) {
                    return Ok(Outcome { t, y, accepted, rejected, stopped: true });
                }
                if last {
                    return Ok(Outcome { t, y, accepted, rejected, stopped: false });
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * factor).min(self.max_step);
            } else {
                rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
    }
}
