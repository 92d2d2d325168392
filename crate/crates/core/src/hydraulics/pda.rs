//! Pressure-driven demand: Wagner's relation with C¹ cubic blends next to
//! both breakpoints.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdaParams {
    /// Pressure (psi) below which nothing is delivered.
    pub p_min: f64,
    /// Pressure (psi) at which full demand is delivered.
    pub p_req: f64,
    pub p_exp: f64,
    /// Width (psi) of each blend zone.
    pub smoothing_eps: f64,
}

impl Default for PdaParams {
    fn default() -> Self {
        PdaParams { p_min: 0.0, p_req: 60.0, p_exp: 0.5, smoothing_eps: 0.5 }
    }
}

impl PdaParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_min < self.p_req) {
            return Err("p_min must be below p_req".into());
        }
        if !(self.p_exp > 0.0) {
            return Err("p_exp must be positive".into());
        }
        if !(self.smoothing_eps > 0.0 && self.smoothing_eps < (self.p_req - self.p_min) / 4.0) {
            return Err("smoothing_eps must lie in (0, (p_req - p_min)/4)".into());
        }
        Ok(())
    }

    fn raw(&self, p: f64) -> (f64, f64) {
        let span = self.p_req - self.p_min;
        let x = (p - self.p_min) / span;
        let v = x.powf(self.p_exp);
        (v, self.p_exp * v / x / span)
    }
}

/// Cubic Hermite on [x0, x1].
fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1;
    let d = ((6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * h * m0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * h * m1)
        / h;
    (v, d)
}

/// Delivered fraction and its derivative with respect to pressure (1/psi).
pub fn pda_factor_with_slope(pressure: f64, params: &PdaParams) -> (f64, f64) {
    let PdaParams { p_min, p_req, smoothing_eps: eps, .. } = *params;
    if pressure <= p_min {
        (0.0, 0.0)
    } else if pressure >= p_req {
        (1.0, 0.0)
    } else if pressure < p_min + eps {
        let (v1, m1) = params.raw(p_min + eps);
        hermite(pressure, p_min, p_min + eps, 0.0, v1, 0.0, m1)
    } else if pressure > p_req - eps {
        let (v0, m0) = params.raw(p_req - eps);
        hermite(pressure, p_req - eps, p_req, v0, 1.0, m0, 0.0)
    } else {
        params.raw(pressure)
    }
}

/// Fraction of requested demand delivered at `pressure` psi.
pub fn pda_factor(pressure: f64, params: &PdaParams) -> f64 {
    pda_factor_with_slope(pressure, params).0.clamp(0.0, 1.0)
}
