//! Pump head curves of the form `H = h0 - r * Q^n` with affinity-law
//! speed scaling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{GRAVITY, RHO};

pub const DEFAULT_EFFICIENCY: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PumpCurveError {
    #[error("three-point curve requires 0 = Q1 < Q2 < Q3, got {0:?}")]
    FlowOrdering([f64; 3]),
    #[error("three-point curve requires H1 > H2 > H3 >= 0, got {0:?}")]
    HeadOrdering([f64; 3]),
    #[error("fitted exponent {0} is not positive")]
    NonPositiveExponent(f64),
    #[error("unsupported curve with {0} points (expected 1 or 3)")]
    PointCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpModel {
    /// Shutoff head, m.
    pub h0: f64,
    pub r: f64,
    pub n: f64,
    pub efficiency: f64,
}

/// Fits `H = h0 - r Q^n` exactly through three operating points whose
/// first point is the shutoff head.
pub fn fit_pump_curve(points: [(f64, f64); 3]) -> Result<PumpModel, PumpCurveError> {
    let [(q1, h1), (q2, h2), (q3, h3)] = points;
    if !(q1 == 0.0 && q1 < q2 && q2 < q3) {
        return Err(PumpCurveError::FlowOrdering([q1, q2, q3]));
    }
    if !(h1 > h2 && h2 > h3 && h3 >= 0.0) {
        return Err(PumpCurveError::HeadOrdering([h1, h2, h3]));
    }
    let h0 = h1;
    let n = ((h0 - h3) / (h0 - h2)).ln() / (q3 / q2).ln();
    if !(n > 0.0) || !n.is_finite() {
        return Err(PumpCurveError::NonPositiveExponent(n));
    }
    let r = (h0 - h2) / q2.powf(n);
    Ok(PumpModel { h0, r, n, efficiency: DEFAULT_EFFICIENCY })
}

impl PumpModel {
    /// Builds a model from curve points: three points go through
    /// [`fit_pump_curve`]; a single design point uses the usual
    /// `h0 = 4/3 H`, `Qmax = 2 Q` quadratic.
    pub fn from_curve(points: &[(f64, f64)]) -> Result<Self, PumpCurveError> {
        match points {
            [(q, h)] if *q > 0.0 && *h > 0.0 => {
                let h0 = 4.0 / 3.0 * h;
                Ok(PumpModel { h0, r: (h0 - h) / (q * q), n: 2.0, efficiency: DEFAULT_EFFICIENCY })
            }
            [(q, h)] => Err(PumpCurveError::HeadOrdering([*h, *q, 0.0])),
            [a, b, c] => fit_pump_curve([*a, *b, *c]),
            _ => Err(PumpCurveError::PointCount(points.len())),
        }
    }

    /// Head gain at flow `q >= 0` and relative speed `speed`, without the
    /// floor at zero. Used by the solver to extend the curve beyond its
    /// zero-head flow.
    pub fn head_gain_raw(&self, q: f64, speed: f64) -> f64 {
        speed * speed * self.h0 - self.r * speed.powf(2.0 - self.n) * q.max(0.0).powf(self.n)
    }

    /// d(head gain)/dq, non-positive.
    pub fn head_gain_slope(&self, q: f64, speed: f64) -> f64 {
        -self.r * self.n * speed.powf(2.0 - self.n) * q.powf(self.n - 1.0)
    }

    /// Flow at which the head gain reaches zero for the given speed.
    pub fn max_flow(&self, speed: f64) -> f64 {
        speed * (self.h0 / self.r).powf(1.0 / self.n)
    }
}

/// Head gain (m) of a pump at flow `q` and relative speed `speed`,
/// floored at zero beyond the end of the curve.
pub fn pump_head(model: &PumpModel, q: f64, speed: f64) -> f64 {
    model.head_gain_raw(q, speed).max(0.0)
}

/// Electrical power (kW) drawn to lift `q` m³/s by `gain` m.
pub fn pump_power_kw(q: f64, gain: f64, efficiency: f64) -> f64 {
    RHO * GRAVITY * q * gain / (1000.0 * efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn fits_linear_curve() {
        let m = fit_pump_curve([(0.0, 500.0), (2000.0, 300.0), (4000.0, 100.0)]).unwrap();
        assert_eq!(m.h0, 500.0);
        assert!(rel(m.n, 1.0) < 1e-12);
        assert!(rel(m.r, 0.1) < 1e-12);

        let m = fit_pump_curve([(0.0, 100.0), (1.0, 90.0), (2.0, 80.0)]).unwrap();
        assert!(rel(m.n, 1.0) < 1e-12);
        assert!(rel(m.r, 10.0) < 1e-12);
    }

    #[test]
    fn fits_high_capacity_curve() {
        let pts = [(0.0, 500.0), (8000.0, 138.0), (14000.0, 86.0)];
        let m = fit_pump_curve(pts).unwrap();
        // closed form evaluated independently
        let n = (414.0f64 / 362.0).ln() / 1.75f64.ln();
        let r = 362.0 / 8000f64.powf(n);
        assert!(rel(m.n, n) < 1e-12);
        assert!(rel(m.r, r) < 1e-12);
        assert!((m.n - 0.2399).abs() < 1e-4);
        assert!((m.r - 41.93).abs() < 0.01);
        for (q, h) in pts {
            assert!(rel(pump_head(&m, q, 1.0), h) < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(matches!(
            fit_pump_curve([(1.0, 500.0), (2.0, 300.0), (3.0, 100.0)]),
            Err(PumpCurveError::FlowOrdering(_))
        ));
        assert!(matches!(
            fit_pump_curve([(0.0, 500.0), (2.0, 300.0), (3.0, 400.0)]),
            Err(PumpCurveError::HeadOrdering(_))
        ));
    }

    #[test]
    fn affinity_law_evaluation() {
        let m = PumpModel { h0: 500.0, r: 0.1, n: 1.0, efficiency: 0.75 };
        assert_eq!(pump_head(&m, 2000.0, 1.0), 300.0);
        assert_eq!(pump_head(&m, 0.0, 2.0), 2000.0);
        assert!((pump_head(&m, 500.0, 0.5) - 100.0).abs() < 1e-12);
        assert_eq!(pump_head(&m, 10_000.0, 1.0), 0.0);
    }

    #[test]
    fn single_point_curve() {
        let m = PumpModel::from_curve(&[(0.1, 30.0)]).unwrap();
        assert!(rel(pump_head(&m, 0.1, 1.0), 30.0) < 1e-12);
        assert!(rel(m.max_flow(1.0), 0.2) < 1e-12);
    }
}
