use serde::{Deserialize, Serialize};

use crate::hydraulics::EpisodeResult;
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma1: f64,
    /// Weight per kWh.
    pub gamma2: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub h_star: f64,
    pub h_max: f64,
    pub h_min: f64,
    /// Added in proportion to the fraction of non-converged steps.
    pub nonconvergence_surcharge: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma1: 1.0,
            gamma2: 1e-3,
            lambda_max: 10.0,
            lambda_min: 10.0,
            h_star: 60.0,
            h_max: 100.0,
            h_min: 20.0,
            nonconvergence_surcharge: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), String> {
        let weights = [self.gamma1, self.gamma2, self.lambda_max, self.lambda_min, self.nonconvergence_surcharge];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err("loss weights must be non-negative".into());
        }
        if !(self.h_min < self.h_star && self.h_star < self.h_max) {
            return Err("need h_min < h_star < h_max".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean squared relative deviation from `h_star`, unweighted.
    pub pressure: f64,
    /// Episode kWh, unweighted.
    pub energy_kwh: f64,
    pub barrier_max: f64,
    pub barrier_min: f64,
    pub nonconverged_fraction: f64,
}

/// Per node-hour terms (deviation, upper hinge, lower hinge), all squared
/// and normalized by `h_star`.
pub fn pressure_terms(h: f64, cfg: &LossConfig) -> (f64, f64, f64) {
    let dev = ((h - cfg.h_star) / cfg.h_star).powi(2);
    let over = ((h - cfg.h_max) / cfg.h_star).max(0.0).powi(2);
    let under = ((cfg.h_min - h) / cfg.h_star).max(0.0).powi(2);
    (dev, over, under)
}

/// Loss over the interest nodes of every step in `result`.
pub fn episode_loss(result: &EpisodeResult, net: &Network, cfg: &LossConfig) -> LossBreakdown {
    let nodes: Vec<usize> = net.interest_nodes().iter().filter_map(|id| net.node_idx(id)).collect();
    let (mut dev, mut over, mut under, mut count) = (0.0, 0.0, 0.0, 0usize);
    for step in &result.steps {
        for &i in &nodes {
            let (d, o, u) = pressure_terms(step.state.pressures[i], cfg);
            dev += d;
            over += o;
            under += u;
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    let energy_kwh = result.total_energy_kwh();
    let nonconverged_fraction = if result.steps.is_empty() {
        0.0
    } else {
        result.non_converged_steps() as f64 / result.steps.len() as f64
    };
    let mut b = LossBreakdown {
        total: 0.0,
        pressure: dev / n,
        energy_kwh,
        barrier_max: over / n,
        barrier_min: under / n,
        nonconverged_fraction,
    };
    b.total = cfg.gamma1 * b.pressure
        + cfg.gamma2 * b.energy_kwh
        + cfg.lambda_max * b.barrier_max
        + cfg.lambda_min * b.barrier_min
        + cfg.nonconvergence_surcharge * b.nonconverged_fraction;
    b
}
