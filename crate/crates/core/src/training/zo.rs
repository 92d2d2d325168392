use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoConfig {
    pub num_samples: usize,
    /// Perturbation scale applied to standard-normal directions.
    pub delta: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl ZoConfig {
    /// Default step size per forecast window.
    pub fn default_lr(window: usize) -> f64 {
        match window {
            0 => 2e-5,
            2 => 5e-5,
            4 => 2e-4,
            _ => 5e-4,
        }
    }

    pub fn for_window(window: usize, seed: u64) -> Self {
        ZoConfig { num_samples: 10, delta: 0.05, epochs: 10, lr: Self::default_lr(window), seed }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.num_samples == 0 {
            return Err("num_samples must be at least 1".into());
        }
        if !(self.delta > 0.0) {
            return Err("delta must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err("lr must be a non-negative finite number".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZoError {
    #[error("every perturbed loss evaluation failed")]
    AllSamplesFailed,
}

/// Standard-normal direction for one sample, drawn from its own stream.
pub fn sample_direction(dim: usize, stream: &[u64], sample: usize) -> Vec<f64> {
    let mut key = stream.to_vec();
    key.push(sample as u64);
    let mut rng = stream_rng(&key);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Central-difference estimate averaged over `num_samples` directions.
/// Samples whose loss evaluation fails are dropped.
pub fn zo_gradient<F>(loss: F, theta: &[f64], num_samples: usize, delta: f64, stream: &[u64]) -> Result<Vec<f64>, ZoError>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let directions: Vec<Vec<f64>> = (0..num_samples).map(|s| sample_direction(theta.len(), stream, s)).collect();
    zo_gradient_along(loss, theta, delta, &directions)
}

/// The same estimate along given directions.
pub fn zo_gradient_along<F>(loss: F, theta: &[f64], delta: f64, directions: &[Vec<f64>]) -> Result<Vec<f64>, ZoError>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    // Evaluated in parallel, summed in sample order so results do not
    // depend on scheduling.
    let scales: Vec<Option<f64>> = directions
        .par_iter()
        .enumerate()
        .map(|(s, u)| {
            let plus: Vec<f64> = theta.iter().zip(u).map(|(t, ui)| t + delta * ui).collect();
            let minus: Vec<f64> = theta.iter().zip(u).map(|(t, ui)| t - delta * ui).collect();
            match (loss(&plus), loss(&minus)) {
                (Some(lp), Some(lm)) if lp.is_finite() && lm.is_finite() => Some((lp - lm) / (2.0 * delta)),
                _ => {
                    log::warn!("zeroth-order sample {s} dropped: loss evaluation failed");
                    None
                }
            }
        })
        .collect();
    let mut grad = vec![0.0; theta.len()];
    let mut used = 0usize;
    for (scale, u) in scales.iter().zip(directions) {
        if let Some(scale) = scale {
            for (g, ui) in grad.iter_mut().zip(u) {
                *g += scale * ui;
            }
            used += 1;
        }
    }
    if used == 0 {
        return Err(ZoError::AllSamplesFailed);
    }
    grad.iter_mut().for_each(|g| *g /= used as f64);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(theta: &[f64]) -> Option<f64> {
        Some(theta.iter().map(|t| t * t).sum())
    }

    #[test]
    fn forced_axis_direction_is_exact() {
        let g = zo_gradient_along(|t: &[f64]| Some(t[0] * t[0]), &[1.0, 0.0], 0.05, &[vec![1.0, 0.0]]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn constant_loss_gives_zero() {
        let g = zo_gradient(|_: &[f64]| Some(3.0), &[0.5; 8], 10, 0.05, &[1]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn antisymmetric_and_deterministic() {
        let theta = [0.3, -1.2, 2.0];
        let a = zo_gradient(sq, &theta, 10, 0.05, &[4, 2]).unwrap();
        let b = zo_gradient(|t: &[f64]| sq(t).map(|v| -v), &theta, 10, 0.05, &[4, 2]).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| *x == -*y));
        assert_eq!(a, zo_gradient(sq, &theta, 10, 0.05, &[4, 2]).unwrap());
    }

    #[test]
    fn failed_samples_are_dropped() {
        let theta = [1.0, 1.0];
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = zo_gradient_along(|t: &[f64]| if t[1] > 1.01 { None } else { sq(t) }, &theta, 0.05, &dirs).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12 && g[1] == 0.0);
        assert_eq!(zo_gradient_along(|_: &[f64]| None, &theta, 0.05, &dirs), Err(ZoError::AllSamplesFailed));
    }

    #[test]
    fn linear_loss_mean_estimate() {
        // E[(c.u) u] = c for u ~ N(0, I).
        let c = [1.0, -2.0, 0.5];
        let lin = |t: &[f64]| Some(t.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>());
        let g = zo_gradient(lin, &[0.0; 3], 10_000, 0.05, &[99]).unwrap();
        for (gi, ci) in g.iter().zip(&c) {
            assert!((gi - ci).abs() < 0.05 * 2.3, "{gi} vs {ci}");
        }
    }
}
