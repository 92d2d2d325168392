//! Operational loss and the zeroth-order SGD loop that trains the policy
//! against simulated days.

mod loss;
mod zo;

pub use loss::{episode_loss, pressure_terms, LossBreakdown, LossConfig};
pub use zo::{sample_direction, zo_gradient, zo_gradient_along, ZoConfig, ZoError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{PolicyController, PolicyParams, RuleConfig};
use crate::demand::{DemandSeries, HOURS_PER_DAY};
use crate::forecast::{ForecastContext, OracleForecaster};
use crate::hydraulics::{simulate_episode, EpisodeConfig, EpisodeResult, SolveError};
use crate::network::Network;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Zo(#[from] ZoError),
}

/// One SGD update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub day: usize,
    /// Loss at the parameters before the update.
    pub loss: LossBreakdown,
    pub grad_norm: f64,
}

pub struct TrainSetup<'a> {
    pub net: &'a Network,
    /// Full demand series; `days` index into it.
    pub demands: &'a DemandSeries,
    pub days: &'a [usize],
    /// Must carry true levels; the training forecaster is the oracle.
    pub context: &'a ForecastContext,
    pub window: usize,
    pub episode: EpisodeConfig,
    pub rule: RuleConfig,
    pub loss: LossConfig,
}

impl TrainSetup<'_> {
    /// Simulates `day` under the policy with the oracle forecaster.
    pub fn run_day(&self, params: &PolicyParams, day: usize) -> Result<EpisodeResult, SolveError> {
        let mut controller = PolicyController::new(params.clone(), self.rule);
        let mut forecaster = OracleForecaster { window: self.window, num_regions: self.net.num_regions() };
        simulate_episode(
            self.net,
            self.demands,
            day * HOURS_PER_DAY,
            HOURS_PER_DAY,
            &mut controller,
            &mut forecaster,
            self.context,
            &self.episode,
        )
    }

    pub fn day_loss(&self, params: &PolicyParams, day: usize) -> Result<LossBreakdown, SolveError> {
        Ok(episode_loss(&self.run_day(params, day)?, self.net, &self.loss))
    }

    /// Mean total loss over `days`.
    pub fn mean_loss(&self, params: &PolicyParams, days: &[usize]) -> Result<f64, SolveError> {
        let mut sum = 0.0;
        for &d in days {
            sum += self.day_loss(params, d)?.total;
        }
        Ok(sum / days.len().max(1) as f64)
    }
}

pub struct TrainOutcome {
    pub params: PolicyParams,
    pub history: Vec<HistoryRow>,
}

/// Plain SGD with one day per update, `zo.epochs` passes over `setup.days`
/// in order. `on_epoch` runs after each epoch with the current parameters.
pub fn train(
    setup: &TrainSetup,
    policy0: PolicyParams,
    zo: &ZoConfig,
    mut on_epoch: impl FnMut(usize, &PolicyParams),
) -> Result<TrainOutcome, TrainError> {
    zo.validate().map_err(TrainError::Config)?;
    setup.loss.validate().map_err(TrainError::Config)?;
    let mut params = policy0;
    let mut theta = params.flatten();
    let mut history = Vec::with_capacity(zo.epochs * setup.days.len());
    for epoch in 0..zo.epochs {
        for &day in setup.days {
            let loss = setup.day_loss(&params, day)?;
            let loss_fn = |flat: &[f64]| setup.day_loss(&params.with_flat(flat), day).ok().map(|b| b.total);
            let grad = zo_gradient(loss_fn, &theta, zo.num_samples, zo.delta, &[zo.seed, epoch as u64, day as u64])?;
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= zo.lr * g;
            }
            params = params.with_flat(&theta);
            log::debug!("epoch {epoch} day {day}: loss {:.6} |g| {grad_norm:.4}", loss.total);
            history.push(HistoryRow { epoch, day, loss, grad_norm });
        }
        on_epoch(epoch, &params);
    }
    Ok(TrainOutcome { params, history })
}
