//! Hour-by-hour roll-out of one operating episode.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pda::PdaParams;
use super::solver::{solve_snapshot, solve_snapshot_pumps_off, SolveError};
use super::state::HydraulicState;
use super::tanks::{step_tanks, DEFAULT_STEP_SECONDS};
use crate::controller::{ControlAction, Controller, DecisionInput};
use crate::demand::DemandSeries;
use crate::forecast::{ForecastContext, ForecastWindow, Forecaster};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub pda: PdaParams,
    /// Hydraulic step, s.
    pub step_seconds: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { pda: PdaParams::default(), step_seconds: DEFAULT_STEP_SECONDS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    /// Global hour index of this step.
    pub hour: usize,
    /// Tank levels at the start of the step, by node index.
    pub tank_levels: BTreeMap<usize, f64>,
    pub forecast: ForecastWindow,
    pub action: ControlAction,
    pub state: HydraulicState,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub start_hour: usize,
    pub steps: Vec<EpisodeStep>,
}

impl EpisodeResult {
    pub fn hours(&self) -> usize {
        self.steps.len()
    }

    pub fn total_energy_kwh(&self) -> f64 {
        self.steps.iter().map(|s| s.energy_kwh).sum()
    }

    pub fn non_converged_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.state.converged).count()
    }
}

/// Runs `hours` steps starting at global hour `start_hour`.
///
/// Step `t` observes the state of step `t-1` (for the first step, a
/// snapshot with every pump off) and a forecast issued at hour
/// `start_hour + t - 1`, i.e. covering the hours from the current one on.
#[allow(clippy::too_many_arguments)]
pub fn simulate_episode(
    net: &Network,
    demands: &DemandSeries,
    start_hour: usize,
    hours: usize,
    controller: &mut dyn Controller,
    forecaster: &mut dyn Forecaster,
    context: &ForecastContext,
    config: &EpisodeConfig,
) -> Result<EpisodeResult, SolveError> {
    let mapping = demands
        .node_mapping(net)
        .map_err(SolveError::InvalidInput)?;
    if start_hour + hours > demands.hours() {
        return Err(SolveError::InvalidInput(format!(
            "demand series has {} hours, episode needs {}",
            demands.hours(),
            start_hour + hours
        )));
    }
    let mut levels = net.initial_tank_levels();
    let first = demands.node_vector(&mapping, net.nodes().len(), start_hour);
    let mut previous =
        solve_snapshot_pumps_off(net, &first, &ControlAction::initial(net), &levels, &config.pda)?;

    let mut steps = Vec::with_capacity(hours);
    for t in 0..hours {
        let hour = start_hour + t;
        let window = forecaster.forecast(hour as i64 - 1, context);
        let action = controller.decide(&DecisionInput {
            net,
            state: &previous,
            tank_levels: &levels,
            hour,
            window: &window,
        });
        let demand = demands.node_vector(&mapping, net.nodes().len(), hour);
        let state = solve_snapshot(net, &demand, &action, &levels, &config.pda)?;
        if !state.converged {
            log::debug!("snapshot at hour {hour} did not converge (residual {:.3e})", state.max_residual);
        }
        let energy_kwh = state.total_power_kw() * config.step_seconds / 3600.0;
        let next = step_tanks(net, &state, &levels, config.step_seconds);
        steps.push(EpisodeStep {
            hour,
            tank_levels: std::mem::replace(&mut levels, next.levels),
            forecast: window,
            action,
            state: state.clone(),
            energy_kwh,
        });
        previous = state;
    }
    Ok(EpisodeResult { start_hour, steps })
}
