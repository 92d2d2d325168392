//! Lower-level controllers: a rule baseline and a small feedforward policy.
//! Both map the previous hydraulic state (plus, for the policy, a demand
//! forecast) to a bounded [`ControlAction`].

mod action;
mod observation;
mod policy;
mod rule;

pub use action::ControlAction;
pub use observation::{build_observation, Observation, ObservationError, NOMINAL_PRESSURE_PSI};
pub use policy::{
    init_policy, map_to_action_bounds, policy_forward, CheckpointError, DenseLayer, PolicyController,
    PolicyDims, PolicyParams, HIDDEN_WIDTH,
};
pub use rule::{RuleConfig, RuleController, TankPumpRule};

use std::collections::BTreeMap;

use crate::forecast::ForecastWindow;
use crate::hydraulics::HydraulicState;
use crate::network::Network;

/// Everything a controller sees when choosing the action for `hour`.
#[derive(Debug, Clone, Copy)]
pub struct DecisionInput<'a> {
    pub net: &'a Network,
    /// Snapshot of the previous step.
    pub state: &'a HydraulicState,
    /// Tank levels at the start of this step, by node index.
    pub tank_levels: &'a BTreeMap<usize, f64>,
    pub hour: usize,
    pub window: &'a ForecastWindow,
}

pub trait Controller {
    fn decide(&mut self, input: &DecisionInput) -> ControlAction;
}
