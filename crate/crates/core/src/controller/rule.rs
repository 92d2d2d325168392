use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ControlAction, Controller, DecisionInput};
use crate::network::{LinkKind, Network, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    /// Tank pumps switch on below this level fraction...
    pub tank_on_below: f64,
    /// ...and off above this one.
    pub tank_off_above: f64,
    /// Source pumps boost when delivered < satisfaction x requested.
    pub satisfaction: f64,
    pub boost_speed: f64,
    pub idle_speed: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig { tank_on_below: 0.4, tank_off_above: 0.9, satisfaction: 0.98, boost_speed: 1.0, idle_speed: 0.3 }
    }
}

/// Level fraction of the tank a pump feeds, if it touches one.
fn tank_fraction(net: &Network, link: usize, levels: &BTreeMap<usize, f64>) -> Option<f64> {
    let (a, b) = net.endpoints(link);
    [b, a].into_iter().find_map(|i| match net.nodes()[i].kind {
        NodeKind::Tank { min_level, max_level, init_level, .. } => {
            let level = levels.get(&i).copied().unwrap_or(init_level);
            Some((level - min_level) / (max_level - min_level))
        }
        _ => None,
    })
}

/// Hysteresis switching of tank pumps. Used by both controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct TankPumpRule {
    pub config: RuleConfig,
    on: BTreeMap<String, bool>,
}

impl TankPumpRule {
    pub fn new(config: RuleConfig) -> Self {
        TankPumpRule { config, on: BTreeMap::new() }
    }

    pub fn decide(&mut self, net: &Network, levels: &BTreeMap<usize, f64>) -> BTreeMap<String, bool> {
        let mut out = BTreeMap::new();
        for k in net.tank_pumps() {
            let id = &net.links()[k].id;
            let previous = self.on.get(id).copied().unwrap_or(true);
            let on = match tank_fraction(net, k, levels) {
                Some(f) if f < self.config.tank_on_below => true,
                Some(f) if f > self.config.tank_off_above => false,
                _ => previous,
            };
            self.on.insert(id.clone(), on);
            out.insert(id.clone(), on);
        }
        out
    }
}

/// Baseline: boost source pumps when the last step fell short of demand,
/// hold valves at their initial setting.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleController {
    tanks: TankPumpRule,
}

impl RuleController {
    pub fn new(config: RuleConfig) -> Self {
        RuleController { tanks: TankPumpRule::new(config) }
    }

    pub fn config(&self) -> &RuleConfig {
        &self.tanks.config
    }
}

impl Default for RuleController {
    fn default() -> Self {
        Self::new(RuleConfig::default())
    }
}

impl Controller for RuleController {
    fn decide(&mut self, input: &DecisionInput) -> ControlAction {
        let net = input.net;
        let cfg = self.tanks.config;
        let short = input.state.total_delivered() < cfg.satisfaction * input.state.total_requested();
        let mut action = ControlAction::default();
        for k in net.controllable_pumps() {
            let link = &net.links()[k];
            let (lo, hi) = link.control_bounds().expect("pump");
            let speed = if short { cfg.boost_speed } else { cfg.idle_speed };
            action.pump_speed.insert(link.id.clone(), speed.clamp(lo, hi));
        }
        for k in net.valves() {
            if let LinkKind::PbvValve { init_setting, .. } = net.links()[k].kind {
                action.valve_setting.insert(net.links()[k].id.clone(), init_setting);
            }
        }
        action.delegated = self.tanks.decide(net, input.tank_levels);
        action
    }
}
