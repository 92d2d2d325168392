use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::{LinkKind, Network};

/// Settings for every controllable component for one hydraulic step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlAction {
    /// Relative speed of each policy-controlled pump.
    pub pump_speed: BTreeMap<String, f64>,
    /// Pressure drop (psi) of each PBV.
    pub valve_setting: BTreeMap<String, f64>,
    /// On/off state of tank pumps, which run at their initial speed when on.
    pub delegated: BTreeMap<String, bool>,
}

impl ControlAction {
    /// Initial speeds and settings from the network file, tank pumps on.
    pub fn initial(net: &Network) -> Self {
        let mut action = ControlAction::default();
        for k in net.controllable_pumps() {
            if let LinkKind::Pump { init_speed, .. } = net.links()[k].kind {
                action.pump_speed.insert(net.links()[k].id.clone(), init_speed);
            }
        }
        for k in net.valves() {
            if let LinkKind::PbvValve { init_setting, .. } = net.links()[k].kind {
                action.valve_setting.insert(net.links()[k].id.clone(), init_setting);
            }
        }
        for k in net.tank_pumps() {
            action.delegated.insert(net.links()[k].id.clone(), true);
        }
        action
    }

    /// Checks coverage of exactly the controllable components and bounds.
    pub fn check(&self, net: &Network) -> Result<(), String> {
        let pumps = net.controllable_pumps();
        let valves = net.valves();
        let tank_pumps = net.tank_pumps();
        if self.pump_speed.len() != pumps.len()
            || self.valve_setting.len() != valves.len()
            || self.delegated.len() != tank_pumps.len()
        {
            return Err("action does not cover exactly the controllable components".into());
        }
        for k in pumps.into_iter().chain(valves) {
            let link = &net.links()[k];
            let (lo, hi) = link.control_bounds().expect("pump or valve");
            let v = if link.is_pump() {
                self.pump_speed.get(&link.id)
            } else {
                self.valve_setting.get(&link.id)
            };
            match v {
                None => return Err(format!("action missing component '{}'", link.id)),
                Some(&v) if !(lo..=hi).contains(&v) => {
                    return Err(format!("'{}' value {v} outside [{lo}, {hi}]", link.id))
                }
                _ => {}
            }
        }
        for k in tank_pumps {
            if !self.delegated.contains_key(&net.links()[k].id) {
                return Err(format!("action missing tank pump '{}'", net.links()[k].id));
            }
        }
        Ok(())
    }
}
