use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::state::HydraulicState;
use crate::network::{Network, NodeKind};

pub const DEFAULT_STEP_SECONDS: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TankEvent {
    Full,
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TankStep {
    /// New level per tank node index, m.
    pub levels: BTreeMap<usize, f64>,
    /// Tanks clamped at a bound during this step.
    pub events: BTreeMap<usize, TankEvent>,
}

/// Integrates cylindrical tank levels over `dt` seconds using the net
/// inflow of the solved snapshot, clamping at the level bounds.
pub fn step_tanks(
    net: &Network,
    state: &HydraulicState,
    levels: &BTreeMap<usize, f64>,
    dt: f64,
) -> TankStep {
    assert!(dt > 0.0, "time step must be positive");
    let inflow = state.net_inflow(net);
    let mut out = TankStep { levels: BTreeMap::new(), events: BTreeMap::new() };
    for (&i, &level) in levels {
        let NodeKind::Tank { min_level, max_level, diameter, .. } = net.nodes()[i].kind else {
            continue;
        };
        let area = PI * (diameter / 2.0).powi(2);
        let raw = level + inflow[i] * dt / area;
        let next = if raw >= max_level {
            out.events.insert(i, TankEvent::Full);
            max_level
        } else if raw <= min_level {
            out.events.insert(i, TankEvent::Empty);
            min_level
        } else {
            raw
        };
        out.levels.insert(i, next);
    }
    out
}
