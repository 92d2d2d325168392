use serde::{Deserialize, Serialize};

use crate::network::Network;

/// Output of one hydraulic snapshot. Vectors are indexed by node or link
/// declaration order of the network that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState {
    /// Hydraulic head per node, m.
    pub heads: Vec<f64>,
    /// Pressure per node, psi. Junctions: head above elevation; tanks:
    /// water level; reservoirs: 0.
    pub pressures: Vec<f64>,
    /// Signed flow per link, m³/s, positive from -> to.
    pub flows: Vec<f64>,
    /// Requested demand per node, m³/s.
    pub requested: Vec<f64>,
    /// Delivered demand per node, m³/s.
    pub delivered: Vec<f64>,
    /// Electrical power per link (zero for non-pumps), kW.
    pub pump_power: Vec<f64>,
    /// Head gain per link (zero for non-pumps), m.
    pub pump_gain: Vec<f64>,
    pub link_open: Vec<bool>,
    /// Nodes cut off from every fixed head by closed links.
    pub isolated: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest junction mass-balance residual, m³/s.
    pub max_residual: f64,
}

impl HydraulicState {
    pub fn pressure(&self, net: &Network, node_id: &str) -> Option<f64> {
        net.node_idx(node_id).map(|i| self.pressures[i])
    }

    pub fn flow(&self, net: &Network, link_id: &str) -> Option<f64> {
        net.link_idx(link_id).map(|k| self.flows[k])
    }

    pub fn total_power_kw(&self) -> f64 {
        self.pump_power.iter().sum()
    }

    pub fn total_requested(&self) -> f64 {
        self.requested.iter().sum()
    }

    pub fn total_delivered(&self) -> f64 {
        self.delivered.iter().sum()
    }

    /// Net inflow to each node from its links (m³/s).
    pub fn net_inflow(&self, net: &Network) -> Vec<f64> {
        let mut inflow = vec![0.0; net.nodes().len()];
        for (k, q) in self.flows.iter().enumerate() {
            let (a, b) = net.endpoints(k);
            inflow[a] -= q;
            inflow[b] += q;
        }
        inflow
    }

    /// |inflow - outflow - delivered| per junction, recomputed from flows.
    pub fn junction_residuals(&self, net: &Network) -> Vec<(usize, f64)> {
        let inflow = self.net_inflow(net);
        net.junction_indices()
            .iter()
            .map(|&j| (j, (inflow[j] - self.delivered[j]).abs()))
            .collect()
    }
}
