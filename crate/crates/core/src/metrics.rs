//! Evaluation metrics over interest-node hours.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hydraulics::EpisodeResult;
use crate::network::Network;
use crate::training::LossConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MetricsScope {
    #[default]
    InterestNodes,
    AllJunctions,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub p_mse: f64,
    pub max_viol_rate: f64,
    pub min_viol_rate: f64,
    pub hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub p_mse: f64,
    pub max_viol_rate: f64,
    pub min_viol_rate: f64,
    pub energy_kwh_per_hour: f64,
    pub hours: usize,
    pub nonconverged_steps: usize,
    pub per_node: BTreeMap<String, NodeMetrics>,
}

/// Pools every episode. Violations use strict inequalities, so a pressure
/// exactly at a limit does not count. Returns `None` for no steps.
pub fn compute_metrics(
    results: &[EpisodeResult],
    net: &Network,
    cfg: &LossConfig,
    scope: MetricsScope,
) -> Option<Metrics> {
    let nodes: Vec<usize> = match scope {
        MetricsScope::InterestNodes => net.interest_nodes().iter().filter_map(|id| net.node_idx(id)).collect(),
        MetricsScope::AllJunctions => net.junction_indices().to_vec(),
    };
    let mut sums = vec![(0.0, 0usize, 0usize); nodes.len()];
    let (mut hours, mut energy, mut nonconverged) = (0usize, 0.0, 0usize);
    for result in results {
        for step in &result.steps {
            hours += 1;
            energy += step.energy_kwh;
            nonconverged += usize::from(!step.state.converged);
            for (slot, &i) in sums.iter_mut().zip(&nodes) {
                let h = step.state.pressures[i];
                slot.0 += ((h - cfg.h_star) / cfg.h_star).powi(2);
                slot.1 += usize::from(h > cfg.h_max);
                slot.2 += usize::from(h < cfg.h_min);
            }
        }
    }
    if hours == 0 {
        return None;
    }
    let n = (hours * nodes.len()).max(1) as f64;
    let mut per_node = BTreeMap::new();
    let (mut dev, mut over, mut under) = (0.0, 0usize, 0usize);
    for (&(d, o, u), &i) in sums.iter().zip(&nodes) {
        dev += d;
        over += o;
        under += u;
        per_node.insert(
            net.nodes()[i].id.clone(),
            NodeMetrics {
                p_mse: d / hours as f64,
                max_viol_rate: o as f64 / hours as f64,
                min_viol_rate: u as f64 / hours as f64,
                hours,
            },
        );
    }
    Some(Metrics {
        p_mse: dev / n,
        max_viol_rate: over as f64 / n,
        min_viol_rate: under as f64 / n,
        energy_kwh_per_hour: energy / hours as f64,
        hours,
        nonconverged_steps: nonconverged,
        per_node,
    })
}
