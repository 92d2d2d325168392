use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::observation::build_observation;
use super::rule::{RuleConfig, TankPumpRule};
use super::{ControlAction, Controller, DecisionInput};
use crate::network::Network;
use crate::rng::stream_rng;

pub const HIDDEN_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl PolicyDims {
    /// Input: interest-node pressures, time embedding, W levels per region.
    /// Output: one value per source pump and per valve.
    pub fn for_network(net: &Network, window: usize) -> Self {
        PolicyDims {
            input: net.interest_nodes().len() + 2 + window * net.num_regions(),
            hidden: HIDDEN_WIDTH,
            output: net.controllable_pumps().len() + net.valves().len(),
        }
    }

    fn shapes(&self) -> [(usize, usize); 3] {
        [(self.hidden, self.input), (self.hidden, self.hidden), (self.output, self.hidden)]
    }

    pub fn num_params(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub dims: PolicyDims,
    pub layers: Vec<DenseLayer>,
    pub rng_seed: u64,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("checkpoint layers do not match its dims header")]
    Inconsistent,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    dims: PolicyDims,
    rng_seed: u64,
    layers: Vec<DenseLayer>,
    #[serde(default)]
    config: serde_json::Value,
}

impl PolicyParams {
    pub fn zeros(dims: PolicyDims) -> Self {
        let layers = dims
            .shapes()
            .iter()
            .map(|&(rows, cols)| DenseLayer { rows, cols, weights: vec![0.0; rows * cols], bias: vec![0.0; rows] })
            .collect();
        PolicyParams { dims, layers, rng_seed: 0 }
    }

    /// W1, b1, W2, b2, W3, b3 concatenated.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dims.num_params());
        for layer in &self.layers {
            v.extend_from_slice(&layer.weights);
            v.extend_from_slice(&layer.bias);
        }
        v
    }

    pub fn unflatten(dims: PolicyDims, flat: &[f64]) -> Option<Self> {
        if flat.len() != dims.num_params() {
            return None;
        }
        let mut params = Self::zeros(dims);
        let mut at = 0;
        for layer in &mut params.layers {
            let n = layer.weights.len();
            layer.weights.copy_from_slice(&flat[at..at + n]);
            at += n;
            layer.bias.copy_from_slice(&flat[at..at + layer.rows]);
            at += layer.rows;
        }
        Some(params)
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let mut p = Self::unflatten(self.dims, flat).expect("flat vector matches dims");
        p.rng_seed = self.rng_seed;
        p
    }

    fn consistent(&self) -> bool {
        self.layers.len() == 3
            && self.layers.iter().zip(self.dims.shapes()).all(|(l, (r, c))| {
                l.rows == r && l.cols == c && l.weights.len() == r * c && l.bias.len() == r
            })
    }

    pub fn to_json(&self, config: serde_json::Value) -> String {
        let ck = Checkpoint { dims: self.dims, rng_seed: self.rng_seed, layers: self.layers.clone(), config };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    /// Returns the params and the free-form config block stored alongside.
    pub fn from_json(s: &str) -> Result<(Self, serde_json::Value), CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        let params = PolicyParams { dims: ck.dims, layers: ck.layers, rng_seed: ck.rng_seed };
        if !params.consistent() {
            return Err(CheckpointError::Inconsistent);
        }
        Ok((params, ck.config))
    }

    pub fn save(&self, path: &Path, config: serde_json::Value) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json(config))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value), CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Xavier-uniform weights, zero biases.
pub fn init_policy(dims: PolicyDims, seed: u64) -> PolicyParams {
    let mut rng = stream_rng(&[seed, 0x0070_6f6c]);
    let mut params = PolicyParams::zeros(dims);
    params.rng_seed = seed;
    for layer in &mut params.layers {
        let bound = (6.0 / (layer.rows + layer.cols) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..bound);
        }
    }
    params
}

/// Unbounded outputs; `None` on a length mismatch.
pub fn policy_forward(params: &PolicyParams, obs: &[f64]) -> Option<Vec<f64>> {
    if obs.len() != params.dims.input {
        return None;
    }
    let h1: Vec<f64> = params.layers[0].apply(obs).into_iter().map(f64::tanh).collect();
    let h2: Vec<f64> = params.layers[1].apply(&h1).into_iter().map(f64::tanh).collect();
    Some(params.layers[2].apply(&h2))
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Squashes raw outputs into component bounds, pumps (by id) then valves (by id).
/// Delegated tank pumps are left empty.
pub fn map_to_action_bounds(raw: &[f64], net: &Network) -> ControlAction {
    let pumps = net.controllable_pumps();
    let valves = net.valves();
    assert_eq!(raw.len(), pumps.len() + valves.len(), "raw output length");
    let mut action = ControlAction::default();
    for (i, &k) in pumps.iter().chain(&valves).enumerate() {
        let link = &net.links()[k];
        let (lo, hi) = link.control_bounds().expect("pump or valve");
        let value = lo + logistic(raw[i]) * (hi - lo);
        if link.is_pump() {
            action.pump_speed.insert(link.id.clone(), value);
        } else {
            action.valve_setting.insert(link.id.clone(), value);
        }
    }
    action
}

/// Neural policy for source pumps and valves; tank pumps follow the rule.
#[derive(Debug, Clone)]
pub struct PolicyController {
    pub params: PolicyParams,
    tanks: TankPumpRule,
}

impl PolicyController {
    pub fn new(params: PolicyParams, rule: RuleConfig) -> Self {
        PolicyController { params, tanks: TankPumpRule::new(rule) }
    }
}

impl Controller for PolicyController {
    fn decide(&mut self, input: &DecisionInput) -> ControlAction {
        let obs = build_observation(input.state, input.hour, input.window, input.net)
            .expect("observation matches the network");
        let raw = policy_forward(&self.params, &obs.to_vec()).expect("policy input width matches observation");
        let mut action = map_to_action_bounds(&raw, input.net);
        action.delegated = self.tanks.decide(input.net, input.tank_levels);
        action
    }
}
