use std::f64::consts::PI;

use thiserror::Error;

use crate::forecast::ForecastWindow;
use crate::hydraulics::HydraulicState;
use crate::network::Network;

/// Target pressure used to normalize the pressure block.
pub const NOMINAL_PRESSURE_PSI: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObservationError {
    #[error("no pressure for interest node '{0}'")]
    MissingPressure(String),
    #[error("forecast for region {region} has {got} levels, expected {expected}")]
    BadForecast { region: u32, expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pressures_norm: Vec<f64>,
    pub time_emb: [f64; 2],
    /// Levels / 4, region-major.
    pub forecast_norm: Vec<f64>,
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.pressures_norm);
        v.extend_from_slice(&self.time_emb);
        v.extend_from_slice(&self.forecast_norm);
        v
    }

    pub fn len(&self) -> usize {
        self.pressures_norm.len() + 2 + self.forecast_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn build_observation(
    state: &HydraulicState,
    hour: usize,
    window: &ForecastWindow,
    net: &Network,
) -> Result<Observation, ObservationError> {
    let pressures_norm = net
        .interest_nodes()
        .iter()
        .map(|id| {
            net.node_idx(id)
                .and_then(|i| state.pressures.get(i))
                .map(|p| p / NOMINAL_PRESSURE_PSI)
                .ok_or_else(|| ObservationError::MissingPressure(id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let phase = 2.0 * PI * (hour % 24) as f64 / 24.0;
    let mut forecast_norm = Vec::with_capacity(window.window * net.num_regions());
    for region in 1..=net.num_regions() as u32 {
        let seq = window.levels.get(&region).map(Vec::as_slice).unwrap_or(&[]);
        if seq.len() != window.window {
            return Err(ObservationError::BadForecast { region, expected: window.window, got: seq.len() });
        }
        forecast_norm.extend(seq.iter().map(|&l| f64::from(l) / 4.0));
    }
    Ok(Observation { pressures_norm, time_emb: [phase.sin(), phase.cos()], forecast_norm })
}
