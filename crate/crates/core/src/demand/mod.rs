//! Synthetic hourly demand data, log-scale demand levels, chronological
//! splitting and event narratives for the forecasting layer.

mod events;
mod generator;
mod io;
mod levels;

pub use events::{build_event_library, render_event_text, time_of_day_phrase, weekday_name, EventRecord};
pub use generator::{generate_dataset, Archetype, ArchetypeProfile, DemandDataset, GeneratorConfig};
pub use io::{read_demand_csv, read_events_jsonl, write_demand_csv, write_events_jsonl};
pub use levels::{
    compute_level_edges, discretize, discretize_series, level_of, region_levels, RegionLevels,
    NUM_LEVELS,
};

use std::ops::Range;

use thiserror::Error;

use crate::network::Network;

pub const HOURS_PER_DAY: usize = 24;
pub const DATASET_DAYS: usize = 123;
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("region {0} has no archetype mapping")]
    MissingArchetype(u32),
    #[error("series has no positive value")]
    NoPositiveDemand,
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("demand file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Demand per junction (rows) and global hour (columns), m³/s.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    pub junction_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DemandSeries {
    pub fn hours(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn days(&self) -> usize {
        self.hours() / HOURS_PER_DAY
    }

    pub fn row(&self, junction_id: &str) -> Option<&[f64]> {
        self.junction_ids.iter().position(|j| j == junction_id).map(|i| self.values[i].as_slice())
    }

    /// Node index of every row; every junction of `net` must be covered.
    pub fn node_mapping(&self, net: &Network) -> Result<Vec<usize>, String> {
        let mut mapping = Vec::with_capacity(self.junction_ids.len());
        for id in &self.junction_ids {
            match net.node_idx(id) {
                Some(i) if net.nodes()[i].is_junction() => mapping.push(i),
                _ => return Err(format!("demand series row '{id}' is not a junction of the network")),
            }
        }
        for &j in net.junction_indices() {
            if !mapping.contains(&j) {
                return Err(format!("demand series does not cover junction '{}'", net.nodes()[j].id));
            }
        }
        Ok(mapping)
    }

    /// Demand per node index at `hour`; non-junction entries are zero.
    pub fn node_vector(&self, mapping: &[usize], num_nodes: usize, hour: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_nodes];
        for (row, &node) in mapping.iter().enumerate() {
            out[node] = self.values[row][hour];
        }
        out
    }

    /// Columns for the given day range.
    pub fn slice_days(&self, days: Range<usize>) -> DemandSeries {
        let cols = days.start * HOURS_PER_DAY..days.end * HOURS_PER_DAY;
        DemandSeries {
            junction_ids: self.junction_ids.clone(),
            values: self.values.iter().map(|r| r[cols.clone()].to_vec()).collect(),
        }
    }
}

/// Chronological split into (train days, test days); the first
/// `floor(0.7 * days)` days train.
pub fn split_days(days: usize) -> (Range<usize>, Range<usize>) {
    let train = (TRAIN_FRACTION * days as f64).floor() as usize;
    (0..train, train..days)
}

/// Splits a dataset's days; see [`split_days`].
pub fn split_dataset(dataset: &DemandDataset) -> (Range<usize>, Range<usize>) {
    split_days(dataset.series.days())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts() {
        let (train, test) = split_days(123);
        assert_eq!(train.len(), 86);
        assert_eq!(test.len(), 37);
        assert_eq!(train.end - 1, 85);
        assert_eq!(test.start, 86);
        assert_eq!(train.end, test.start);
        assert_eq!(test.end, 123);
    }
}
