//! Five demand levels on a log scale: thresholds at d_max/16, d_max/8,
//! d_max/4 and d_max/2 of each series' own maximum.

use serde::{Deserialize, Serialize};

use super::{DemandError, DemandDataset, DemandSeries};
use crate::network::Network;

pub const NUM_LEVELS: usize = 5;

pub fn compute_level_edges(series: &[f64]) -> Result<[f64; 4], DemandError> {
    let d_max = series.iter().copied().fold(0.0, f64::max);
    if !(d_max > 0.0) {
        return Err(DemandError::NoPositiveDemand);
    }
    Ok([d_max / 16.0, d_max / 8.0, d_max / 4.0, d_max / 2.0])
}

pub fn level_of(d: f64, edges: &[f64; 4]) -> u8 {
    edges.iter().take_while(|&&e| d >= e).count() as u8
}

/// Levels of one series against its own edges; all-zero series map to 0.
pub fn discretize_series(series: &[f64]) -> Vec<u8> {
    match compute_level_edges(series) {
        Ok(edges) => series.iter().map(|&d| level_of(d, &edges)).collect(),
        Err(_) => vec![0; series.len()],
    }
}

/// Level matrix (junction × hour) using the dataset's per-node edges.
pub fn discretize(dataset: &DemandDataset) -> Vec<Vec<u8>> {
    dataset
        .series
        .junction_ids
        .iter()
        .zip(&dataset.series.values)
        .map(|(id, row)| match dataset.level_edges.get(id).copied().flatten() {
            Some(edges) => row.iter().map(|&d| level_of(d, &edges)).collect(),
            None => vec![0; row.len()],
        })
        .collect()
}

/// True demand level of each region's aggregate demand, per global hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLevels {
    /// `levels[r - 1][hour]` for region `r`.
    pub levels: Vec<Vec<u8>>,
}

impl RegionLevels {
    pub fn num_regions(&self) -> usize {
        self.levels.len()
    }

    pub fn hours(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    /// Level of `region` at `hour`, clamped to the covered range.
    pub fn level(&self, region: u32, hour: i64) -> u8 {
        let row = &self.levels[region as usize - 1];
        let h = hour.clamp(0, row.len() as i64 - 1) as usize;
        row[h]
    }
}

/// Discretizes the summed demand of each region against edges anchored at
/// that aggregate's maximum.
pub fn region_levels(series: &DemandSeries, net: &Network) -> RegionLevels {
    let hours = series.hours();
    let mut sums = vec![vec![0.0; hours]; net.num_regions()];
    for (id, row) in series.junction_ids.iter().zip(&series.values) {
        if let Some(r) = net.region_of(id) {
            for (acc, v) in sums[r as usize - 1].iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    RegionLevels { levels: sums.iter().map(|s| discretize_series(s)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_rule() {
        let series = [0.0, 1.0, 0.3, 0.05];
        let edges = compute_level_edges(&series).unwrap();
        assert_eq!(edges, [1.0 / 16.0, 1.0 / 8.0, 0.25, 0.5]);
        for w in edges.windows(2) {
            assert_eq!(w[1] / w[0], 2.0);
        }
        assert_eq!(level_of(0.0, &edges), 0);
        assert_eq!(level_of(1.0, &edges), 4);
        assert_eq!(level_of(0.3, &edges), 3);
        assert_eq!(level_of(0.0625, &edges), 1);
        assert_eq!(level_of(0.0624, &edges), 0);
    }

    #[test]
    fn all_zero_series_rejected() {
        assert!(matches!(compute_level_edges(&[0.0; 5]), Err(DemandError::NoPositiveDemand)));
        assert_eq!(discretize_series(&[0.0; 3]), vec![0, 0, 0]);
    }

    #[test]
    fn constant_series_is_top_level() {
        assert_eq!(discretize_series(&[2.5; 24]), vec![4; 24]);
    }

    #[test]
    fn ramp_gives_nondecreasing_levels() {
        let ramp: Vec<f64> = (0..24).map(|h| h as f64 / 23.0).collect();
        let levels = discretize_series(&ramp);
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(levels[0], 0);
        assert_eq!(levels[23], 4);
    }
}
