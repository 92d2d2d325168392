use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::levels::compute_level_edges;
use super::{DemandError, DemandSeries, DATASET_DAYS, HOURS_PER_DAY};
use crate::network::{Network, NodeKind};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Archetype {
    Residential,
    AcademicA,
    AcademicB,
    Dining,
}

impl Archetype {
    pub const ALL: [Archetype; 4] =
        [Archetype::Residential, Archetype::AcademicA, Archetype::AcademicB, Archetype::Dining];

    /// Building category as it appears in narratives and prompts.
    pub fn building_type(self) -> &'static str {
        match self {
            Archetype::Residential => "residential area",
            Archetype::AcademicA => "academic building",
            Archetype::AcademicB => "research laboratory building",
            Archetype::Dining => "dining facility",
        }
    }

    /// Default archetype for region ids 1..=4.
    pub fn for_region(region: u32) -> Option<Archetype> {
        Archetype::ALL.get((region as usize).checked_sub(1)?).copied()
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.building_type())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeProfile {
    /// Relative demand per hour of day, peak 1.
    pub diurnal: [f64; 24],
    pub weekday_mult: f64,
    pub weekend_mult: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub days: usize,
    pub profiles: BTreeMap<Archetype, ArchetypeProfile>,
    pub region_archetypes: BTreeMap<u32, Archetype>,
    /// Log-standard deviation of the multiplicative noise.
    pub noise_sigma: f64,
    /// Per-node scale factor range applied to the junction base demand.
    pub scale_range: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let mut profiles = BTreeMap::new();
        profiles.insert(
            Archetype::Residential,
            ArchetypeProfile {
                diurnal: [
                    0.10, 0.07, 0.05, 0.05, 0.07, 0.20, 0.55, 0.90, 1.00, 0.70, 0.50, 0.45, 0.50,
                    0.45, 0.40, 0.42, 0.50, 0.65, 0.85, 0.95, 0.80, 0.55, 0.30, 0.16,
                ],
                weekday_mult: 1.0,
                weekend_mult: 1.15,
            },
        );
        profiles.insert(
            Archetype::AcademicA,
            ArchetypeProfile {
                diurnal: [
                    0.03, 0.03, 0.03, 0.03, 0.03, 0.04, 0.08, 0.30, 0.75, 0.95, 1.00, 0.95, 0.90,
                    0.95, 1.00, 0.90, 0.75, 0.50, 0.30, 0.20, 0.12, 0.08, 0.05, 0.04,
                ],
                weekday_mult: 1.0,
                weekend_mult: 0.35,
            },
        );
        profiles.insert(
            Archetype::AcademicB,
            ArchetypeProfile {
                diurnal: [
                    0.05, 0.04, 0.04, 0.04, 0.04, 0.07, 0.15, 0.35, 0.65, 0.85, 0.90, 0.95, 1.00,
                    0.95, 0.90, 0.85, 0.80, 0.70, 0.55, 0.45, 0.35, 0.25, 0.15, 0.09,
                ],
                weekday_mult: 1.0,
                weekend_mult: 0.5,
            },
        );
        profiles.insert(
            Archetype::Dining,
            ArchetypeProfile {
                diurnal: [
                    0.02, 0.02, 0.02, 0.02, 0.03, 0.10, 0.45, 0.80, 0.60, 0.35, 0.55, 0.95, 1.00,
                    0.70, 0.35, 0.30, 0.50, 0.90, 1.00, 0.75, 0.40, 0.20, 0.08, 0.04,
                ],
                weekday_mult: 1.0,
                weekend_mult: 0.7,
            },
        );
        let region_archetypes = (1..=4).map(|r| (r, Archetype::for_region(r).unwrap())).collect();
        GeneratorConfig {
            days: DATASET_DAYS,
            profiles,
            region_archetypes,
            noise_sigma: 0.15,
            scale_range: (0.8, 1.2),
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), DemandError> {
        let bad = |m: &str| Err(DemandError::Config(m.to_string()));
        if self.days == 0 {
            return bad("days must be positive");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("scale_range must satisfy 0 < lo <= hi");
        }
        for p in self.profiles.values() {
            if p.diurnal.iter().any(|v| !(*v >= 0.0)) || p.weekday_mult < 0.0 || p.weekend_mult < 0.0 {
                return bad("profiles and multipliers must be non-negative");
            }
        }
        Ok(())
    }
}

/// Day index 0 is a Monday.
pub fn is_weekend(day: usize) -> bool {
    day % 7 >= 5
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandDataset {
    pub series: DemandSeries,
    pub archetype: BTreeMap<String, Archetype>,
    pub region_of: BTreeMap<String, u32>,
    pub scale: BTreeMap<String, f64>,
    /// Level thresholds per junction; `None` for all-zero rows.
    pub level_edges: BTreeMap<String, Option<[f64; 4]>>,
    pub seed: u64,
}

/// Generates `value = scale * profile(hour) * day_mult(day) * noise` for
/// every junction, with `scale = base_demand * U(scale_range)` drawn once
/// per node and mean-one lognormal noise.
pub fn generate_dataset(
    net: &Network,
    config: &GeneratorConfig,
    seed: u64,
) -> Result<DemandDataset, DemandError> {
    config.validate()?;
    let hours = config.days * HOURS_PER_DAY;
    let sigma = config.noise_sigma;

    let mut series = DemandSeries { junction_ids: Vec::new(), values: Vec::new() };
    let mut archetype = BTreeMap::new();
    let mut region_of = BTreeMap::new();
    let mut scale = BTreeMap::new();
    let mut level_edges = BTreeMap::new();

    for (row, &j) in net.junction_indices().iter().enumerate() {
        let node = &net.nodes()[j];
        let NodeKind::Junction { base_demand, .. } = node.kind else { unreachable!() };
        let region = net.region_of(&node.id).expect("validated region");
        let arch = *config
            .region_archetypes
            .get(&region)
            .ok_or(DemandError::MissingArchetype(region))?;
        let profile = config
            .profiles
            .get(&arch)
            .ok_or_else(|| DemandError::Config(format!("no profile for {arch:?}")))?;

        let mut rng = stream_rng(&[seed, row as u64]);
        let (lo, hi) = config.scale_range;
        let factor = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let s = base_demand * factor;

        let values: Vec<f64> = (0..hours)
            .map(|t| {
                let day = t / HOURS_PER_DAY;
                let mult = if is_weekend(day) { profile.weekend_mult } else { profile.weekday_mult };
                let noise = if sigma > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    (sigma * z - 0.5 * sigma * sigma).exp()
                } else {
                    1.0
                };
                s * profile.diurnal[t % HOURS_PER_DAY] * mult * noise
            })
            .collect();

        level_edges.insert(node.id.clone(), compute_level_edges(&values).ok());
        series.junction_ids.push(node.id.clone());
        series.values.push(values);
        archetype.insert(node.id.clone(), arch);
        region_of.insert(node.id.clone(), region);
        scale.insert(node.id.clone(), s);
    }

    Ok(DemandDataset { series, archetype, region_of, scale, level_edges, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{discretize, NUM_LEVELS};
    use crate::network::build_mininet;

    #[test]
    fn dimensions_and_determinism() {
        let net = build_mininet();
        let a = generate_dataset(&net, &GeneratorConfig::default(), 1).unwrap();
        let b = generate_dataset(&net, &GeneratorConfig::default(), 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series.values.len(), net.junction_indices().len());
        assert!(a.series.values.iter().all(|r| r.len() == 123 * 24));
        assert!(a.series.values.iter().flatten().all(|&v| v >= 0.0));
        let c = generate_dataset(&net, &GeneratorConfig::default(), 2).unwrap();
        assert_ne!(a.series.values, c.series.values);
    }

    #[test]
    fn noiseless_series_is_periodic() {
        let net = build_mininet();
        let mut cfg = GeneratorConfig::default();
        cfg.noise_sigma = 0.0;
        for p in cfg.profiles.values_mut() {
            p.weekend_mult = 1.0;
            p.weekday_mult = 1.0;
        }
        let ds = generate_dataset(&net, &cfg, 3).unwrap();
        for (row, id) in ds.series.junction_ids.iter().enumerate() {
            let arch = ds.archetype[id];
            let s = ds.scale[id];
            for (t, &v) in ds.series.values[row].iter().enumerate() {
                assert_eq!(v, s * cfg.profiles[&arch].diurnal[t % 24]);
                if t >= 24 {
                    assert_eq!(v, ds.series.values[row][t - 24]);
                }
            }
        }
    }

    #[test]
    fn region_shares_archetype() {
        let net = build_mininet();
        let ds = generate_dataset(&net, &GeneratorConfig::default(), 1).unwrap();
        for (id, arch) in &ds.archetype {
            assert_eq!(Some(*arch), Archetype::for_region(ds.region_of[id]));
        }
    }

    #[test]
    fn every_level_reached_per_archetype() {
        let net = build_mininet();
        let ds = generate_dataset(&net, &GeneratorConfig::default(), 1).unwrap();
        let levels = discretize(&ds);
        let mut seen: BTreeMap<Archetype, [bool; NUM_LEVELS]> = BTreeMap::new();
        for (row, id) in ds.series.junction_ids.iter().enumerate() {
            let entry = seen.entry(ds.archetype[id]).or_default();
            for &l in &levels[row] {
                entry[l as usize] = true;
            }
        }
        for (arch, hit) in seen {
            assert!(hit.iter().all(|&h| h), "{arch:?} misses a level: {hit:?}");
        }
    }

    #[test]
    fn missing_archetype_is_an_error() {
        let net = build_mininet();
        let mut cfg = GeneratorConfig::default();
        cfg.region_archetypes.remove(&2);
        assert!(matches!(generate_dataset(&net, &cfg, 1), Err(DemandError::MissingArchetype(2))));
    }
}
