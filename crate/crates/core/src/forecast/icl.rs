use rand::seq::SliceRandom;
use thiserror::Error;

use crate::demand::{Archetype, EventRecord, NUM_LEVELS};
use crate::rng::stream_rng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IclError {
    #[error("need at least {NUM_LEVELS} examples, asked for {0}")]
    TooFew(usize),
    #[error("library has no {building:?} example at level {level}")]
    MissingLevel { building: Archetype, level: u8 },
}

/// Picks `k` in-context examples of one building type covering every level.
///
/// Examples of each level are shuffled, then taken round-robin over levels;
/// within each round the level order is shuffled too, and never ascending.
pub fn select_icl_examples(
    library: &[EventRecord],
    building: Archetype,
    k: usize,
    seed: u64,
) -> Result<Vec<EventRecord>, IclError> {
    if k < NUM_LEVELS {
        return Err(IclError::TooFew(k));
    }
    let mut rng = stream_rng(&[seed, building as u64, k as u64]);
    let mut pools: Vec<Vec<&EventRecord>> = (0..NUM_LEVELS as u8)
        .map(|level| {
            library.iter().filter(|e| e.building_type == building && e.level == level).collect()
        })
        .collect();
    for (level, pool) in pools.iter_mut().enumerate() {
        if pool.is_empty() {
            return Err(IclError::MissingLevel { building, level: level as u8 });
        }
        pool.shuffle(&mut rng);
    }

    let mut out = Vec::with_capacity(k);
    let mut round = 0;
    while out.len() < k {
        let mut order: Vec<usize> = (0..NUM_LEVELS).collect();
        loop {
            order.shuffle(&mut rng);
            if order.windows(2).any(|w| w[0] > w[1]) {
                break;
            }
        }
        for &level in &order {
            if out.len() == k {
                break;
            }
            let pool = &pools[level];
            out.push(pool[round % pool.len()].clone());
        }
        round += 1;
    }
    Ok(out)
}
