//! Upper-level demand-level forecasting.
//!
//! A forecaster turns the context visible at an issue hour into per-region
//! level sequences for the following `W` hours. Three implementations:
//! the oracle (true future levels, used during training), persistence,
//! and an LLM chat client prompted with event narratives and in-context
//! examples.

mod icl;
mod llm;
mod parse;
mod prompt;

pub use icl::{select_icl_examples, IclError};
pub use llm::{ChatMessage, LlmClient, LlmClientConfig, LlmError, LlmForecaster, FallbackEvent};
pub use parse::{parse_level_response, LevelParseError};
pub use prompt::{
    build_generation_prompt, build_prediction_prompt, PromptBundle, PromptError, LEVEL_RULES,
};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::demand::{EventRecord, RegionLevels};

pub const ALLOWED_WINDOWS: [usize; 4] = [0, 2, 4, 6];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastWindow {
    /// Issue hour (global index); may be -1 before the first observed hour.
    pub t: i64,
    pub window: usize,
    /// Region id -> levels for hours t+1..=t+window.
    pub levels: BTreeMap<u32, Vec<u8>>,
}

impl ForecastWindow {
    pub fn empty(t: i64, num_regions: usize) -> Self {
        ForecastWindow {
            t,
            window: 0,
            levels: (1..=num_regions as u32).map(|r| (r, Vec::new())).collect(),
        }
    }

    pub fn is_valid(&self, num_regions: usize) -> bool {
        self.levels.len() == num_regions
            && (1..=num_regions as u32).all(|r| {
                self.levels
                    .get(&r)
                    .is_some_and(|s| s.len() == self.window && s.iter().all(|&l| l <= 4))
            })
    }
}

/// What a forecaster may look at: the true region levels (the oracle reads
/// the future, persistence only the past) and the event narratives.
#[derive(Debug, Clone, Default)]
pub struct ForecastContext {
    pub truth: Option<RegionLevels>,
    events: HashMap<(u32, usize), String>,
}

impl ForecastContext {
    pub fn new(truth: RegionLevels, events: &[EventRecord]) -> Self {
        ForecastContext {
            truth: Some(truth),
            events: events.iter().map(|e| ((e.region, e.global_hour()), e.text.clone())).collect(),
        }
    }

    pub fn event(&self, region: u32, hour: usize) -> Option<&str> {
        self.events.get(&(region, hour)).map(String::as_str)
    }

    fn truth(&self) -> &RegionLevels {
        self.truth.as_ref().expect("forecast context carries true levels")
    }
}

pub trait Forecaster {
    fn window(&self) -> usize;

    fn forecast(&mut self, t: i64, context: &ForecastContext) -> ForecastWindow;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForecasterKind {
    None,
    Oracle,
    Persistence,
    Llm,
}

impl std::str::FromStr for ForecasterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ForecasterKind::None),
            "oracle" => Ok(ForecasterKind::Oracle),
            "persistence" => Ok(ForecasterKind::Persistence),
            "llm" => Ok(ForecasterKind::Llm),
            other => Err(format!("unknown forecaster '{other}'")),
        }
    }
}

/// Reads the true levels of hours t+1..=t+W.
#[derive(Debug, Clone)]
pub struct OracleForecaster {
    pub window: usize,
    pub num_regions: usize,
}

impl Forecaster for OracleForecaster {
    fn window(&self) -> usize {
        self.window
    }

    fn forecast(&mut self, t: i64, context: &ForecastContext) -> ForecastWindow {
        if self.window == 0 {
            return ForecastWindow::empty(t, self.num_regions);
        }
        let truth = context.truth();
        ForecastWindow {
            t,
            window: self.window,
            levels: (1..=self.num_regions as u32)
                .map(|r| (r, (1..=self.window as i64).map(|h| truth.level(r, t + h)).collect()))
                .collect(),
        }
    }
}

/// Repeats the last observed level; level 0 before any observation.
#[derive(Debug, Clone)]
pub struct PersistenceForecaster {
    pub window: usize,
    pub num_regions: usize,
}

pub(crate) fn persistence_levels(t: i64, window: usize, region: u32, context: &ForecastContext) -> Vec<u8> {
    let last = if t >= 0 { context.truth().level(region, t) } else { 0 };
    vec![last; window]
}

impl Forecaster for PersistenceForecaster {
    fn window(&self) -> usize {
        self.window
    }

    fn forecast(&mut self, t: i64, context: &ForecastContext) -> ForecastWindow {
        ForecastWindow {
            t,
            window: self.window,
            levels: (1..=self.num_regions as u32)
                .map(|r| (r, persistence_levels(t, self.window, r, context)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn context() -> ForecastContext {
        ForecastContext::new(
            RegionLevels { levels: vec![vec![0, 1, 3, 4, 2, 2, 1, 0], vec![4, 4, 4, 3, 3, 2, 1, 1]] },
            &[],
        )
    }

    #[test]
    fn oracle_reads_future() {
        let mut f = OracleForecaster { window: 2, num_regions: 2 };
        let w = f.forecast(1, &context());
        assert_eq!(w.levels[&1], vec![3, 4]);
        assert_eq!(w.levels[&2], vec![4, 3]);
        assert!(w.is_valid(2));
    }

    #[test]
    fn oracle_clamps_past_end() {
        let mut f = OracleForecaster { window: 4, num_regions: 2 };
        assert_eq!(f.forecast(6, &context()).levels[&1], vec![0, 0, 0, 0]);
    }

    #[test]
    fn persistence_repeats_last() {
        let mut f = PersistenceForecaster { window: 4, num_regions: 2 };
        assert_eq!(f.forecast(4, &context()).levels[&1], vec![2, 2, 2, 2]);
        assert_eq!(f.forecast(-1, &context()).levels[&2], vec![0, 0, 0, 0]);
    }

    #[test]
    fn zero_window_is_empty() {
        let ctx = context();
        let mut o = OracleForecaster { window: 0, num_regions: 2 };
        let mut p = PersistenceForecaster { window: 0, num_regions: 2 };
        for w in [o.forecast(3, &ctx), p.forecast(3, &ctx)] {
            assert_eq!(w.window, 0);
            assert!(w.levels.values().all(Vec::is_empty));
            assert!(w.is_valid(2));
        }
    }

    proptest! {
        #[test]
        fn windows_always_valid(
            levels in proptest::collection::vec(proptest::collection::vec(0u8..5, 30), 1..5),
            t in -1i64..40,
            widx in 0usize..4,
        ) {
            let n = levels.len();
            let ctx = ForecastContext::new(RegionLevels { levels }, &[]);
            let w = ALLOWED_WINDOWS[widx];
            let mut o = OracleForecaster { window: w, num_regions: n };
            let mut p = PersistenceForecaster { window: w, num_regions: n };
            prop_assert!(o.forecast(t, &ctx).is_valid(n));
            prop_assert!(p.forecast(t, &ctx).is_valid(n));
        }
    }
}
