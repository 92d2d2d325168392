//! Water distribution network operations: hydraulic simulation with
//! pressure-driven demand, synthetic demand data, demand-level forecasting
//! and pump/valve control trained by zeroth-order optimization.

pub mod controller;
pub mod demand;
pub mod forecast;
pub mod hydraulics;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod training;
pub mod units;
