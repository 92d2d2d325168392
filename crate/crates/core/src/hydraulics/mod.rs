//! Native hydraulic simulation: snapshot solver with pressure-driven
//! demand, tank integration and episode roll-out.

pub mod episode;
pub mod pda;
pub mod pump;
pub mod solver;
pub mod state;
pub mod tanks;

pub use episode::{simulate_episode, EpisodeConfig, EpisodeResult, EpisodeStep};
pub use pda::{pda_factor, PdaParams};
pub use pump::{fit_pump_curve, pump_head, pump_power_kw, PumpModel};
pub use solver::{hazen_williams_r, solve_snapshot, SolveError};
pub use state::HydraulicState;
pub use tanks::{step_tanks, TankEvent, TankStep};
