//! The `wdn` command line: dataset generation, simulation, training and
//! method comparison on a water network.
//!
//! Every file a command writes records the configuration that produced
//! it. JSON files carry it under `"config"`; CSV and JSON-lines files carry
//! it on a leading `#` comment line. Wall-clock data appears only under a
//! top-level `"meta"` key so reruns can be compared byte for byte once that
//! key is removed.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod common;
mod compare;
mod gen_data;
mod simulate;
mod train;

pub use common::{strip_meta, test_data_hash};
pub use compare::{cmd_compare, render_table, CompareRow, COMPARE_HEADER};
pub use gen_data::cmd_gen_data;
pub use simulate::{cmd_simulate, NODE_TRACE_HEADER, PUMP_TRACE_HEADER};
pub use train::{cmd_train, HISTORY_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combination; exits with status 2 like a parse error.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "wdn", version, about = "Water network simulation and controller training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic demand dataset and event narratives.
    GenData(GenDataArgs),
    /// Run a controller over the test days and report metrics.
    Simulate(SimulateArgs),
    /// Train a policy on the training days with oracle forecasts.
    Train(TrainArgs),
    /// Evaluate several methods on the same test days.
    Compare(CompareArgs),
}

/// Runs a command and prints its summary to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => {
            for (path, rows) in cmd_gen_data(&a)? {
                println!("{}: {rows} rows", path.display());
            }
        }
        Command::Simulate(a) => {
            let m = cmd_simulate(&a)?;
            let f = |k: &str| m[k].as_f64().unwrap_or(f64::NAN);
            println!(
                "p_mse {:.6} max_viol {:.4} min_viol {:.4} energy {:.4} kWh/h over {} h",
                f("p_mse"),
                f("max_viol_rate"),
                f("min_viol_rate"),
                f("energy_kwh_per_hour"),
                m["hours"]
            );
        }
        Command::Train(a) => {
            let history = cmd_train(&a)?;
            if let (Some(first), Some(last)) = (history.first(), history.last()) {
                println!("loss {:.6} -> {:.6} over {} updates", first.loss.total, last.loss.total, history.len());
            }
            println!("checkpoint {}", a.out_checkpoint.display());
        }
        Command::Compare(a) => print!("{}", render_table(&cmd_compare(&a)?)),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowUnitArg {
    Cms,
    Gpm,
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    /// `mininet` for the built-in network, otherwise an INP file.
    #[arg(long)]
    pub net: String,
    /// Flow unit of an INP file.
    #[arg(long, value_enum, default_value = "cms")]
    pub flow_unit: FlowUnitArg,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for demands.csv and events.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ForecasterArg {
    None,
    Oracle,
    Persistence,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Interest,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct LlmArgs {
    /// Chat-completions endpoint; defaults to the client's built-in URL.
    #[arg(long)]
    pub llm_base_url: Option<String>,
    #[arg(long, default_value = "gpt-4o")]
    pub llm_model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub llm_key_env: String,
    #[arg(long, default_value_t = 3)]
    pub llm_retries: u32,
    /// Delay before the first retry, doubled after each failure.
    #[arg(long, default_value_t = 500)]
    pub llm_backoff_ms: u64,
    /// In-context examples per region.
    #[arg(long, default_value_t = 10)]
    pub icl_examples: usize,
    /// Event narratives as JSON lines; rendered from the demand data if absent.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub demands: PathBuf,
    /// `rule` or `policy@<checkpoint>`.
    #[arg(long, default_value = "rule")]
    pub controller: String,
    #[arg(long, value_enum, default_value = "none")]
    pub forecaster: ForecasterArg,
    /// Defaults to the checkpoint's window for a policy, else 0.
    #[arg(long)]
    pub window: Option<usize>,
    /// Simulate only the first N test hours.
    #[arg(long)]
    pub hours: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "interest")]
    pub scope: ScopeArg,
    /// Output directory for metrics.json and the trace CSVs.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub demands: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub window: usize,
    /// Step size; defaults to a per-window value.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Perturbation directions per gradient estimate.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Train on the first N training days only.
    #[arg(long)]
    pub train_days: Option<usize>,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Defaults to the checkpoint path with a `.history.csv` extension.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub demands: PathBuf,
    /// Policy checkpoints; each runs with the window it was trained for.
    #[arg(long, num_args = 0..)]
    pub checkpoints: Vec<PathBuf>,
    /// Forecaster feeding the policies.
    #[arg(long, value_enum, default_value = "oracle")]
    pub forecaster: ForecasterArg,
    /// Leave the rule baseline out of the table.
    #[arg(long)]
    pub no_rule: bool,
    #[arg(long)]
    pub hours: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for compare.csv and compare.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub llm: LlmArgs,
}
