use std::io::Write;

use serde_json::{json, Value};
use wdn_core::hydraulics::{simulate_episode, EpisodeConfig, EpisodeResult};
use wdn_core::metrics::{compute_metrics, Metrics, MetricsScope};
use wdn_core::network::{LinkKind, Network};
use wdn_core::training::LossConfig;

use crate::common::*;
use crate::{failed, CliError, ForecasterArg, LlmArgs, ScopeArg, SimulateArgs};

pub const NODE_TRACE_HEADER: &str = "t,node_id,pressure_psi,delivered_m3s";
pub const PUMP_TRACE_HEADER: &str = "t,pump_id,speed,power_kw";

/// Everything one evaluation run needs besides the controller.
pub(crate) struct Evaluation<'a> {
    pub net: &'a Network,
    pub series: &'a wdn_core::demand::DemandSeries,
    pub hours: std::ops::Range<usize>,
    pub seed: u64,
    pub llm: &'a LlmArgs,
}

pub(crate) struct EvalOutput {
    pub results: Vec<EpisodeResult>,
    pub metrics: Metrics,
    pub llm_fallbacks: usize,
}

impl Evaluation<'_> {
    /// One episode per test day, each with a fresh controller.
    pub fn run(
        &self,
        controller: &ControllerSpec,
        kind: ForecasterArg,
        window: usize,
        scope: MetricsScope,
    ) -> Result<EvalOutput, CliError> {
        let (context, events) = forecast_context(self.net, self.series, kind, self.llm, self.seed)?;
        let mut forecaster = build_forecaster(kind, window, self.net, self.series, &events, self.llm, self.seed)?;
        let episode = EpisodeConfig::default();
        let mut results = Vec::new();
        for (start, len) in day_chunks(&self.hours) {
            let mut c = controller.instantiate();
            let r = simulate_episode(
                self.net,
                self.series,
                start,
                len,
                c.as_mut(),
                forecaster.as_dyn(),
                &context,
                &episode,
            )
            .map_err(|e| failed(format!("episode at hour {start}: {e}")))?;
            for step in &r.steps {
                step.action.check(self.net).map_err(|e| failed(format!("hour {}: {e}", step.hour)))?;
            }
            results.push(r);
        }
        let metrics = compute_metrics(&results, self.net, &LossConfig::default(), scope)
            .ok_or_else(|| failed("no hours simulated"))?;
        Ok(EvalOutput { results, metrics, llm_fallbacks: forecaster.fallbacks() })
    }
}

/// Runs the chosen controller over the test days and writes
/// `metrics.json`, `trace_nodes.csv` and `trace_pumps.csv` under `--out`.
/// Returns the metrics document.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Value, CliError> {
    let controller = ControllerSpec::parse(&args.controller)?;
    let window = match (controller.window(), args.window) {
        (Some(trained), Some(w)) if trained != w => {
            return Err(CliError::Usage(format!("checkpoint was trained for window {trained}, got --window {w}")))
        }
        (Some(trained), _) => trained,
        (None, w) => w.unwrap_or(0),
    };
    check_forecaster_flags(args.forecaster, window, &args.llm)?;
    let net = load_net(&args.net)?;
    controller.check(&net)?;
    let series = load_demands(&args.demands, &net)?;
    let hours = test_hours(&series, args.hours)?;
    let scope = match args.scope {
        ScopeArg::Interest => MetricsScope::InterestNodes,
        ScopeArg::All => MetricsScope::AllJunctions,
    };

    let eval = Evaluation { net: &net, series: &series, hours: hours.clone(), seed: args.seed, llm: &args.llm };
    let out = eval.run(&controller, args.forecaster, window, scope)?;
    let hash = test_data_hash(&series, hours.clone());
    log::info!("test data sha256 {hash}");
    if out.metrics.nonconverged_steps > 0 {
        log::warn!("{} of {} steps did not converge", out.metrics.nonconverged_steps, out.metrics.hours);
    }

    let mut config = net_config(&args.net);
    config["command"] = "simulate".into();
    config["demands"] = args.demands.display().to_string().into();
    config["controller"] = args.controller.clone().into();
    config["forecaster"] = format!("{:?}", args.forecaster).to_lowercase().into();
    config["window"] = window.into();
    config["hours"] = json!([hours.start, hours.end]);
    config["seed"] = args.seed.into();
    config["scope"] = format!("{:?}", args.scope).to_lowercase().into();
    if args.forecaster == ForecasterArg::Llm {
        config["llm"] = llm_config(&args.llm);
    }
    let comment = serde_json::to_string(&config).map_err(failed)?;

    let m = &out.metrics;
    let doc = json!({
        "p_mse": m.p_mse,
        "max_viol_rate": m.max_viol_rate,
        "min_viol_rate": m.min_viol_rate,
        "energy_kwh_per_hour": m.energy_kwh_per_hour,
        "hours": m.hours,
        "episodes": out.results.len(),
        "nonconverged_steps": m.nonconverged_steps,
        "llm_fallbacks": out.llm_fallbacks,
        "test_data_sha256": hash,
        "per_node": m.per_node,
        "config": config,
        "meta": meta(),
    });
    write_json(&args.out.join("metrics.json"), &doc)?;
    write_traces(&args.out, &net, &out.results, &comment)?;
    Ok(doc)
}

fn write_traces(dir: &std::path::Path, net: &Network, results: &[EpisodeResult], comment: &str) -> Result<(), CliError> {
    let mut nodes = create(&dir.join("trace_nodes.csv"))?;
    writeln!(nodes, "# {comment}")?;
    writeln!(nodes, "{NODE_TRACE_HEADER}")?;
    let mut pumps = create(&dir.join("trace_pumps.csv"))?;
    writeln!(pumps, "# {comment}")?;
    writeln!(pumps, "{PUMP_TRACE_HEADER}")?;
    for step in results.iter().flat_map(|r| &r.steps) {
        let s = &step.state;
        for &i in net.junction_indices() {
            writeln!(nodes, "{},{},{},{}", step.hour, net.nodes()[i].id, s.pressures[i], s.delivered[i])?;
        }
        for (k, link) in net.links().iter().enumerate() {
            let LinkKind::Pump { init_speed, .. } = link.kind else { continue };
            let speed = match (step.action.pump_speed.get(&link.id), step.action.delegated.get(&link.id)) {
                (Some(&v), _) => v,
                (None, Some(true)) => init_speed,
                _ => 0.0,
            };
            writeln!(pumps, "{},{},{},{}", step.hour, link.id, speed, s.pump_power[k])?;
        }
    }
    nodes.flush()?;
    pumps.flush()?;
    Ok(())
}
