use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};
use wdn_core::controller::{PolicyController, PolicyDims, PolicyParams, RuleConfig, RuleController, Controller};
use wdn_core::demand::{
    build_event_library, read_demand_csv, read_events_jsonl, region_levels, split_days, Archetype, DemandSeries,
    EventRecord, HOURS_PER_DAY,
};
use wdn_core::forecast::{
    ForecastContext, Forecaster, LlmClient, LlmClientConfig, LlmForecaster, OracleForecaster, PersistenceForecaster,
    ALLOWED_WINDOWS,
};
use wdn_core::network::{build_mininet, parse_inp, FlowUnit, Network};

use crate::{failed, CliError, FlowUnitArg, ForecasterArg, LlmArgs, NetArgs};

pub fn load_net(args: &NetArgs) -> Result<Network, CliError> {
    if args.net == "mininet" {
        return Ok(build_mininet());
    }
    let text = std::fs::read_to_string(&args.net).map_err(|e| failed(format!("{}: {e}", args.net)))?;
    let unit = match args.flow_unit {
        FlowUnitArg::Cms => FlowUnit::CubicMetersPerSecond,
        FlowUnitArg::Gpm => FlowUnit::GallonsPerMinute,
    };
    let parsed = parse_inp(&text, unit).map_err(|e| failed(format!("{}: {e}", args.net)))?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", args.net);
    }
    Ok(parsed.network)
}

pub fn net_config(args: &NetArgs) -> Value {
    serde_json::json!({ "net": args.net, "flow_unit": format!("{:?}", args.flow_unit).to_lowercase() })
}

pub fn load_demands(path: &Path, net: &Network) -> Result<DemandSeries, CliError> {
    let file = File::open(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    let series = read_demand_csv(BufReader::new(file)).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    series.node_mapping(net).map_err(failed)?;
    if series.days() == 0 {
        return Err(failed(format!("{}: fewer than {HOURS_PER_DAY} hours of demand", path.display())));
    }
    Ok(series)
}

pub fn load_events(path: &Path) -> Result<Vec<EventRecord>, CliError> {
    let file = File::open(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    read_events_jsonl(BufReader::new(file)).map_err(|e| failed(format!("{}: {e}", path.display())))
}

pub fn region_archetypes(net: &Network) -> Result<BTreeMap<u32, Archetype>, CliError> {
    (1..=net.num_regions() as u32)
        .map(|r| Archetype::for_region(r).map(|a| (r, a)).ok_or_else(|| failed(format!("no archetype for region {r}"))))
        .collect()
}

pub fn check_window(window: usize) -> Result<(), CliError> {
    if ALLOWED_WINDOWS.contains(&window) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--window must be one of {ALLOWED_WINDOWS:?}, got {window}")))
    }
}

/// Test-split hours as a global hour range, optionally cut to the first `hours`.
pub fn test_hours(series: &DemandSeries, hours: Option<usize>) -> Result<Range<usize>, CliError> {
    let (_, days) = split_days(series.days());
    let all = days.start * HOURS_PER_DAY..days.end * HOURS_PER_DAY;
    match hours {
        None => Ok(all),
        Some(0) => Err(CliError::Usage("--hours must be positive".into())),
        Some(h) if h > all.len() => {
            Err(CliError::Usage(format!("--hours {h} exceeds the {} test hours", all.len())))
        }
        Some(h) => Ok(all.start..all.start + h),
    }
}

/// Episodes of at most one day covering `hours`, as (start, length).
pub fn day_chunks(hours: &Range<usize>) -> Vec<(usize, usize)> {
    (hours.start..hours.end).step_by(HOURS_PER_DAY).map(|s| (s, HOURS_PER_DAY.min(hours.end - s))).collect()
}

/// SHA-256 over the demand values of `hours`, node by node.
pub fn test_data_hash(series: &DemandSeries, hours: Range<usize>) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}..{}\n", hours.start, hours.end));
    for (id, row) in series.junction_ids.iter().zip(&series.values) {
        h.update(id.as_bytes());
        for v in &row[hours.clone()] {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Drops the top-level `meta` key, which holds wall-clock data.
pub fn strip_meta(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("meta");
    }
    v
}

pub fn meta() -> Value {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    serde_json::json!({ "created_unix": secs })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| failed(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(failed)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// A loaded controller description; each episode gets a fresh instance.
pub enum ControllerSpec {
    Rule,
    Policy { params: PolicyParams, window: usize, path: String },
}

impl ControllerSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.split_once('@') {
            None if s == "rule" => Ok(ControllerSpec::Rule),
            Some(("policy", path)) if !path.is_empty() => Self::load_policy(Path::new(path)),
            _ => Err(CliError::Usage(format!("--controller must be 'rule' or 'policy@<file>', got '{s}'"))),
        }
    }

    pub fn load_policy(path: &Path) -> Result<Self, CliError> {
        let (params, config) = PolicyParams::load(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
        let window = config["window"]
            .as_u64()
            .ok_or_else(|| failed(format!("{}: checkpoint config has no window", path.display())))?;
        Ok(ControllerSpec::Policy { params, window: window as usize, path: path.display().to_string() })
    }

    pub fn window(&self) -> Option<usize> {
        match self {
            ControllerSpec::Rule => None,
            ControllerSpec::Policy { window, .. } => Some(*window),
        }
    }

    pub fn check(&self, net: &Network) -> Result<(), CliError> {
        if let ControllerSpec::Policy { params, window, path } = self {
            if params.dims != PolicyDims::for_network(net, *window) {
                return Err(CliError::Usage(format!("{path}: checkpoint does not fit this network at window {window}")));
            }
        }
        Ok(())
    }

    pub fn instantiate(&self) -> Box<dyn Controller> {
        match self {
            ControllerSpec::Rule => Box::new(RuleController::default()),
            ControllerSpec::Policy { params, .. } => Box::new(PolicyController::new(params.clone(), RuleConfig::default())),
        }
    }
}

pub enum AnyForecaster {
    Plain(Box<dyn Forecaster>),
    Llm(Box<LlmForecaster>),
}

impl AnyForecaster {
    pub fn as_dyn(&mut self) -> &mut dyn Forecaster {
        match self {
            AnyForecaster::Plain(f) => f.as_mut(),
            AnyForecaster::Llm(f) => f.as_mut(),
        }
    }

    pub fn fallbacks(&self) -> usize {
        match self {
            AnyForecaster::Plain(_) => 0,
            AnyForecaster::Llm(f) => f.fallbacks().len(),
        }
    }
}

/// Rejects flag combinations before any work is done.
pub fn check_forecaster_flags(kind: ForecasterArg, window: usize, llm: &LlmArgs) -> Result<(), CliError> {
    check_window(window)?;
    if kind == ForecasterArg::None && window != 0 {
        return Err(CliError::Usage(format!("--forecaster none needs --window 0, got {window}")));
    }
    if kind == ForecasterArg::Llm && llm.llm_base_url.is_none() && std::env::var_os(&llm.llm_key_env).is_none() {
        return Err(CliError::Usage(format!(
            "--forecaster llm needs ${} or --llm-base-url",
            llm.llm_key_env
        )));
    }
    Ok(())
}

pub fn llm_config(llm: &LlmArgs) -> Value {
    serde_json::json!({
        "base_url": llm.llm_base_url,
        "model": llm.llm_model,
        "key_env": llm.llm_key_env,
        "retries": llm.llm_retries,
        "icl_examples": llm.icl_examples,
        "events": llm.events.as_ref().map(|p| p.display().to_string()),
    })
}

/// Forecast context over the whole series; event narratives only when the
/// LLM forecaster will read them.
pub fn forecast_context(
    net: &Network,
    series: &DemandSeries,
    kind: ForecasterArg,
    llm: &LlmArgs,
    seed: u64,
) -> Result<(ForecastContext, Vec<EventRecord>), CliError> {
    let levels = region_levels(series, net);
    let events = match (kind, &llm.events) {
        (ForecasterArg::Llm, Some(path)) => load_events(path)?,
        (ForecasterArg::Llm, None) => build_event_library(&levels, &region_archetypes(net)?, seed).map_err(failed)?,
        _ => Vec::new(),
    };
    Ok((ForecastContext::new(levels, &events), events))
}

pub fn build_forecaster(
    kind: ForecasterArg,
    window: usize,
    net: &Network,
    series: &DemandSeries,
    events: &[EventRecord],
    llm: &LlmArgs,
    seed: u64,
) -> Result<AnyForecaster, CliError> {
    let num_regions = net.num_regions();
    Ok(match kind {
        ForecasterArg::None => AnyForecaster::Plain(Box::new(OracleForecaster { window: 0, num_regions })),
        ForecasterArg::Oracle => AnyForecaster::Plain(Box::new(OracleForecaster { window, num_regions })),
        ForecasterArg::Persistence => AnyForecaster::Plain(Box::new(PersistenceForecaster { window, num_regions })),
        ForecasterArg::Llm => {
            let mut cfg = LlmClientConfig {
                model: llm.llm_model.clone(),
                api_key_env: llm.llm_key_env.clone(),
                max_retries: llm.llm_retries,
                backoff_ms: llm.llm_backoff_ms,
                ..LlmClientConfig::default()
            };
            if let Some(url) = &llm.llm_base_url {
                cfg.base_url = url.clone();
            }
            let client = LlmClient::new(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
            // in-context examples come from the training days only
            let (train, _) = split_days(series.days());
            let library: Vec<EventRecord> = events.iter().filter(|e| train.contains(&e.day)).cloned().collect();
            let f = LlmForecaster::from_library(client, window, region_archetypes(net)?, &library, llm.icl_examples, seed)
                .map_err(failed)?;
            AnyForecaster::Llm(Box::new(f))
        }
    })
}
