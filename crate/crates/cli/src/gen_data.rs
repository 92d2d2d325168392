use std::io::Write;
use std::path::PathBuf;

use wdn_core::demand::{
    build_event_library, generate_dataset, region_levels, write_demand_csv, write_events_jsonl, GeneratorConfig,
};

use crate::common::{create, load_net, net_config};
use crate::{failed, CliError, GenDataArgs};

/// Writes `demands.csv` and `events.jsonl` under `--out`; returns each
/// path with its data row count.
pub fn cmd_gen_data(args: &GenDataArgs) -> Result<Vec<(PathBuf, usize)>, CliError> {
    let net = load_net(&args.net)?;
    let gen = GeneratorConfig::default();
    let dataset = generate_dataset(&net, &gen, args.seed).map_err(failed)?;
    let levels = region_levels(&dataset.series, &net);
    let events = build_event_library(&levels, &gen.region_archetypes, args.seed).map_err(failed)?;

    let mut config = net_config(&args.net);
    config["command"] = "gen-data".into();
    config["seed"] = args.seed.into();
    config["generator"] = serde_json::to_value(&gen).map_err(failed)?;
    let comment = serde_json::to_string(&config).map_err(failed)?;

    let demand_path = args.out.join("demands.csv");
    let mut out = create(&demand_path)?;
    let rows = write_demand_csv(&mut out, &dataset.series, Some(&comment)).map_err(failed)?;
    out.flush()?;

    let events_path = args.out.join("events.jsonl");
    let mut out = create(&events_path)?;
    let n_events = write_events_jsonl(&mut out, &events, Some(&comment)).map_err(failed)?;
    out.flush()?;

    Ok(vec![(demand_path, rows), (events_path, n_events)])
}
