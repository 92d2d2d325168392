use std::io::Write;

use serde_json::json;
use wdn_core::metrics::{Metrics, MetricsScope};

use crate::common::*;
use crate::simulate::Evaluation;
use crate::{failed, CliError, CompareArgs, ForecasterArg};

pub const COMPARE_HEADER: &str = "method,p_mse,max_viol_rate,min_viol_rate,energy_kwh_per_hour,test_data_sha256";

pub struct CompareRow {
    pub method: String,
    pub metrics: Metrics,
    pub test_data_sha256: String,
}

/// Evaluates the rule baseline and every checkpoint on the same test hours
/// and writes `compare.csv` and `compare.txt` under `--out`.
pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<CompareRow>, CliError> {
    let mut methods = Vec::new();
    if !args.no_rule {
        methods.push(("rule".to_string(), ControllerSpec::Rule, ForecasterArg::None, 0));
    }
    for path in &args.checkpoints {
        let spec = ControllerSpec::load_policy(path)?;
        let window = spec.window().unwrap_or(0);
        let kind = if window == 0 { ForecasterArg::None } else { args.forecaster };
        check_forecaster_flags(kind, window, &args.llm)?;
        let stem = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let label = match kind {
            ForecasterArg::None => format!("{stem} (W0)"),
            k => format!("{stem} (W{window}, {})", format!("{k:?}").to_lowercase()),
        };
        methods.push((label, spec, kind, window));
    }
    if methods.is_empty() {
        return Err(CliError::Usage("nothing to compare: give --checkpoints or drop --no-rule".into()));
    }

    let net = load_net(&args.net)?;
    let series = load_demands(&args.demands, &net)?;
    let hours = test_hours(&series, args.hours)?;
    let mut rows = Vec::new();
    for (method, spec, kind, window) in &methods {
        spec.check(&net)?;
        let eval = Evaluation { net: &net, series: &series, hours: hours.clone(), seed: args.seed, llm: &args.llm };
        let out = eval.run(spec, *kind, *window, MetricsScope::InterestNodes)?;
        let hash = test_data_hash(&series, hours.clone());
        log::info!("{method}: test data sha256 {hash}");
        rows.push(CompareRow { method: method.clone(), metrics: out.metrics, test_data_sha256: hash });
    }

    let mut config = net_config(&args.net);
    config["command"] = "compare".into();
    config["demands"] = args.demands.display().to_string().into();
    config["checkpoints"] = args.checkpoints.iter().map(|p| p.display().to_string()).collect();
    config["forecaster"] = format!("{:?}", args.forecaster).to_lowercase().into();
    config["hours"] = json!([hours.start, hours.end]);
    config["seed"] = args.seed.into();
    let comment = serde_json::to_string(&config).map_err(failed)?;

    let mut csv = create(&args.out.join("compare.csv"))?;
    writeln!(csv, "# {comment}")?;
    writeln!(csv, "{COMPARE_HEADER}")?;
    for r in &rows {
        let m = &r.metrics;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            csv_field(&r.method),
            m.p_mse,
            m.max_viol_rate,
            m.min_viol_rate,
            m.energy_kwh_per_hour,
            r.test_data_sha256
        )?;
    }
    csv.flush()?;

    let table = render_table(&rows);
    let mut txt = create(&args.out.join("compare.txt"))?;
    txt.write_all(table.as_bytes())?;
    txt.flush()?;
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_table(rows: &[CompareRow]) -> String {
    let header = ["Method", "P-MSE", "Max Viol.", "Min Viol.", "Energy"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [
                r.method.clone(),
                format!("{:.4}", m.p_mse),
                format!("{:.2}%", 100.0 * m.max_viol_rate),
                format!("{:.2}%", 100.0 * m.min_viol_rate),
                format!("{:.3}", m.energy_kwh_per_hour),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            s.push_str(&format!("  {cell:>w$}"));
        }
        s.push('\n');
        s
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&format!("{}\n", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}
