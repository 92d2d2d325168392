//! Demand CSV (`node_id,hour,demand_m3s`, node-major) and events JSON-lines.
//!
//! Lines starting with `#` are comments; writers use one to record the
//! configuration that produced the file.

use std::io::{BufRead, Write};

use super::events::EventRecord;
use super::{DemandError, DemandSeries};

pub const DEMAND_HEADER: &str = "node_id,hour,demand_m3s";

pub fn write_demand_csv<W: Write>(
    mut out: W,
    series: &DemandSeries,
    comment: Option<&str>,
) -> Result<usize, DemandError> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{DEMAND_HEADER}")?;
    let mut rows = 0;
    for (id, row) in series.junction_ids.iter().zip(&series.values) {
        for (t, v) in row.iter().enumerate() {
            writeln!(out, "{id},{t},{v}")?;
            rows += 1;
        }
    }
    Ok(rows)
}

pub fn read_demand_csv<R: std::io::Read>(input: R) -> Result<DemandSeries, DemandError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| DemandError::Format(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node_id", "hour", "demand_m3s"] {
        return Err(DemandError::Format(format!("expected header '{DEMAND_HEADER}'")));
    }
    let mut series = DemandSeries { junction_ids: Vec::new(), values: Vec::new() };
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DemandError::Format(e.to_string()))?;
        let line = n + 2;
        let bad = |m: &str| DemandError::Format(format!("record {line}: {m}"));
        let id = rec.get(0).ok_or_else(|| bad("missing node_id"))?;
        let hour: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad hour"))?;
        let value: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad demand"))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(bad("demand must be finite and >= 0"));
        }
        let row = match series.junction_ids.iter().position(|j| j == id) {
            Some(r) => r,
            None => {
                series.junction_ids.push(id.to_string());
                series.values.push(Vec::new());
                series.values.len() - 1
            }
        };
        if series.values[row].len() != hour {
            return Err(bad("hours must be listed in order from 0 for each node"));
        }
        series.values[row].push(value);
    }
    let hours = series.hours();
    if series.values.iter().any(|r| r.len() != hours) {
        return Err(DemandError::Format("nodes cover different numbers of hours".into()));
    }
    Ok(series)
}

pub fn write_events_jsonl<W: Write>(
    mut out: W,
    events: &[EventRecord],
    comment: Option<&str>,
) -> Result<usize, DemandError> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    for e in events {
        let line = serde_json::to_string(e).map_err(|e| DemandError::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(events.len())
}

pub fn read_events_jsonl<R: BufRead>(input: R) -> Result<Vec<EventRecord>, DemandError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| DemandError::Format(format!("events line {}: {e}", n + 1)))?;
        if rec.level > 4 || rec.text.is_empty() {
            return Err(DemandError::Format(format!("events line {}: invalid record", n + 1)));
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{render_event_text, Archetype};

    #[test]
    fn demand_csv_round_trip() {
        let series = DemandSeries {
            junction_ids: vec!["J1".into(), "J2".into()],
            values: vec![vec![0.1, 0.2 / 3.0, 0.0], vec![1e-7, 0.5, 0.25]],
        };
        let mut buf = Vec::new();
        let rows = write_demand_csv(&mut buf, &series, Some("config={}")).unwrap();
        assert_eq!(rows, 6);
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(1), Some(DEMAND_HEADER));
        assert_eq!(read_demand_csv(buf.as_slice()).unwrap(), series);
    }

    #[test]
    fn out_of_order_hours_rejected() {
        let text = "node_id,hour,demand_m3s\nJ1,1,0.5\n";
        assert!(read_demand_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn events_round_trip() {
        let events = vec![
            render_event_text(1, Archetype::Residential, 0, 7, 3, 1),
            render_event_text(2, Archetype::Dining, 4, 19, 4, 1),
        ];
        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, &events, Some("seed 1")).unwrap();
        assert_eq!(read_events_jsonl(buf.as_slice()).unwrap(), events);
    }
}
