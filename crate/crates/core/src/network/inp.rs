//! Reader and writer for a subset of the EPANET INP format.
//!
//! Standard sections: `[JUNCTIONS] [RESERVOIRS] [TANKS] [PIPES] [PUMPS]
//! [VALVES] [CURVES] [DEMANDS] [STATUS]`. `[PATTERNS]` is read and ignored,
//! `[COORDINATES] [OPTIONS] [TITLE] [END]` are skipped silently, anything
//! else is skipped with a warning. Extra sections carry what INP cannot:
//!
//! ```text
//! [BOUNDS]      linkId min max     ; pump speed or PBV setting (psi)
//! [FLOWLIMITS]  linkId min max     ; flow units of the file
//! [REGIONS]     junctionId region
//! [INTEREST]    junctionId ...
//! ```
//!
//! With `CMS` all lengths, levels and pipe diameters are meters. With
//! `GPM` they are feet, except pipe diameters in inches. PBV settings are
//! psi in both.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::{
    Curve, FlowUnit, Link, LinkKind, LinkStatus, Location, Network, NetworkError, NetworkParts, Node, NodeKind,
};
use crate::units::{M3S_PER_GPM, M_PER_FT, M_PER_IN};

#[derive(Debug, Clone)]
pub struct ParsedNetwork {
    pub network: Network,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy)]
struct Scales {
    length: f64,
    pipe_diameter: f64,
    flow: f64,
}

impl Scales {
    fn of(unit: FlowUnit) -> Self {
        match unit {
            FlowUnit::CubicMetersPerSecond => Scales { length: 1.0, pipe_diameter: 1.0, flow: 1.0 },
            FlowUnit::GallonsPerMinute => Scales { length: M_PER_FT, pipe_diameter: M_PER_IN, flow: M3S_PER_GPM },
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> NetworkError {
    NetworkError::Syntax { at: Location::Line(line), msg: msg.into() }
}

fn number(tok: &str, line: usize, what: &str) -> Result<f64, NetworkError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line, format!("{what}: '{tok}' is not a number")))
}

fn need(toks: &[&str], n: usize, line: usize, section: &str) -> Result<(), NetworkError> {
    if toks.len() < n {
        Err(syntax(line, format!("[{section}] entry needs at least {n} fields, got {}", toks.len())))
    } else {
        Ok(())
    }
}

pub fn parse_inp(text: &str, flow_unit: FlowUnit) -> Result<ParsedNetwork, NetworkError> {
    let s = Scales::of(flow_unit);
    let mut warnings = Vec::new();
    let mut parts = NetworkParts::default();
    // Entity id -> line of definition, to turn entity locations into lines.
    let mut lines: HashMap<String, usize> = HashMap::new();
    let mut curve_points: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut demands: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    let mut bounds: Vec<(usize, String, f64, f64)> = Vec::new();
    let mut flow_limits: Vec<(usize, String, f64, f64)> = Vec::new();
    let mut statuses: Vec<(usize, String, LinkStatus)> = Vec::new();
    let mut section = String::new();
    let mut warned_patterns = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let name = content
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, format!("malformed section header '{content}'")))?;
            section = name[1..].trim().to_ascii_uppercase();
            match section.as_str() {
                "JUNCTIONS" | "RESERVOIRS" | "TANKS" | "PIPES" | "PUMPS" | "VALVES" | "CURVES" | "DEMANDS"
                | "STATUS" | "BOUNDS" | "FLOWLIMITS" | "REGIONS" | "INTEREST" | "PATTERNS" | "COORDINATES"
                | "OPTIONS" | "TITLE" | "END" => {}
                other => warnings.push(format!("line {line}: skipping unknown section [{other}]")),
            }
            continue;
        }
        let t: Vec<&str> = content.split_whitespace().collect();
        match section.as_str() {
            "JUNCTIONS" => {
                need(&t, 2, line, "JUNCTIONS")?;
                let elev = number(t[1], line, "elevation")? * s.length;
                let demand = match t.get(2) {
                    Some(d) => number(d, line, "demand")? * s.flow,
                    None => 0.0,
                };
                lines.insert(t[0].to_string(), line);
                parts.nodes.push(Node::junction(t[0], elev, demand));
            }
            "RESERVOIRS" => {
                need(&t, 2, line, "RESERVOIRS")?;
                lines.insert(t[0].to_string(), line);
                parts.nodes.push(Node::reservoir(t[0], number(t[1], line, "head")? * s.length));
            }
            "TANKS" => {
                need(&t, 6, line, "TANKS")?;
                let v: Vec<f64> = t[1..6]
                    .iter()
                    .zip(["elevation", "initial level", "min level", "max level", "diameter"])
                    .map(|(tok, what)| number(tok, line, what).map(|x| x * s.length))
                    .collect::<Result<_, _>>()?;
                lines.insert(t[0].to_string(), line);
                parts.nodes.push(Node::tank(t[0], v[0], v[1], v[2], v[3], v[4]));
            }
            "PIPES" => {
                need(&t, 6, line, "PIPES")?;
                let length = number(t[3], line, "length")? * s.length;
                let diameter = number(t[4], line, "diameter")? * s.pipe_diameter;
                let rough = number(t[5], line, "roughness")?;
                let mut link = Link::pipe(t[0], t[1], t[2], length, diameter, rough);
                if let Some(st) = t.get(7) {
                    link.status = parse_status(st, line)?;
                }
                lines.insert(t[0].to_string(), line);
                parts.links.push(link);
            }
            "PUMPS" => {
                need(&t, 3, line, "PUMPS")?;
                let mut link = Link::pump(t[0], t[1], t[2], "");
                let mut curve = None;
                let mut k = 3;
                while k < t.len() {
                    let key = t[k].to_ascii_uppercase();
                    let val = t.get(k + 1).ok_or_else(|| syntax(line, format!("pump keyword {key} has no value")))?;
                    match key.as_str() {
                        "HEAD" => curve = Some(val.to_string()),
                        "SPEED" => {
                            if let LinkKind::Pump { init_speed, .. } = &mut link.kind {
                                *init_speed = number(val, line, "speed")?;
                            }
                        }
                        "PATTERN" => warnings.push(format!("line {line}: pump speed pattern ignored")),
                        "POWER" => return Err(syntax(line, "constant-power pumps are not supported; use HEAD")),
                        other => return Err(syntax(line, format!("unknown pump keyword '{other}'"))),
                    }
                    k += 2;
                }
                let curve = curve.ok_or_else(|| syntax(line, "pump needs a HEAD curve"))?;
                if let LinkKind::Pump { curve: c, .. } = &mut link.kind {
                    *c = curve;
                }
                lines.insert(t[0].to_string(), line);
                parts.links.push(link);
            }
            "VALVES" => {
                need(&t, 6, line, "VALVES")?;
                if !t[4].eq_ignore_ascii_case("PBV") {
                    return Err(NetworkError::UnsupportedValve { at: Location::Line(line), kind: t[4].to_string() });
                }
                number(t[3], line, "diameter")?;
                let setting = number(t[5], line, "setting")?;
                lines.insert(t[0].to_string(), line);
                parts.links.push(Link::pbv(t[0], t[1], t[2], setting));
            }
            "CURVES" => {
                need(&t, 3, line, "CURVES")?;
                let q = number(t[1], line, "curve flow")? * s.flow;
                let h = number(t[2], line, "curve head")? * s.length;
                match curve_points.last_mut() {
                    Some((id, pts)) if id == t[0] => pts.push((q, h)),
                    _ => {
                        if curve_points.iter().any(|(id, _)| id == t[0]) {
                            return Err(syntax(line, format!("points of curve '{}' are not contiguous", t[0])));
                        }
                        lines.insert(t[0].to_string(), line);
                        curve_points.push((t[0].to_string(), vec![(q, h)]));
                    }
                }
            }
            "DEMANDS" => {
                need(&t, 2, line, "DEMANDS")?;
                let d = number(t[1], line, "demand")? * s.flow;
                let entry = demands.entry(t[0].to_string()).or_insert((line, 0.0));
                entry.1 += d;
            }
            "STATUS" => {
                need(&t, 2, line, "STATUS")?;
                statuses.push((line, t[0].to_string(), parse_status(t[1], line)?));
            }
            "BOUNDS" | "FLOWLIMITS" => {
                need(&t, 3, line, &section)?;
                let lo = number(t[1], line, "lower bound")?;
                let hi = number(t[2], line, "upper bound")?;
                if section == "BOUNDS" {
                    bounds.push((line, t[0].to_string(), lo, hi));
                } else {
                    flow_limits.push((line, t[0].to_string(), lo * s.flow, hi * s.flow));
                }
            }
            "REGIONS" => {
                need(&t, 2, line, "REGIONS")?;
                let r: u32 = t[1].parse().map_err(|_| syntax(line, format!("region id '{}' is not an integer", t[1])))?;
                if parts.regions.insert(t[0].to_string(), r).is_some() {
                    return Err(NetworkError::DuplicateId { at: Location::Line(line), id: t[0].to_string() });
                }
                lines.entry(t[0].to_string()).or_insert(line);
            }
            "INTEREST" => {
                for id in t {
                    lines.entry(id.to_string()).or_insert(line);
                    parts.interest_nodes.push(id.to_string());
                }
            }
            "PATTERNS" => {
                if !warned_patterns {
                    warnings.push(format!("line {line}: [PATTERNS] ignored; demand comes from the demand series"));
                    warned_patterns = true;
                }
            }
            "" => return Err(syntax(line, "data before the first section header")),
            _ => {}
        }
    }

    for (id, (line, d)) in demands {
        match parts.nodes.iter_mut().find(|n| n.id == id) {
            Some(Node { kind: NodeKind::Junction { base_demand, .. }, .. }) => *base_demand = d,
            _ => {
                return Err(NetworkError::DanglingReference { at: Location::Line(line), kind: "junction", id })
            }
        }
    }
    let mut link_pos: HashMap<String, usize> = HashMap::new();
    for (k, l) in parts.links.iter().enumerate() {
        link_pos.entry(l.id.clone()).or_insert(k);
    }
    let find_link = |line: usize, id: &str| {
        link_pos
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::DanglingReference { at: Location::Line(line), kind: "link", id: id.to_string() })
    };
    for (line, id, lo, hi) in bounds {
        let k = find_link(line, &id)?;
        match &mut parts.links[k].kind {
            LinkKind::Pump { speed_min, speed_max, .. } => (*speed_min, *speed_max) = (lo, hi),
            LinkKind::PbvValve { setting_min, setting_max, .. } => (*setting_min, *setting_max) = (lo, hi),
            LinkKind::Pipe { .. } => return Err(syntax(line, format!("bounds given for pipe '{id}'"))),
        }
    }
    for (line, id, lo, hi) in flow_limits {
        let k = find_link(line, &id)?;
        parts.links[k].flow_min = Some(lo);
        parts.links[k].flow_max = Some(hi);
    }
    for (line, id, st) in statuses {
        let k = find_link(line, &id)?;
        parts.links[k].status = st;
    }
    parts.curves = curve_points.into_iter().map(|(id, points)| Curve { id, points }).collect();

    let network = Network::new(parts, flow_unit).map_err(|e| match e.location() {
        Location::Entity(id) => match lines.get(id) {
            Some(&line) => e.relocate(Location::Line(line)),
            None => e,
        },
        Location::Line(_) => e,
    })?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParsedNetwork { network, warnings })
}

fn parse_status(tok: &str, line: usize) -> Result<LinkStatus, NetworkError> {
    match tok.to_ascii_uppercase().as_str() {
        "OPEN" => Ok(LinkStatus::Open),
        "CLOSED" => Ok(LinkStatus::Closed),
        other => Err(syntax(line, format!("unknown status '{other}'"))),
    }
}

/// Canonical writer for the subset read by [`parse_inp`], in the
/// network's own flow unit.
pub fn write_inp(net: &Network) -> String {
    let s = Scales::of(net.flow_unit());
    let mut out = String::new();
    let _ = writeln!(out, "[TITLE]\nflow units {}\n", net.flow_unit().token());
    let sections: [(&str, &str); 3] = [
        ("JUNCTIONS", ";id elevation demand"),
        ("RESERVOIRS", ";id head"),
        ("TANKS", ";id elevation init min max diameter"),
    ];
    for (name, header) in sections {
        let _ = writeln!(out, "[{name}]\n{header}");
        for n in net.nodes() {
            match (name, &n.kind) {
                ("JUNCTIONS", NodeKind::Junction { elevation, base_demand }) => {
                    let _ = writeln!(out, "{} {} {}", n.id, elevation / s.length, base_demand / s.flow);
                }
                ("RESERVOIRS", NodeKind::Reservoir { head }) => {
                    let _ = writeln!(out, "{} {}", n.id, head / s.length);
                }
                (
                    "TANKS",
                    NodeKind::Tank { elevation, min_level, max_level, init_level, diameter },
                ) => {
                    let _ = writeln!(
                        out,
                        "{} {} {} {} {} {}",
                        n.id,
                        elevation / s.length,
                        init_level / s.length,
                        min_level / s.length,
                        max_level / s.length,
                        diameter / s.length
                    );
                }
                _ => {}
            }
        }
        out.push('\n');
    }

    let _ = writeln!(out, "[PIPES]\n;id from to length diameter roughness");
    for l in net.links() {
        if let LinkKind::Pipe { length, diameter, roughness } = l.kind {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                l.id,
                l.from,
                l.to,
                length / s.length,
                diameter / s.pipe_diameter,
                roughness
            );
        }
    }
    let _ = writeln!(out, "\n[PUMPS]\n;id from to HEAD curve SPEED speed");
    for l in net.links() {
        if let LinkKind::Pump { curve, init_speed, .. } = &l.kind {
            let _ = writeln!(out, "{} {} {} HEAD {} SPEED {}", l.id, l.from, l.to, curve, init_speed);
        }
    }
    let _ = writeln!(out, "\n[VALVES]\n;id from to diameter type setting(psi)");
    for l in net.links() {
        if let LinkKind::PbvValve { init_setting, .. } = l.kind {
            let _ = writeln!(out, "{} {} {} 0 PBV {}", l.id, l.from, l.to, init_setting);
        }
    }
    let _ = writeln!(out, "\n[CURVES]\n;id flow head");
    for c in net.curves() {
        for (q, h) in &c.points {
            let _ = writeln!(out, "{} {} {}", c.id, q / s.flow, h / s.length);
        }
    }
    let _ = writeln!(out, "\n[STATUS]");
    for l in net.links().iter().filter(|l| l.status == LinkStatus::Closed) {
        let _ = writeln!(out, "{} CLOSED", l.id);
    }
    let _ = writeln!(out, "\n[BOUNDS]");
    for l in net.links() {
        if let Some((lo, hi)) = l.control_bounds() {
            let _ = writeln!(out, "{} {} {}", l.id, lo, hi);
        }
    }
    let _ = writeln!(out, "\n[FLOWLIMITS]");
    for l in net.links() {
        if let (Some(lo), Some(hi)) = (l.flow_min, l.flow_max) {
            let _ = writeln!(out, "{} {} {}", l.id, lo / s.flow, hi / s.flow);
        }
    }
    let _ = writeln!(out, "\n[REGIONS]");
    for n in net.nodes() {
        if let Some(r) = net.region_of(&n.id) {
            let _ = writeln!(out, "{} {}", n.id, r);
        }
    }
    let _ = writeln!(out, "\n[INTEREST]");
    for id in net.interest_nodes() {
        let _ = writeln!(out, "{id}");
    }
    out.push_str("\n[END]\n");
    out
}
