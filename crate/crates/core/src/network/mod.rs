//! Network data model: nodes, links, curves and the region/interest-node
//! metadata used by the demand and control layers.
//!
//! All quantities are stored in SI units (m, m³/s). Pump curves are stored
//! after conversion; PBV settings are kept in psi.

mod inp;
mod mininet;

pub use inp::{parse_inp, write_inp, ParsedNetwork};
pub use mininet::build_mininet;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::pump::{PumpCurveError, PumpModel};

pub const DEFAULT_SPEED_MIN: f64 = 0.3;
pub const DEFAULT_SPEED_MAX: f64 = 3.0;
pub const DEFAULT_SPEED: f64 = 1.0;
pub const DEFAULT_SETTING_MIN_PSI: f64 = 8.0;
pub const DEFAULT_SETTING_MAX_PSI: f64 = 50.0;
pub const DEFAULT_SETTING_PSI: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowUnit {
    CubicMetersPerSecond,
    GallonsPerMinute,
}

impl FlowUnit {
    pub fn token(self) -> &'static str {
        match self {
            FlowUnit::CubicMetersPerSecond => "CMS",
            FlowUnit::GallonsPerMinute => "GPM",
        }
    }
}

impl std::str::FromStr for FlowUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CMS" => Ok(FlowUnit::CubicMetersPerSecond),
            "GPM" => Ok(FlowUnit::GallonsPerMinute),
            other => Err(format!("unknown flow unit '{other}' (expected CMS or GPM)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Junction {
        elevation: f64,
        base_demand: f64,
    },
    Reservoir {
        head: f64,
    },
    Tank {
        elevation: f64,
        min_level: f64,
        max_level: f64,
        init_level: f64,
        diameter: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn junction(id: &str, elevation: f64, base_demand: f64) -> Self {
        Node { id: id.to_string(), kind: NodeKind::Junction { elevation, base_demand } }
    }

    pub fn reservoir(id: &str, head: f64) -> Self {
        Node { id: id.to_string(), kind: NodeKind::Reservoir { head } }
    }

    pub fn tank(
        id: &str,
        elevation: f64,
        init_level: f64,
        min_level: f64,
        max_level: f64,
        diameter: f64,
    ) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Tank { elevation, min_level, max_level, init_level, diameter },
        }
    }

    pub fn is_junction(&self) -> bool {
        matches!(self.kind, NodeKind::Junction { .. })
    }

    pub fn is_tank(&self) -> bool {
        matches!(self.kind, NodeKind::Tank { .. })
    }

    pub fn is_fixed_head(&self) -> bool {
        !self.is_junction()
    }

    /// Elevation of the node; reservoirs report their fixed head.
    pub fn elevation(&self) -> f64 {
        match self.kind {
            NodeKind::Junction { elevation, .. } | NodeKind::Tank { elevation, .. } => elevation,
            NodeKind::Reservoir { head } => head,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinkKind {
    Pipe {
        length: f64,
        diameter: f64,
        roughness: f64,
    },
    Pump {
        curve: String,
        init_speed: f64,
        speed_min: f64,
        speed_max: f64,
    },
    PbvValve {
        /// Pressure drop, psi.
        init_setting: f64,
        setting_min: f64,
        setting_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: LinkKind,
    pub status: LinkStatus,
    /// Optional flow limits (m³/s), only used by the training penalty.
    pub flow_min: Option<f64>,
    pub flow_max: Option<f64>,
}

impl Link {
    pub fn pipe(id: &str, from: &str, to: &str, length: f64, diameter: f64, roughness: f64) -> Self {
        Link::new(id, from, to, LinkKind::Pipe { length, diameter, roughness })
    }

    pub fn pump(id: &str, from: &str, to: &str, curve: &str) -> Self {
        Link::new(
            id,
            from,
            to,
            LinkKind::Pump {
                curve: curve.to_string(),
                init_speed: DEFAULT_SPEED,
                speed_min: DEFAULT_SPEED_MIN,
                speed_max: DEFAULT_SPEED_MAX,
            },
        )
    }

    pub fn pbv(id: &str, from: &str, to: &str, init_setting: f64) -> Self {
        Link::new(
            id,
            from,
            to,
            LinkKind::PbvValve {
                init_setting,
                setting_min: DEFAULT_SETTING_MIN_PSI,
                setting_max: DEFAULT_SETTING_MAX_PSI,
            },
        )
    }

    fn new(id: &str, from: &str, to: &str, kind: LinkKind) -> Self {
        Link {
            id: id.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            kind,
            status: LinkStatus::Open,
            flow_min: None,
            flow_max: None,
        }
    }

    pub fn is_pump(&self) -> bool {
        matches!(self.kind, LinkKind::Pump { .. })
    }

    pub fn is_valve(&self) -> bool {
        matches!(self.kind, LinkKind::PbvValve { .. })
    }

    /// Control range of a pump (speed) or valve (psi).
    pub fn control_bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            LinkKind::Pump { speed_min, speed_max, .. } => Some((speed_min, speed_max)),
            LinkKind::PbvValve { setting_min, setting_max, .. } => Some((setting_min, setting_max)),
            LinkKind::Pipe { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: String,
    /// (flow m³/s, head m), flow strictly increasing.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Entity(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Entity(id) => write!(f, "'{id}'"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("{at}: syntax error: {msg}")]
    Syntax { at: Location, msg: String },
    #[error("{at}: reference to undefined {kind} '{id}'")]
    DanglingReference { at: Location, kind: &'static str, id: String },
    #[error("{at}: duplicate id '{id}'")]
    DuplicateId { at: Location, id: String },
    #[error("{at}: unsupported valve type '{kind}' (only PBV is supported)")]
    UnsupportedValve { at: Location, kind: String },
    #[error("{at}: {msg}")]
    Invalid { at: Location, msg: String },
}

impl NetworkError {
    pub fn location(&self) -> &Location {
        match self {
            NetworkError::Syntax { at, .. }
            | NetworkError::DanglingReference { at, .. }
            | NetworkError::DuplicateId { at, .. }
            | NetworkError::UnsupportedValve { at, .. }
            | NetworkError::Invalid { at, .. } => at,
        }
    }

    fn relocate(self, at: Location) -> Self {
        match self {
            NetworkError::Syntax { msg, .. } => NetworkError::Syntax { at, msg },
            NetworkError::DanglingReference { kind, id, .. } => {
                NetworkError::DanglingReference { at, kind, id }
            }
            NetworkError::DuplicateId { id, .. } => NetworkError::DuplicateId { at, id },
            NetworkError::UnsupportedValve { kind, .. } => NetworkError::UnsupportedValve { at, kind },
            NetworkError::Invalid { msg, .. } => NetworkError::Invalid { at, msg },
        }
    }
}

fn invalid(id: &str, msg: impl Into<String>) -> NetworkError {
    NetworkError::Invalid { at: Location::Entity(id.to_string()), msg: msg.into() }
}

/// Immutable, validated network.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    curves: Vec<Curve>,
    flow_unit: FlowUnit,
    regions: BTreeMap<String, u32>,
    interest_nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    endpoints: Vec<(usize, usize)>,
    pump_models: Vec<Option<PumpModel>>,
    junctions: Vec<usize>,
}

/// Unvalidated network parts, consumed by [`Network::new`].
#[derive(Debug, Clone, Default)]
pub struct NetworkParts {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub curves: Vec<Curve>,
    pub regions: BTreeMap<String, u32>,
    pub interest_nodes: Vec<String>,
}

impl Network {
    pub fn new(parts: NetworkParts, flow_unit: FlowUnit) -> Result<Self, NetworkError> {
        let NetworkParts { nodes, links, curves, regions, interest_nodes } = parts;

        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId { at: Location::Entity(n.id.clone()), id: n.id.clone() });
            }
            validate_node(n)?;
        }
        let mut curve_index = HashMap::with_capacity(curves.len());
        for (i, c) in curves.iter().enumerate() {
            if curve_index.insert(c.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId { at: Location::Entity(c.id.clone()), id: c.id.clone() });
            }
            validate_curve(c)?;
        }

        let mut link_index = HashMap::with_capacity(links.len());
        let mut endpoints = Vec::with_capacity(links.len());
        let mut pump_models = Vec::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId { at: Location::Entity(l.id.clone()), id: l.id.clone() });
            }
            let lookup = |id: &str| {
                node_index.get(id).copied().ok_or_else(|| NetworkError::DanglingReference {
                    at: Location::Entity(l.id.clone()),
                    kind: "node",
                    id: id.to_string(),
                })
            };
            let from = lookup(&l.from)?;
            let to = lookup(&l.to)?;
            if from == to {
                return Err(invalid(&l.id, "link connects a node to itself"));
            }
            endpoints.push((from, to));
            let model = validate_link(l, &curves, &curve_index)?;
            pump_models.push(model);
        }

        let junctions: Vec<usize> =
            nodes.iter().enumerate().filter(|(_, n)| n.is_junction()).map(|(i, _)| i).collect();

        let regions = if regions.is_empty() {
            junctions.iter().map(|&j| (nodes[j].id.clone(), 1)).collect()
        } else {
            regions
        };
        for id in regions.keys() {
            match node_index.get(id) {
                None => {
                    return Err(NetworkError::DanglingReference {
                        at: Location::Entity(id.clone()),
                        kind: "node",
                        id: id.clone(),
                    })
                }
                Some(&i) if !nodes[i].is_junction() => {
                    return Err(invalid(id, "regions may only be assigned to junctions"))
                }
                _ => {}
            }
        }
        for &j in &junctions {
            if !regions.contains_key(&nodes[j].id) {
                return Err(invalid(&nodes[j].id, "junction has no region assignment"));
            }
        }
        let mut region_ids: Vec<u32> = regions.values().copied().collect();
        region_ids.sort_unstable();
        region_ids.dedup();
        if region_ids.iter().enumerate().any(|(k, &r)| r as usize != k + 1) {
            return Err(invalid("REGIONS", format!("region ids must be contiguous from 1, got {region_ids:?}")));
        }

        let interest_nodes = if interest_nodes.is_empty() {
            junctions.iter().map(|&j| nodes[j].id.clone()).collect()
        } else {
            interest_nodes
        };
        for id in &interest_nodes {
            match node_index.get(id) {
                Some(&i) if nodes[i].is_junction() => {}
                Some(_) => return Err(invalid(id, "interest node must be a junction")),
                None => {
                    return Err(NetworkError::DanglingReference {
                        at: Location::Entity(id.clone()),
                        kind: "node",
                        id: id.clone(),
                    })
                }
            }
        }

        Ok(Network {
            nodes,
            links,
            curves,
            flow_unit,
            regions,
            interest_nodes,
            node_index,
            link_index,
            endpoints,
            pump_models,
            junctions,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn flow_unit(&self) -> FlowUnit {
        self.flow_unit
    }

    pub fn regions(&self) -> &BTreeMap<String, u32> {
        &self.regions
    }

    pub fn interest_nodes(&self) -> &[String] {
        &self.interest_nodes
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.link_index.get(id).map(|&i| &self.links[i])
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    /// (from, to) node indices of a link.
    pub fn endpoints(&self, link: usize) -> (usize, usize) {
        self.endpoints[link]
    }

    pub fn pump_model(&self, link: usize) -> Option<&PumpModel> {
        self.pump_models[link].as_ref()
    }

    /// Indices of junction nodes in declaration order.
    pub fn junction_indices(&self) -> &[usize] {
        &self.junctions
    }

    pub fn num_regions(&self) -> usize {
        self.regions.values().copied().max().unwrap_or(0) as usize
    }

    pub fn region_of(&self, node_id: &str) -> Option<u32> {
        self.regions.get(node_id).copied()
    }

    /// Junction indices of a region, in declaration order.
    pub fn region_junctions(&self, region: u32) -> Vec<usize> {
        self.junctions
            .iter()
            .copied()
            .filter(|&j| self.regions.get(&self.nodes[j].id) == Some(&region))
            .collect()
    }

    /// Pumps with a tank at either end. Their on/off state is delegated to
    /// the rule logic.
    pub fn is_tank_pump(&self, link: usize) -> bool {
        let (a, b) = self.endpoints[link];
        self.links[link].is_pump() && (self.nodes[a].is_tank() || self.nodes[b].is_tank())
    }

    /// Pump link indices whose speed the neural policy controls, sorted by id.
    pub fn controllable_pumps(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.links.len())
            .filter(|&k| self.links[k].is_pump() && !self.is_tank_pump(k))
            .collect();
        v.sort_by(|&a, &b| self.links[a].id.cmp(&self.links[b].id));
        v
    }

    pub fn tank_pumps(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.links.len()).filter(|&k| self.is_tank_pump(k)).collect();
        v.sort_by(|&a, &b| self.links[a].id.cmp(&self.links[b].id));
        v
    }

    /// PBV link indices sorted by id.
    pub fn valves(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.links.len()).filter(|&k| self.links[k].is_valve()).collect();
        v.sort_by(|&a, &b| self.links[a].id.cmp(&self.links[b].id));
        v
    }

    pub fn tanks(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_tank()).collect()
    }

    /// Initial tank levels keyed by node index.
    pub fn initial_tank_levels(&self) -> BTreeMap<usize, f64> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.kind {
                NodeKind::Tank { init_level, .. } => Some((i, init_level)),
                _ => None,
            })
            .collect()
    }

    /// Rebuilds the network from its parts, e.g. after editing a copy.
    pub fn to_parts(&self) -> NetworkParts {
        NetworkParts {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
            curves: self.curves.clone(),
            regions: self.regions.clone(),
            interest_nodes: self.interest_nodes.clone(),
        }
    }
}

fn finite(id: &str, name: &str, v: f64) -> Result<(), NetworkError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(id, format!("{name} must be finite")))
    }
}

fn validate_node(n: &Node) -> Result<(), NetworkError> {
    match n.kind {
        NodeKind::Junction { elevation, base_demand } => {
            finite(&n.id, "elevation", elevation)?;
            finite(&n.id, "base demand", base_demand)?;
            if base_demand < 0.0 {
                return Err(invalid(&n.id, "base demand must be >= 0"));
            }
        }
        NodeKind::Reservoir { head } => finite(&n.id, "head", head)?,
        NodeKind::Tank { elevation, min_level, max_level, init_level, diameter } => {
            for (name, v) in [
                ("elevation", elevation),
                ("min level", min_level),
                ("max level", max_level),
                ("initial level", init_level),
                ("diameter", diameter),
            ] {
                finite(&n.id, name, v)?;
            }
            if !(0.0 <= min_level && min_level <= init_level && init_level <= max_level) {
                return Err(invalid(&n.id, "tank levels must satisfy 0 <= min <= init <= max"));
            }
            if diameter <= 0.0 {
                return Err(invalid(&n.id, "tank diameter must be > 0"));
            }
        }
    }
    Ok(())
}

fn validate_curve(c: &Curve) -> Result<(), NetworkError> {
    if c.points.is_empty() {
        return Err(invalid(&c.id, "curve has no points"));
    }
    for w in c.points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(invalid(&c.id, "curve flows must be strictly increasing"));
        }
    }
    if c.points.iter().any(|&(q, h)| !q.is_finite() || !h.is_finite() || h < 0.0) {
        return Err(invalid(&c.id, "curve points must be finite with heads >= 0"));
    }
    Ok(())
}

fn validate_link(
    l: &Link,
    curves: &[Curve],
    curve_index: &HashMap<String, usize>,
) -> Result<Option<PumpModel>, NetworkError> {
    match &l.kind {
        LinkKind::Pipe { length, diameter, roughness } => {
            if !(*length > 0.0 && *diameter > 0.0 && *roughness > 0.0) {
                return Err(invalid(&l.id, "pipe length, diameter and roughness must be > 0"));
            }
            Ok(None)
        }
        LinkKind::Pump { curve, init_speed, speed_min, speed_max } => {
            if !(*speed_min > 0.0 && speed_min < speed_max) {
                return Err(invalid(&l.id, "pump speed bounds must satisfy 0 < min < max"));
            }
            if !(speed_min <= init_speed && init_speed <= speed_max) {
                return Err(invalid(&l.id, "pump initial speed outside its bounds"));
            }
            let ci = curve_index.get(curve).ok_or_else(|| NetworkError::DanglingReference {
                at: Location::Entity(l.id.clone()),
                kind: "curve",
                id: curve.clone(),
            })?;
            PumpModel::from_curve(&curves[*ci].points)
                .map(Some)
                .map_err(|e: PumpCurveError| invalid(&l.id, format!("pump curve '{curve}': {e}")))
        }
        LinkKind::PbvValve { init_setting, setting_min, setting_max } => {
            if !(*setting_min >= 0.0 && setting_min < setting_max) {
                return Err(invalid(&l.id, "valve setting bounds must satisfy 0 <= min < max"));
            }
            if !(setting_min <= init_setting && init_setting <= setting_max) {
                return Err(invalid(&l.id, "valve initial setting outside its bounds"));
            }
            Ok(None)
        }
    }
}
