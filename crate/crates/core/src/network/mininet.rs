//! A ten-node benchmark network small enough for fast training runs.
//!
//! ```text
//!            P1        P2
//!   R1 -PU1- J1 ---- J2 ---- J3 =V1=> J5 ---- J6 ---- J7
//!            |       |       |        |  P5   |  P6   |
//!         P3 |   P10 |    P4 |     P7 |    P9 |    P8 |
//!            J4 -----+-------+        J8 -----+-------+
//!            |                                |
//!            +-------- PU2 --------> T1 ------+
//! ```
//!
//! Region 1 (J1-J4) and region 2 (J5-J8) are joined only through the PBV
//! V1. PU1 lifts water from the reservoir; PU2 fills the tank, which
//! drains into region 2 through P9. The pumps use linear three-point curves
//! of the same shape, the fill pump at about a sixth of the source flow.
//! Interest nodes: J2, J4, J6, J8.

use std::collections::BTreeMap;

use super::{Curve, FlowUnit, Link, Network, NetworkParts, Node};

pub const MININET_RESERVOIR_HEAD: f64 = 50.0;
/// Source booster curve (m³/s, m): heads at 1.0, 0.6 and 0.2 of shutoff
/// at zero, half and full flow.
pub const MININET_SOURCE_CURVE: [(f64, f64); 3] = [(0.0, 15.0), (0.05, 9.0), (0.1, 3.0)];
/// Same shape with about a sixth of the flow, for the tank-fill pump.
pub const MININET_FILL_CURVE: [(f64, f64); 3] = [(0.0, 15.0), (0.008, 9.0), (0.016, 3.0)];
pub const MININET_BASE_DEMAND: f64 = 0.0027;

pub fn build_mininet() -> Network {
    let j = |id: &str, elev: f64| Node::junction(id, elev, MININET_BASE_DEMAND);
    let nodes = vec![
        Node::reservoir("R1", MININET_RESERVOIR_HEAD),
        Node::tank("T1", 38.0, 5.0, 1.0, 9.0, 8.7),
        j("J1", 12.0),
        j("J2", 14.0),
        j("J3", 15.0),
        j("J4", 13.0),
        j("J5", 2.0),
        j("J6", 4.0),
        j("J7", 3.0),
        j("J8", 1.0),
    ];
    let links = vec![
        Link::pump("PU1", "R1", "J1", "C1"),
        Link::pipe("P1", "J1", "J2", 400.0, 0.13, 120.0),
        Link::pipe("P2", "J2", "J3", 500.0, 0.13, 120.0),
        Link::pipe("P3", "J1", "J4", 450.0, 0.13, 120.0),
        Link::pipe("P4", "J4", "J3", 600.0, 0.1, 110.0),
        Link::pipe("P10", "J2", "J4", 300.0, 0.1, 110.0),
        Link::pbv("V1", "J3", "J5", 20.0),
        Link::pipe("P5", "J5", "J6", 400.0, 0.13, 120.0),
        Link::pipe("P6", "J6", "J7", 500.0, 0.1, 110.0),
        Link::pipe("P7", "J5", "J8", 450.0, 0.13, 120.0),
        Link::pipe("P8", "J8", "J7", 550.0, 0.1, 110.0),
        Link::pipe("P9", "T1", "J6", 300.0, 0.13, 120.0),
        Link::pump("PU2", "J4", "T1", "C2"),
    ];
    let curves = vec![
        Curve { id: "C1".into(), points: MININET_SOURCE_CURVE.to_vec() },
        Curve { id: "C2".into(), points: MININET_FILL_CURVE.to_vec() },
    ];
    let regions: BTreeMap<String, u32> = (1..=8).map(|k| (format!("J{k}"), if k <= 4 { 1 } else { 2 })).collect();
    let interest_nodes = ["J2", "J4", "J6", "J8"].iter().map(|s| s.to_string()).collect();
    Network::new(NetworkParts { nodes, links, curves, regions, interest_nodes }, FlowUnit::CubicMetersPerSecond)
        .expect("built-in network is valid")
}
