use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use wdn_core::network::*;

fn reachable_from_fixed(net: &Network) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = net.nodes().iter().filter(|n| n.is_fixed_head()).map(|n| n.id.clone()).collect();
    let mut queue: VecDeque<String> = seen.iter().cloned().collect();
    while let Some(id) = queue.pop_front() {
        for l in net.links().iter().filter(|l| l.status == LinkStatus::Open) {
            for (a, b) in [(&l.from, &l.to), (&l.to, &l.from)] {
                if *a == id && seen.insert(b.clone()) {
                    queue.push_back(b.clone());
                }
            }
        }
    }
    seen
}

#[test]
fn mininet_shape() {
    let net = build_mininet();
    assert_eq!(net.nodes().len(), 10);
    let count = |f: fn(&Node) -> bool| net.nodes().iter().filter(|n| f(n)).count();
    assert_eq!(count(|n| matches!(n.kind, NodeKind::Reservoir { .. })), 1);
    assert_eq!(count(Node::is_tank), 1);
    assert_eq!(count(Node::is_junction), 8);
    assert_eq!(net.links().iter().filter(|l| l.is_pump()).count(), 2);
    assert_eq!(net.links().iter().filter(|l| l.is_valve()).count(), 1);
    assert_eq!(net.links().iter().filter(|l| matches!(l.kind, LinkKind::Pipe { .. })).count(), 10);
    assert_eq!(net.num_regions(), 2);
    assert_eq!(net.interest_nodes().len(), 4);
    for r in 1..=2 {
        let in_region = net.interest_nodes().iter().filter(|id| net.region_of(id) == Some(r)).count();
        assert_eq!(in_region, 2);
    }
}

#[test]
fn mininet_junctions_reach_the_reservoir() {
    let net = build_mininet();
    let seen = reachable_from_fixed(&net);
    for n in net.nodes().iter().filter(|n| n.is_junction()) {
        assert!(seen.contains(&n.id), "{} unreachable", n.id);
    }
}

#[test]
fn mininet_control_bounds() {
    let net = build_mininet();
    for l in net.links() {
        match l.kind {
            LinkKind::Pump { speed_min, speed_max, init_speed, .. } => {
                assert_eq!((speed_min, speed_max, init_speed), (0.3, 3.0, 1.0));
            }
            LinkKind::PbvValve { setting_min, setting_max, init_setting } => {
                assert_eq!((setting_min, setting_max, init_setting), (8.0, 50.0, 20.0));
            }
            LinkKind::Pipe { .. } => {}
        }
    }
    // one source pump for the policy, the tank pump left to the rule
    assert_eq!(net.controllable_pumps().len(), 1);
    assert_eq!(net.tank_pumps().len(), 1);
}

#[test]
fn mininet_is_deterministic() {
    assert_eq!(write_inp(&build_mininet()), write_inp(&build_mininet()));
}

fn by_id<T: Clone>(items: &[T], id: impl Fn(&T) -> &str) -> BTreeMap<String, T> {
    items.iter().map(|x| (id(x).to_string(), x.clone())).collect()
}

// The writer groups entities by section, so compare them keyed by id.
fn assert_same(a: &Network, b: &Network) {
    assert_eq!(by_id(a.nodes(), |n| &n.id), by_id(b.nodes(), |n| &n.id));
    assert_eq!(by_id(a.links(), |l| &l.id), by_id(b.links(), |l| &l.id));
    assert_eq!(a.curves(), b.curves());
    assert_eq!(a.regions(), b.regions());
    assert_eq!(a.interest_nodes(), b.interest_nodes());
    assert_eq!(a.flow_unit(), b.flow_unit());
}

#[test]
fn mininet_round_trips() {
    let net = build_mininet();
    let parsed = parse_inp(&write_inp(&net), FlowUnit::CubicMetersPerSecond).unwrap();
    assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
    assert_same(&net, &parsed.network);
}

#[derive(Debug, Clone)]
struct Spec {
    elevations: Vec<f64>,
    demands: Vec<f64>,
    pipe: Vec<(f64, f64, f64)>,
    head: f64,
    tank: Option<(f64, f64, f64, f64)>,
    pump_curve: Option<(f64, f64, f64)>,
    valve: Option<f64>,
    closed: Option<usize>,
    regions: u32,
}

fn spec() -> impl Strategy<Value = Spec> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..80.0, n),
            prop::collection::vec(0.0f64..0.05, n),
            prop::collection::vec((1.0f64..2000.0, 0.05f64..1.0, 60.0f64..150.0), n),
            0.0f64..200.0,
            prop::option::of((0.0f64..50.0, 0.0f64..3.0, 0.0f64..5.0, 1.0f64..30.0)),
            prop::option::of((50.0f64..200.0, 0.01f64..0.5, 0.1f64..0.9)),
            prop::option::of(8.0f64..50.0),
            prop::option::of(0..n),
            1u32..4,
        )
            .prop_map(|(elevations, demands, pipe, head, tank, pump_curve, valve, closed, regions)| Spec {
                elevations,
                demands,
                pipe,
                head,
                tank,
                pump_curve,
                valve,
                closed,
                regions,
            })
    })
}

fn build(s: &Spec) -> Network {
    let n = s.elevations.len();
    let mut nodes = vec![Node::reservoir("R", s.head)];
    let mut links = Vec::new();
    let mut curves = Vec::new();
    for i in 0..n {
        nodes.push(Node::junction(&format!("J{i}"), s.elevations[i], s.demands[i]));
        let from = if i == 0 { "R".to_string() } else { format!("J{}", i - 1) };
        let (len, d, c) = s.pipe[i];
        links.push(Link::pipe(&format!("P{i}"), &from, &format!("J{i}"), len, d, c));
    }
    if let Some((elev, min, span, diam)) = s.tank {
        nodes.push(Node::tank("T", elev, min + span / 2.0, min, min + span, diam));
        links.push(Link::pipe("PT", "J0", "T", 100.0, 0.2, 120.0));
    }
    if let Some((h0, q2, frac)) = s.pump_curve {
        curves.push(Curve { id: "C1".into(), points: vec![(0.0, h0), (q2, h0 * frac), (2.0 * q2, h0 * frac * frac)] });
        links.push(Link::pump("PU", "R", &format!("J{}", n - 1), "C1"));
    }
    if let Some(setting) = s.valve {
        links.push(Link::pbv("V", "J0", &format!("J{}", n - 1), setting));
    }
    if let Some(k) = s.closed {
        links[k].status = LinkStatus::Closed;
    }
    let k = (s.regions as usize).min(n);
    let regions: BTreeMap<String, u32> = (0..n).map(|i| (format!("J{i}"), 1 + (i % k) as u32)).collect();
    let interest_nodes = (0..n).step_by(2).map(|i| format!("J{i}")).collect();
    Network::new(NetworkParts { nodes, links, curves, regions, interest_nodes }, FlowUnit::CubicMetersPerSecond)
        .expect("generated network is valid")
}

proptest! {
    #[test]
    fn write_then_parse_reproduces_network(s in spec()) {
        let net = build(&s);
        let text = write_inp(&net);
        let parsed = parse_inp(&text, FlowUnit::CubicMetersPerSecond).unwrap();
        assert_same(&net, &parsed.network);
    }

    #[test]
    fn gpm_round_trip_is_close(s in spec()) {
        let net = build(&s);
        let gpm = Network::new(net.to_parts(), FlowUnit::GallonsPerMinute).unwrap();
        let parsed = parse_inp(&write_inp(&gpm), FlowUnit::GallonsPerMinute).unwrap().network;
        for a in gpm.nodes() {
            let b = parsed.node(&a.id).unwrap();
            prop_assert!((a.elevation() - b.elevation()).abs() <= 1e-9 * a.elevation().abs().max(1.0));
        }
        prop_assert_eq!(gpm.links().len(), parsed.links().len());
    }
}
