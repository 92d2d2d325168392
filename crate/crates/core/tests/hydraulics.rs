use std::collections::BTreeMap;

use approx::assert_relative_eq;
use proptest::prelude::*;
use wdn_core::controller::{ControlAction, RuleConfig, RuleController};
use wdn_core::demand::{generate_dataset, region_levels, GeneratorConfig};
use wdn_core::forecast::{ForecastContext, OracleForecaster};
use wdn_core::hydraulics::*;
use wdn_core::network::*;
use wdn_core::units::head_m_to_psi;

fn build(nodes: Vec<Node>, links: Vec<Link>, curves: Vec<Curve>) -> Network {
    let regions = nodes
        .iter()
        .filter(|n| n.is_junction())
        .map(|n| (n.id.clone(), 1))
        .collect();
    Network::new(NetworkParts { nodes, links, curves, regions, interest_nodes: vec![] }, FlowUnit::CubicMetersPerSecond)
        .unwrap()
}

fn single_pipe(demand: f64) -> (Network, Vec<f64>) {
    let net = build(
        vec![Node::reservoir("R", 50.0), Node::junction("J", 0.0, demand)],
        vec![Link::pipe("P", "R", "J", 1000.0, 0.3, 100.0)],
        vec![],
    );
    (net, vec![0.0, demand])
}

fn solve(net: &Network, demands: &[f64]) -> HydraulicState {
    solve_snapshot(net, demands, &ControlAction::initial(net), &net.initial_tank_levels(), &PdaParams::default()).unwrap()
}

fn mininet_demands(net: &Network, scale: f64) -> Vec<f64> {
    net.nodes()
        .iter()
        .map(|n| match n.kind {
            NodeKind::Junction { base_demand, .. } => base_demand * scale,
            _ => 0.0,
        })
        .collect()
}

#[test]
fn single_pipe_matches_hand_hazen_williams() {
    let (net, d) = single_pipe(0.05);
    let start = std::time::Instant::now();
    let s = solve(&net, &d);
    let elapsed = start.elapsed();
    let oracle = 50.0 - 10.667 * 100f64.powf(-1.852) * 0.3f64.powf(-4.871) * 1000.0 * 0.05f64.powf(1.852);
    assert!((oracle - 47.11).abs() < 0.01);
    assert!(s.converged);
    assert!((s.heads[1] - oracle).abs() < 1e-3, "head {} vs {oracle}", s.heads[1]);
    assert_relative_eq!(s.flows[0], 0.05, max_relative = 1e-6);
    assert!(elapsed.as_millis() < 10, "took {elapsed:?}");
}

#[test]
fn parallel_pipes_split_evenly() {
    let net = build(
        vec![Node::reservoir("R", 50.0), Node::junction("J", 0.0, 0.05)],
        vec![Link::pipe("A", "R", "J", 1000.0, 0.3, 100.0), Link::pipe("B", "R", "J", 1000.0, 0.3, 100.0)],
        vec![],
    );
    let s = solve(&net, &[0.0, 0.05]);
    assert!(s.converged);
    assert_relative_eq!(s.flows[0], s.delivered[1] / 2.0, max_relative = 1e-6);
    assert_relative_eq!(s.flows[1], s.delivered[1] / 2.0, max_relative = 1e-6);
}

#[test]
fn zero_demand_gives_static_heads() {
    let net = build(
        vec![Node::reservoir("R", 50.0), Node::junction("A", 3.0, 0.0), Node::junction("B", 7.0, 0.0)],
        vec![Link::pipe("P1", "R", "A", 500.0, 0.2, 120.0), Link::pipe("P2", "A", "B", 500.0, 0.2, 120.0)],
        vec![],
    );
    let s = solve(&net, &[0.0; 3]);
    assert!(s.converged, "{s:?}");
    for q in &s.flows {
        assert!(q.abs() < 1e-9);
    }
    for h in &s.heads {
        assert!((h - 50.0).abs() < 1e-9, "{s:?}");
    }
    assert_relative_eq!(s.pressures[2], head_m_to_psi(43.0), max_relative = 1e-9);
}

#[test]
fn junction_head_falls_with_demand() {
    let mut last = f64::INFINITY;
    for d in [0.0, 0.01, 0.02, 0.04, 0.08] {
        let (net, demands) = single_pipe(d);
        let h = solve(&net, &demands).heads[1];
        assert!(h < last || d == 0.0);
        last = h;
    }
}

#[test]
fn faster_pump_does_not_lower_downstream_head() {
    let net = build(
        vec![Node::reservoir("R", 10.0), Node::junction("A", 0.0, 0.0), Node::junction("B", 0.0, 0.02)],
        vec![Link::pump("PU", "R", "A", "C"), Link::pipe("P", "A", "B", 800.0, 0.2, 110.0)],
        vec![Curve { id: "C".into(), points: vec![(0.0, 40.0), (0.05, 30.0), (0.1, 10.0)] }],
    );
    let mut last = f64::NEG_INFINITY;
    for speed in [0.3, 0.6, 1.0, 1.5, 2.0, 3.0] {
        let mut action = ControlAction::initial(&net);
        action.pump_speed.insert("PU".into(), speed);
        let s = solve_snapshot(&net, &[0.0, 0.0, 0.02], &action, &BTreeMap::new(), &PdaParams::default()).unwrap();
        assert!(s.converged);
        assert!(s.heads[2] >= last - 1e-12, "speed {speed}: {} < {last}", s.heads[2]);
        last = s.heads[2];
    }
}

#[test]
fn pump_power_example() {
    assert_relative_eq!(pump_power_kw(0.1, 30.0, 0.75), 39.2266, max_relative = 1e-5);
}

#[test]
fn pump_power_matches_flow_and_gain() {
    let net = build_mininet();
    let s = solve(&net, &mininet_demands(&net, 1.0));
    for (k, link) in net.links().iter().enumerate() {
        if link.is_pump() {
            assert!(s.flows[k] >= 0.0 && s.pump_power[k] >= 0.0);
            let eta = net.pump_model(k).unwrap().efficiency;
            assert_relative_eq!(s.pump_power[k], pump_power_kw(s.flows[k], s.pump_gain[k], eta), max_relative = 1e-12);
        } else {
            assert_eq!(s.pump_power[k], 0.0);
        }
    }
}

#[test]
fn reverse_pump_flow_closes_the_pump() {
    // The downstream reservoir sits far above what the pump can lift to.
    let net = build(
        vec![Node::reservoir("LOW", 0.0), Node::reservoir("HIGH", 100.0), Node::junction("J", 0.0, 0.01)],
        vec![Link::pump("PU", "LOW", "J", "C"), Link::pipe("P", "HIGH", "J", 500.0, 0.2, 120.0)],
        vec![Curve { id: "C".into(), points: vec![(0.0, 20.0), (0.05, 15.0), (0.1, 5.0)] }],
    );
    let s = solve(&net, &[0.0, 0.0, 0.01]);
    assert!(s.converged);
    assert!(!s.link_open[0]);
    assert_eq!(s.flows[0], 0.0);
    assert_eq!(s.pump_power[0], 0.0);
    assert_relative_eq!(s.flows[1], 0.01, max_relative = 1e-6);
}

#[test]
fn pbv_imposes_its_pressure_drop() {
    let net = build(
        vec![Node::reservoir("R", 60.0), Node::junction("A", 0.0, 0.0), Node::junction("B", 0.0, 0.005)],
        vec![Link::pipe("P", "R", "A", 200.0, 0.2, 120.0), Link::pbv("V", "A", "B", 20.0)],
        vec![],
    );
    let s = solve(&net, &[0.0, 0.0, 0.005]);
    assert!(s.converged);
    assert!(s.flows[1] > 0.0);
    assert_relative_eq!(s.pressures[1] - s.pressures[2], 20.0, max_relative = 1e-9);
}

#[test]
fn pbv_with_reverse_flow_is_closed() {
    // Demand sits upstream of the valve while the only source is downstream.
    let net = build(
        vec![
            Node::reservoir("R1", 40.0),
            Node::junction("A", 0.0, 0.004),
            Node::junction("B", 0.0, 0.0),
            Node::reservoir("R2", 60.0),
        ],
        vec![
            Link::pipe("P1", "R1", "A", 200.0, 0.2, 120.0),
            Link::pbv("V", "A", "B", 10.0),
            Link::pipe("P2", "R2", "B", 200.0, 0.2, 120.0),
        ],
        vec![],
    );
    let s = solve(&net, &[0.0, 0.004, 0.0, 0.0]);
    assert!(s.converged);
    assert!(!s.link_open[1]);
    assert_eq!(s.flows[1], 0.0);
}

#[test]
fn isolated_region_is_infeasible_structurally() {
    let mut parts = build(
        vec![Node::reservoir("R", 50.0), Node::junction("J", 0.0, 0.01)],
        vec![Link::pipe("P", "R", "J", 100.0, 0.2, 120.0)],
        vec![],
    )
    .to_parts();
    parts.links[0].status = LinkStatus::Closed;
    let net = Network::new(parts, FlowUnit::CubicMetersPerSecond).unwrap();
    let err = solve_snapshot(&net, &[0.0, 0.01], &ControlAction::initial(&net), &BTreeMap::new(), &PdaParams::default())
        .unwrap_err();
    assert!(matches!(err, SolveError::StructurallyInfeasible(ref id) if id == "J"));
}

#[test]
fn low_pressure_reduces_delivery() {
    // 30 m of head at the junction is about 42.7 psi, below the 60 psi
    // required for full service.
    let net = build(
        vec![Node::reservoir("R", 30.0), Node::junction("J", 0.0, 0.001)],
        vec![Link::pipe("P", "R", "J", 10.0, 0.3, 130.0)],
        vec![],
    );
    let s = solve(&net, &[0.0, 0.001]);
    assert!(s.converged);
    let frac = pda_factor(s.pressures[1], &PdaParams::default());
    assert!(frac < 1.0);
    assert_relative_eq!(s.delivered[1], 0.001 * frac, max_relative = 1e-6);
}

#[test]
fn mininet_snapshots_conserve_mass() {
    let net = build_mininet();
    for scale in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let s = solve(&net, &mininet_demands(&net, scale));
        assert!(s.converged, "scale {scale}");
        assert!(s.iterations <= 200);
        for (_, r) in s.junction_residuals(&net) {
            assert!(r <= 1e-6, "residual {r}");
        }
        for &j in net.junction_indices() {
            assert!(s.delivered[j] >= 0.0 && s.delivered[j] <= s.requested[j] + 1e-15);
        }
    }
}

#[test]
fn declaration_order_does_not_change_heads() {
    let net = build_mininet();
    let base = solve(&net, &mininet_demands(&net, 1.5));
    let mut parts = net.to_parts();
    parts.nodes.reverse();
    parts.links.reverse();
    parts.nodes.swap(1, 4);
    let permuted = Network::new(parts, FlowUnit::CubicMetersPerSecond).unwrap();
    let s = solve(&permuted, &mininet_demands(&permuted, 1.5));
    for node in net.nodes() {
        let a = base.heads[net.node_idx(&node.id).unwrap()];
        let b = s.heads[permuted.node_idx(&node.id).unwrap()];
        assert!((a - b).abs() <= 1e-9, "{}: {a} vs {b}", node.id);
    }
}

fn tank_net() -> Network {
    build(
        vec![Node::reservoir("R", 50.0), Node::tank("T", 0.0, 2.0, 1.0, 4.0, 10.0)],
        vec![Link::pipe("P", "R", "T", 100.0, 0.2, 120.0)],
        vec![],
    )
}

fn fake_state(net: &Network, flow: f64) -> HydraulicState {
    let nn = net.nodes().len();
    HydraulicState {
        heads: vec![0.0; nn],
        pressures: vec![0.0; nn],
        flows: vec![flow],
        requested: vec![0.0; nn],
        delivered: vec![0.0; nn],
        pump_power: vec![0.0],
        pump_gain: vec![0.0],
        link_open: vec![true],
        isolated: vec![false; nn],
        converged: true,
        iterations: 1,
        max_residual: 0.0,
    }
}

#[test]
fn tank_level_integrates_inflow() {
    let net = tank_net();
    let levels = net.initial_tank_levels();
    let step = step_tanks(&net, &fake_state(&net, 0.01), &levels, 3600.0);
    assert_relative_eq!(step.levels[&1] - 2.0, 36.0 / (std::f64::consts::PI * 25.0), max_relative = 1e-12);
    assert!((step.levels[&1] - 2.0 - 0.4584).abs() < 1e-4);
    assert!(step.events.is_empty());

    let still = step_tanks(&net, &fake_state(&net, 0.0), &levels, 3600.0);
    assert_eq!(still.levels[&1], 2.0);
}

#[test]
fn tank_level_clamps_and_flags() {
    let net = tank_net();
    let full: BTreeMap<usize, f64> = [(1, 4.0)].into();
    let step = step_tanks(&net, &fake_state(&net, 0.01), &full, 3600.0);
    assert_eq!(step.levels[&1], 4.0);
    assert_eq!(step.events[&1], TankEvent::Full);

    let low: BTreeMap<usize, f64> = [(1, 1.1)].into();
    let step = step_tanks(&net, &fake_state(&net, -0.05), &low, 3600.0);
    assert_eq!(step.levels[&1], 1.0);
    assert_eq!(step.events[&1], TankEvent::Empty);
}

#[test]
fn full_tank_refuses_inflow() {
    let net = tank_net();
    let full: BTreeMap<usize, f64> = [(1, 4.0)].into();
    let s = solve_snapshot(&net, &[0.0, 0.0], &ControlAction::initial(&net), &full, &PdaParams::default()).unwrap();
    assert!(s.converged);
    assert_eq!(s.flows[0], 0.0);
}

fn rule_episode(hours: usize) -> EpisodeResult {
    let net = build_mininet();
    let ds = generate_dataset(&net, &GeneratorConfig::default(), 1).unwrap();
    let ctx = ForecastContext::new(region_levels(&ds.series, &net), &[]);
    let mut controller = RuleController::new(RuleConfig::default());
    let mut forecaster = OracleForecaster { window: 0, num_regions: net.num_regions() };
    simulate_episode(&net, &ds.series, 24, hours, &mut controller, &mut forecaster, &ctx, &EpisodeConfig::default()).unwrap()
}

#[test]
fn episode_has_one_step_per_hour() {
    let r = rule_episode(24);
    assert_eq!(r.hours(), 24);
    assert_eq!(r.steps.iter().map(|s| s.hour).collect::<Vec<_>>(), (24..48).collect::<Vec<_>>());
    let total: f64 = r.steps.iter().map(|s| s.energy_kwh).sum();
    assert_eq!(r.total_energy_kwh(), total);
    for s in &r.steps {
        assert_relative_eq!(s.energy_kwh, s.state.total_power_kw(), max_relative = 1e-12);
        assert!(s.energy_kwh >= 0.0);
    }
}

#[test]
fn episode_is_deterministic() {
    let a = rule_episode(24);
    let b = rule_episode(24);
    assert_eq!(a, b);
}

#[test]
fn episode_rejects_short_series() {
    let net = build_mininet();
    let ds = generate_dataset(&net, &GeneratorConfig::default(), 1).unwrap();
    let ctx = ForecastContext::new(region_levels(&ds.series, &net), &[]);
    let mut controller = RuleController::new(RuleConfig::default());
    let mut forecaster = OracleForecaster { window: 0, num_regions: 2 };
    let hours = ds.series.hours();
    let err = simulate_episode(&net, &ds.series, hours - 10, 24, &mut controller, &mut forecaster, &ctx, &EpisodeConfig::default());
    assert!(matches!(err, Err(SolveError::InvalidInput(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbed_mininet_conserves_mass(
        scales in prop::collection::vec(0.0f64..3.0, 8),
        speeds in prop::collection::vec(0.3f64..3.0, 1),
        setting in 8.0f64..50.0,
        level in 1.0f64..9.0,
    ) {
        let net = build_mininet();
        let mut demands = mininet_demands(&net, 1.0);
        for (d, s) in demands.iter_mut().skip(2).zip(&scales) {
            *d *= s;
        }
        let mut action = ControlAction::initial(&net);
        action.pump_speed.insert("PU1".into(), speeds[0]);
        action.valve_setting.insert("V1".into(), setting);
        let levels: BTreeMap<usize, f64> = [(net.node_idx("T1").unwrap(), level)].into();
        let s = solve_snapshot(&net, &demands, &action, &levels, &PdaParams::default()).unwrap();
        prop_assert!(s.converged);
        for (_, r) in s.junction_residuals(&net) {
            prop_assert!(r <= 1e-6);
        }
        for (k, link) in net.links().iter().enumerate() {
            if link.is_pump() {
                prop_assert!(s.flows[k] >= 0.0);
                prop_assert!(s.pump_power[k] >= 0.0);
            }
        }
    }
}
