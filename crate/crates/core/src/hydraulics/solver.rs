//! Steady-state snapshot solver.
//!
//! Global-gradient iteration: each non-valve link is linearized around its
//! current flow, the nodal mass balance (with linearized pressure-driven
//! demand) is solved for heads, and flows are updated from the heads.
//! Active PBVs impose a fixed head drop, so the nodes they join are merged
//! into groups with fixed head offsets; their flows follow from mass
//! balance once heads are known.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::pda::{pda_factor_with_slope, PdaParams};
use super::pump::{pump_head, pump_power_kw};
use super::state::HydraulicState;
use crate::controller::ControlAction;
use crate::network::{LinkKind, LinkStatus, Network, NodeKind};
use crate::units::{psi_to_head_m, M_PER_PSI};

pub const MAX_ITERATIONS: usize = 200;
pub const FLOW_CHANGE_TOL: f64 = 1e-3;
pub const MASS_TOL: f64 = 1e-6;
pub const DAMPING: f64 = 0.6;
const HW_COEFF: f64 = 10.667;
const HW_EXP: f64 = 1.852;
/// Below this flow (m³/s) pipe head loss is taken as linear, meeting the
/// Hazen–Williams curve at the threshold; keeps Newton well posed at q = 0.
const HW_LINEAR_BELOW: f64 = 1e-6;
/// Lower bound on d(headloss)/dq.
const MIN_GRADIENT: f64 = 1e-7;
const MIN_PUMP_FLOW: f64 = 1e-9;
/// Flows below this magnitude (m³/s) do not trigger status changes.
const REVERSE_FLOW_TOL: f64 = 1e-9;
const MAX_STATUS_PASSES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("junction '{0}' has no path to a reservoir or tank")]
    StructurallyInfeasible(String),
    #[error("valve '{0}' closes a loop of PBVs or joins two fixed heads")]
    ValveConflict(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Hazen–Williams resistance coefficient (SI): `h = r |q|^0.852 q`.
pub fn hazen_williams_r(length: f64, diameter: f64, roughness: f64) -> f64 {
    HW_COEFF * roughness.powf(-HW_EXP) * diameter.powf(-4.871) * length
}

#[derive(Debug, Clone, Copy)]
enum Element {
    Pipe { r: f64 },
    Pump { speed: f64 },
    Pbv { drop_m: f64 },
}

/// Solves one hydraulic snapshot.
///
/// `demands` holds the requested demand (m³/s) per node index; entries for
/// non-junction nodes are ignored. `tank_levels` maps tank node index to
/// level (m); a tank at its maximum only accepts outflow and a tank at its
/// minimum only accepts inflow.
pub fn solve_snapshot(
    net: &Network,
    demands: &[f64],
    action: &ControlAction,
    tank_levels: &BTreeMap<usize, f64>,
    pda: &PdaParams,
) -> Result<HydraulicState, SolveError> {
    solve(net, demands, action, tank_levels, pda, false)
}

/// Same as [`solve_snapshot`] with every pump closed.
pub fn solve_snapshot_pumps_off(
    net: &Network,
    demands: &[f64],
    action: &ControlAction,
    tank_levels: &BTreeMap<usize, f64>,
    pda: &PdaParams,
) -> Result<HydraulicState, SolveError> {
    solve(net, demands, action, tank_levels, pda, true)
}

fn solve(
    net: &Network,
    demands: &[f64],
    action: &ControlAction,
    tank_levels: &BTreeMap<usize, f64>,
    pda: &PdaParams,
    pumps_off: bool,
) -> Result<HydraulicState, SolveError> {
    let nn = net.nodes().len();
    let nl = net.links().len();
    if demands.len() != nn {
        return Err(SolveError::InvalidInput(format!("expected {nn} demands, got {}", demands.len())));
    }
    if demands.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(SolveError::InvalidInput("demands must be finite and >= 0".into()));
    }
    check_structure(net)?;

    let mut elements = Vec::with_capacity(nl);
    let mut open = Vec::with_capacity(nl);
    for (k, link) in net.links().iter().enumerate() {
        let mut is_open = link.status == LinkStatus::Open;
        let el = match &link.kind {
            LinkKind::Pipe { length, diameter, roughness } => {
                Element::Pipe { r: hazen_williams_r(*length, *diameter, *roughness) }
            }
            LinkKind::Pump { init_speed, speed_min, speed_max, .. } => {
                let speed = if net.is_tank_pump(k) {
                    let on = *action.delegated.get(&link.id).ok_or_else(|| {
                        SolveError::InvalidInput(format!("no on/off state for tank pump '{}'", link.id))
                    })?;
                    is_open &= on;
                    *init_speed
                } else {
                    let s = *action.pump_speed.get(&link.id).ok_or_else(|| {
                        SolveError::InvalidInput(format!("no speed for pump '{}'", link.id))
                    })?;
                    if !(*speed_min..=*speed_max).contains(&s) {
                        return Err(SolveError::InvalidInput(format!(
                            "speed {s} of pump '{}' outside [{speed_min}, {speed_max}]",
                            link.id
                        )));
                    }
                    s
                };
                is_open &= !pumps_off;
                Element::Pump { speed }
            }
            LinkKind::PbvValve { setting_min, setting_max, .. } => {
                let s = *action.valve_setting.get(&link.id).ok_or_else(|| {
                    SolveError::InvalidInput(format!("no setting for valve '{}'", link.id))
                })?;
                if !(*setting_min..=*setting_max).contains(&s) {
                    return Err(SolveError::InvalidInput(format!(
                        "setting {s} of valve '{}' outside [{setting_min}, {setting_max}]",
                        link.id
                    )));
                }
                Element::Pbv { drop_m: psi_to_head_m(s) }
            }
        };
        elements.push(el);
        open.push(is_open);
    }

    let mut fixed = vec![None; nn];
    for (i, node) in net.nodes().iter().enumerate() {
        fixed[i] = match node.kind {
            NodeKind::Junction { .. } => None,
            NodeKind::Reservoir { head } => Some(head),
            NodeKind::Tank { elevation, min_level, max_level, .. } => {
                let level = *tank_levels.get(&i).ok_or_else(|| {
                    SolveError::InvalidInput(format!("no level for tank '{}'", node.id))
                })?;
                if !(min_level - 1e-9..=max_level + 1e-9).contains(&level) {
                    return Err(SolveError::InvalidInput(format!(
                        "level {level} of tank '{}' outside [{min_level}, {max_level}]",
                        node.id
                    )));
                }
                Some(elevation + level)
            }
        };
    }

    let problem = Problem { net, demands, elements: &elements, fixed: &fixed, pda };
    let mut total_iterations = 0;
    let mut outcome;
    let mut passes = 0;
    loop {
        outcome = problem.run(&open)?;
        total_iterations += outcome.iterations;
        passes += 1;
        let closures = status_violations(net, &elements, &open, &outcome.flows, tank_levels);
        if closures.is_empty() || passes >= MAX_STATUS_PASSES {
            break;
        }
        for k in closures {
            open[k] = false;
        }
    }

    Ok(problem.finish(outcome, open, total_iterations))
}

/// Every junction must reach a fixed-head node when all links not
/// permanently closed are open.
fn check_structure(net: &Network) -> Result<(), SolveError> {
    let nn = net.nodes().len();
    let mut adj = vec![Vec::new(); nn];
    for (k, link) in net.links().iter().enumerate() {
        if link.status == LinkStatus::Open {
            let (a, b) = net.endpoints(k);
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let reached = reach_from_fixed(net, &adj);
    match net.junction_indices().iter().find(|&&j| !reached[j]) {
        Some(&j) => Err(SolveError::StructurallyInfeasible(net.nodes()[j].id.clone())),
        None => Ok(()),
    }
}

fn reach_from_fixed(net: &Network, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut reached = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, node) in net.nodes().iter().enumerate() {
        if node.is_fixed_head() {
            reached[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    reached
}

/// Links whose converged flow direction is not allowed: reverse flow
/// through pumps (check valve) and PBVs, inflow to a full tank, outflow
/// from an empty one.
fn status_violations(
    net: &Network,
    elements: &[Element],
    open: &[bool],
    flows: &[f64],
    tank_levels: &BTreeMap<usize, f64>,
) -> Vec<usize> {
    let mut out = Vec::new();
    for k in 0..elements.len() {
        if !open[k] {
            continue;
        }
        let q = flows[k];
        let reversed = q < -REVERSE_FLOW_TOL;
        let blocked = match elements[k] {
            Element::Pump { .. } | Element::Pbv { .. } => reversed,
            Element::Pipe { .. } => false,
        };
        let (a, b) = net.endpoints(k);
        let tank_blocked = [(a, -q), (b, q)].iter().any(|&(node, inflow)| {
            if let NodeKind::Tank { min_level, max_level, .. } = net.nodes()[node].kind {
                let level = tank_levels[&node];
                (level >= max_level && inflow > REVERSE_FLOW_TOL)
                    || (level <= min_level && inflow < -REVERSE_FLOW_TOL)
            } else {
                false
            }
        });
        if blocked || tank_blocked {
            out.push(k);
        }
    }
    // A reversed PBV imposes its head offset the wrong way round and can
    // push other links into reverse too, so close valves on their own first.
    if out.iter().any(|&k| matches!(elements[k], Element::Pbv { .. })) {
        out.retain(|&k| matches!(elements[k], Element::Pbv { .. }));
    }
    out
}

struct Problem<'a> {
    net: &'a Network,
    demands: &'a [f64],
    elements: &'a [Element],
    fixed: &'a [Option<f64>],
    pda: &'a PdaParams,
}

/// Nodes joined by active PBVs, with head offsets relative to the root.
struct Groups {
    group_of: Vec<usize>,
    offset: Vec<f64>,
    /// Known head of the root for groups containing a fixed-head node.
    fixed_head: Vec<Option<f64>>,
    roots: Vec<usize>,
    /// Nodes in BFS order with the PBV leading to them from their parent.
    tree_order: Vec<Vec<(usize, Option<usize>)>>,
}

struct Outcome {
    heads: Vec<f64>,
    flows: Vec<f64>,
    delivered: Vec<f64>,
    isolated: Vec<bool>,
    converged: bool,
    iterations: usize,
    max_residual: f64,
}

impl Problem<'_> {
    fn build_groups(&self, open: &[bool]) -> Result<Groups, SolveError> {
        let net = self.net;
        let nn = net.nodes().len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nn];
        for (k, el) in self.elements.iter().enumerate() {
            if open[k] && matches!(el, Element::Pbv { .. }) {
                let (a, b) = net.endpoints(k);
                adj[a].push((b, k));
                adj[b].push((a, k));
            }
        }
        let mut group_of = vec![usize::MAX; nn];
        let mut offset = vec![0.0; nn];
        let mut fixed_head = Vec::new();
        let mut roots = Vec::new();
        let mut tree_order = Vec::new();
        // fixed-head nodes first so they become roots
        let order: Vec<usize> = (0..nn)
            .filter(|&i| self.fixed[i].is_some())
            .chain((0..nn).filter(|&i| self.fixed[i].is_none()))
            .collect();
        for root in order {
            if group_of[root] != usize::MAX {
                continue;
            }
            let g = roots.len();
            group_of[root] = g;
            offset[root] = 0.0;
            let mut members = vec![(root, None)];
            let mut used_edge = vec![];
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &(v, k) in &adj[u] {
                    if used_edge.contains(&k) {
                        continue;
                    }
                    used_edge.push(k);
                    let drop = match self.elements[k] {
                        Element::Pbv { drop_m } => drop_m,
                        _ => unreachable!(),
                    };
                    let (a, _) = net.endpoints(k);
                    // head(to) = head(from) - drop
                    let off = if a == u { offset[u] - drop } else { offset[u] + drop };
                    if group_of[v] != usize::MAX || self.fixed[v].is_some() {
                        return Err(SolveError::ValveConflict(net.links()[k].id.clone()));
                    }
                    group_of[v] = g;
                    offset[v] = off;
                    members.push((v, Some(k)));
                    queue.push_back(v);
                }
            }
            fixed_head.push(self.fixed[root]);
            roots.push(root);
            tree_order.push(members);
        }
        Ok(Groups { group_of, offset, fixed_head, roots, tree_order })
    }

    fn run(&self, open: &[bool]) -> Result<Outcome, SolveError> {
        let net = self.net;
        let nn = net.nodes().len();
        let nl = self.elements.len();
        let groups = self.build_groups(open)?;
        let ng = groups.roots.len();

        // groups reachable from a fixed head through active links
        let mut gadj = vec![Vec::new(); ng];
        for k in 0..nl {
            if open[k] && !matches!(self.elements[k], Element::Pbv { .. }) {
                let (a, b) = net.endpoints(k);
                let (ga, gb) = (groups.group_of[a], groups.group_of[b]);
                if ga != gb {
                    gadj[ga].push(gb);
                    gadj[gb].push(ga);
                }
            }
        }
        let mut live = vec![false; ng];
        let mut queue: VecDeque<usize> = (0..ng).filter(|&g| groups.fixed_head[g].is_some()).collect();
        for &g in &queue {
            live[g] = true;
        }
        while let Some(g) = queue.pop_front() {
            for &h in &gadj[g] {
                if !live[h] {
                    live[h] = true;
                    queue.push_back(h);
                }
            }
        }
        let isolated: Vec<bool> = (0..nn).map(|i| !live[groups.group_of[i]]).collect();

        // unknown index per group
        let mut unknown = vec![usize::MAX; ng];
        let mut m = 0;
        for g in 0..ng {
            if live[g] && groups.fixed_head[g].is_none() {
                unknown[g] = m;
                m += 1;
            }
        }

        let elevation: Vec<f64> = net.nodes().iter().map(|n| n.elevation()).collect();
        let head_of = |x: &[f64], i: usize| -> f64 {
            let g = groups.group_of[i];
            match groups.fixed_head[g] {
                Some(h) => h + groups.offset[i],
                None if live[g] => x[unknown[g]] + groups.offset[i],
                None => elevation[i],
            }
        };

        // initial iterate
        let req_head = psi_to_head_m(self.pda.p_req);
        let mut x: Vec<f64> = vec![0.0; m];
        for g in 0..ng {
            if unknown[g] != usize::MAX {
                let root = groups.roots[g];
                x[unknown[g]] = elevation[root] + req_head - groups.offset[root];
            }
        }
        let mut flows = vec![0.0; nl];
        for k in 0..nl {
            let (a, b) = net.endpoints(k);
            if !open[k] || isolated[a] || isolated[b] {
                continue;
            }
            flows[k] = match (self.elements[k], &net.links()[k].kind) {
                (Element::Pipe { .. }, LinkKind::Pipe { diameter, .. }) => {
                    0.3 * std::f64::consts::PI * diameter * diameter / 4.0
                }
                (Element::Pump { speed }, _) => {
                    0.5 * net.pump_model(k).expect("pump model").max_flow(speed)
                }
                _ => 0.0,
            };
        }

        let mut heads: Vec<f64> = (0..nn).map(|i| head_of(&x, i)).collect();
        let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
        let mut prev_residual = f64::INFINITY;
        let mut converged = m == 0;
        let mut iterations = 0;

        let mut p_coef = vec![0.0; nl];
        let mut c_coef = vec![0.0; nl];
        let mut delivered = vec![0.0; nn];
        let mut max_residual = 0.0;

        if m == 0 {
            // all heads known: each link equation is solved on its own
            for _ in 0..MAX_ITERATIONS {
                iterations += 1;
                let old = flows.clone();
                self.update_flows(open, &isolated, &heads, &mut flows, &mut p_coef, &mut c_coef, true);
                let dq: f64 = flows.iter().zip(&old).map(|(a, b)| (a - b).abs()).sum();
                let qsum: f64 = flows.iter().map(|q| q.abs()).sum();
                if dq <= FLOW_CHANGE_TOL * 1e-3 * qsum.max(1e-9) {
                    break;
                }
            }
            self.delivered(&heads, &isolated, &mut delivered);
            max_residual = self.assign_valve_flows(&groups, open, &isolated, &mut flows, &delivered);
        }

        while !converged && iterations < MAX_ITERATIONS {
            iterations += 1;
            self.update_flows(open, &isolated, &heads, &mut flows, &mut p_coef, &mut c_coef, false);

            let mut a = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for k in 0..nl {
                if !open[k] || matches!(self.elements[k], Element::Pbv { .. }) {
                    continue;
                }
                let (na, nb) = net.endpoints(k);
                if isolated[na] || isolated[nb] {
                    continue;
                }
                let (ga, gb) = (groups.group_of[na], groups.group_of[nb]);
                if ga == gb {
                    continue;
                }
                let p = p_coef[k];
                let c = c_coef[k] + p * (groups.offset[na] - groups.offset[nb]);
                let (ua, ub) = (unknown[ga], unknown[gb]);
                if ua != usize::MAX {
                    a[(ua, ua)] += p;
                    rhs[ua] -= c;
                    match groups.fixed_head[gb] {
                        Some(h) => rhs[ua] += p * h,
                        None => a[(ua, ub)] -= p,
                    }
                }
                if ub != usize::MAX {
                    a[(ub, ub)] += p;
                    rhs[ub] += c;
                    match groups.fixed_head[ga] {
                        Some(h) => rhs[ub] += p * h,
                        None => a[(ub, ua)] -= p,
                    }
                }
            }
            for &j in net.junction_indices() {
                if isolated[j] {
                    continue;
                }
                let u = unknown[groups.group_of[j]];
                if u == usize::MAX {
                    continue;
                }
                let (d, dd) = self.demand_at(j, heads[j]);
                a[(u, u)] += dd;
                rhs[u] -= d + dd * (groups.offset[j] - heads[j]);
            }

            let solution = match a.clone().cholesky() {
                Some(ch) => Some(ch.solve(&rhs)),
                None => a.lu().solve(&rhs),
            };
            let Some(solution) = solution else {
                log::warn!("singular hydraulic matrix at iteration {iterations}");
                break;
            };
            let x_new: Vec<f64> = solution.iter().copied().collect();

            let old_flows = flows.clone();
            let mut new_flows = flows.clone();
            let new_heads: Vec<f64> = (0..nn).map(|i| head_of(&x_new, i)).collect();
            for k in 0..nl {
                let (na, nb) = net.endpoints(k);
                if !open[k] || isolated[na] || isolated[nb] || matches!(self.elements[k], Element::Pbv { .. }) {
                    continue;
                }
                new_flows[k] = c_coef[k] + p_coef[k] * (new_heads[na] - new_heads[nb]);
            }

            let mut trial_heads = new_heads;
            let mut trial_x = x_new;
            self.delivered(&trial_heads, &isolated, &mut delivered);
            let mut residual =
                self.assign_valve_flows(&groups, open, &isolated, &mut new_flows, &delivered);
            let damped = residual > prev_residual && iterations > 1;
            if damped {
                for (xi, xo) in trial_x.iter_mut().zip(&x) {
                    *xi = xo + DAMPING * (*xi - xo);
                }
                for k in 0..nl {
                    new_flows[k] = old_flows[k] + DAMPING * (new_flows[k] - old_flows[k]);
                }
                trial_heads = (0..nn).map(|i| head_of(&trial_x, i)).collect();
                self.delivered(&trial_heads, &isolated, &mut delivered);
                residual = self.assign_valve_flows(&groups, open, &isolated, &mut new_flows, &delivered);
            }

            let mut dq = 0.0;
            let mut qsum = 0.0;
            for k in 0..nl {
                if !matches!(self.elements[k], Element::Pbv { .. }) {
                    dq += (new_flows[k] - old_flows[k]).abs();
                    qsum += new_flows[k].abs();
                }
            }
            let rel_change = if qsum > 1e-12 { dq / qsum } else { dq };

            x = trial_x;
            heads = trial_heads;
            flows = new_flows;
            prev_residual = residual;
            max_residual = residual;

            if best.as_ref().is_none_or(|b| residual < b.0) {
                best = Some((residual, heads.clone(), flows.clone(), delivered.clone()));
            }
            // a damped step leaves heads short of the linearized solution
            if !damped && rel_change < FLOW_CHANGE_TOL && residual < MASS_TOL {
                converged = true;
            }
        }

        if !converged {
            if let Some((res, h, f, d)) = best {
                heads = h;
                flows = f;
                delivered = d;
                max_residual = res;
            }
        }

        Ok(Outcome { heads, flows, delivered, isolated, converged, iterations, max_residual })
    }

    /// Linearizes every active non-valve link at its current flow, storing
    /// `p = 1/h'(q)` and `c = q - p h(q)` so that `q_new = c + p ΔH`.
    /// With `apply`, also sets flows from the given heads.
    #[allow(clippy::too_many_arguments)]
    fn update_flows(
        &self,
        open: &[bool],
        isolated: &[bool],
        heads: &[f64],
        flows: &mut [f64],
        p_coef: &mut [f64],
        c_coef: &mut [f64],
        apply: bool,
    ) {
        let net = self.net;
        for k in 0..self.elements.len() {
            let (a, b) = net.endpoints(k);
            if !open[k] || isolated[a] || isolated[b] {
                flows[k] = 0.0;
                p_coef[k] = 0.0;
                c_coef[k] = 0.0;
                continue;
            }
            let q = flows[k];
            let (loss, grad, q_lin) = match self.elements[k] {
                Element::Pipe { r } => {
                    let aq = q.abs();
                    if aq < HW_LINEAR_BELOW {
                        let g = (r * HW_LINEAR_BELOW.powf(HW_EXP - 1.0)).max(MIN_GRADIENT);
                        (g * q, g, q)
                    } else {
                        let g = (HW_EXP * r * aq.powf(HW_EXP - 1.0)).max(MIN_GRADIENT);
                        (r * aq.powf(HW_EXP - 1.0) * q, g, q)
                    }
                }
                Element::Pump { speed } => {
                    let model = net.pump_model(k).expect("pump model");
                    let qe = q.max(MIN_PUMP_FLOW);
                    let g = (-model.head_gain_slope(qe, speed)).max(MIN_GRADIENT);
                    (-model.head_gain_raw(qe, speed), g, qe)
                }
                Element::Pbv { .. } => continue,
            };
            let p = 1.0 / grad;
            p_coef[k] = p;
            c_coef[k] = q_lin - p * loss;
            if apply {
                flows[k] = c_coef[k] + p * (heads[a] - heads[b]);
            }
        }
    }

    /// Requested demand times the delivered fraction, and its derivative
    /// with respect to head.
    fn demand_at(&self, j: usize, head: f64) -> (f64, f64) {
        let base = self.demands[j];
        if base == 0.0 {
            return (0.0, 0.0);
        }
        let pressure = (head - self.net.nodes()[j].elevation()) / M_PER_PSI;
        let (f, df) = pda_factor_with_slope(pressure, self.pda);
        (base * f, base * df / M_PER_PSI)
    }

    fn delivered(&self, heads: &[f64], isolated: &[bool], out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = 0.0;
        }
        for &j in self.net.junction_indices() {
            if !isolated[j] {
                out[j] = self.demand_at(j, heads[j]).0.clamp(0.0, self.demands[j]);
            }
        }
    }

    /// Sets PBV flows from nodal mass balance, leaves first. Returns the
    /// largest junction mass residual.
    fn assign_valve_flows(
        &self,
        groups: &Groups,
        open: &[bool],
        isolated: &[bool],
        flows: &mut [f64],
        delivered: &[f64],
    ) -> f64 {
        let net = self.net;
        let nn = net.nodes().len();
        let mut imbalance = vec![0.0; nn];
        for k in 0..self.elements.len() {
            if !open[k] || matches!(self.elements[k], Element::Pbv { .. }) {
                continue;
            }
            let (a, b) = net.endpoints(k);
            imbalance[a] -= flows[k];
            imbalance[b] += flows[k];
        }
        for &j in net.junction_indices() {
            imbalance[j] -= delivered[j];
        }
        for (g, members) in groups.tree_order.iter().enumerate() {
            if !members.iter().any(|&(v, _)| !isolated[v]) {
                for &(_, edge) in members {
                    if let Some(k) = edge {
                        flows[k] = 0.0;
                    }
                }
                continue;
            }
            for &(v, edge) in members.iter().rev() {
                let Some(k) = edge else { continue };
                let (a, b) = net.endpoints(k);
                let (parent, q) = if b == v { (a, -imbalance[v]) } else { (b, imbalance[v]) };
                flows[k] = q;
                imbalance[v] = 0.0;
                if b == v {
                    imbalance[parent] -= q;
                } else {
                    imbalance[parent] += q;
                }
            }
            let root = groups.roots[g];
            if groups.fixed_head[g].is_some() {
                imbalance[root] = 0.0;
            }
        }
        net.junction_indices()
            .iter()
            .filter(|&&j| !isolated[j])
            .map(|&j| imbalance[j].abs())
            .fold(0.0, f64::max)
    }

    fn finish(&self, outcome: Outcome, open: Vec<bool>, iterations: usize) -> HydraulicState {
        let net = self.net;
        let nn = net.nodes().len();
        let Outcome { heads, flows, delivered, isolated, converged, max_residual, .. } = outcome;
        let mut pressures = vec![0.0; nn];
        for (i, node) in net.nodes().iter().enumerate() {
            pressures[i] = match node.kind {
                NodeKind::Junction { elevation, .. } => (heads[i] - elevation) / M_PER_PSI,
                NodeKind::Tank { elevation, .. } => (heads[i] - elevation) / M_PER_PSI,
                NodeKind::Reservoir { .. } => 0.0,
            };
        }
        let mut pump_power = vec![0.0; flows.len()];
        let mut pump_gain = vec![0.0; flows.len()];
        for (k, el) in self.elements.iter().enumerate() {
            if let Element::Pump { speed } = *el {
                if open[k] && flows[k] > 0.0 {
                    let model = net.pump_model(k).expect("pump model");
                    let gain = pump_head(model, flows[k], speed);
                    pump_gain[k] = gain;
                    pump_power[k] = pump_power_kw(flows[k], gain, model.efficiency);
                }
            }
        }
        let requested = (0..nn)
            .map(|i| if net.nodes()[i].is_junction() { self.demands[i] } else { 0.0 })
            .collect();
        HydraulicState {
            heads,
            pressures,
            flows,
            requested,
            delivered,
            pump_power,
            pump_gain,
            link_open: open,
            isolated,
            converged,
            iterations,
            max_residual,
        }
    }
}
