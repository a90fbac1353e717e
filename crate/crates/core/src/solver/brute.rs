//! Brute-force oracle: enumerate every time-respecting route per EV, take
//! the cartesian product, and for each route tuple enumerate every charge
//! schedule consistent with co-location, checking the model semantics
//! directly step by step. Exact but only viable under explicit caps; the
//! search never touches the branch-and-bound code or the assembled matrix,
//! which is what makes it usable as an independent oracle.

use std::time::Instant;

use thiserror::Error;

use crate::graph::{NodeKind, TimeSpaceNetwork, TsArcKind, TsState};
use crate::ip::build_ip;
use crate::plan::{GridEvent, Plan, TransferEvent};
use crate::scalar::EnergyScalar;
use crate::scenario::{EvId, Scenario};

use super::{SolveOutcome, SolveStats, SolveStatus};

#[derive(Debug, Clone, Copy)]
pub struct BruteForceCaps {
    /// Routes enumerated per EV before giving up.
    pub max_routes_per_ev: usize,
    /// Cartesian products of routes examined.
    pub max_route_tuples: u64,
    /// Total schedule-search steps across all tuples.
    pub max_schedule_nodes: u64,
}

impl Default for BruteForceCaps {
    fn default() -> Self {
        Self { max_routes_per_ev: 20_000, max_route_tuples: 500_000, max_schedule_nodes: 20_000_000 }
    }
}

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("scenario is invalid: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Ip(#[from] crate::ip::IpError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Plan(#[from] crate::plan::PlanError),
}

/// Where one EV is during each step, for a fixed route.
#[derive(Clone, Copy, PartialEq, Eq)]
enum StepPlace {
    Waiting(u32),
    Traveling,
}

struct FixedRoute<E> {
    arcs: Vec<u32>,
    /// Occupancy per step index 0..T-1.
    places: Vec<StepPlace>,
    /// Energy completing (arriving) at each time 0..T.
    arrival_drain: Vec<E>,
    travel_cost: E,
}

struct ScheduleSearch<'a, E: EnergyScalar> {
    scenario: &'a Scenario<E>,
    routes: &'a [&'a FixedRoute<E>],
    horizon: u32,
    /// Remaining schedule-node budget Shared across tuples.
    budget: &'a mut u64,
    best: &'a mut Option<(E, Plan)>,
    travel_total: E,
    soc: Vec<E>,
    transfers: Vec<TransferEvent>,
    grid: Vec<GridEvent>,
    capped: bool,
}

impl<'a, E: EnergyScalar> ScheduleSearch<'a, E> {
    /// One step's transfer candidates: ordered (receiver, giver) pairs
    /// co-waiting at a meeting node.
    fn transfer_candidates(&self, t: u32) -> Vec<(u32, u32, u32)> {
        let n = self.routes.len();
        let mut out = Vec::new();
        for recv in 0..n {
            let StepPlace::Waiting(node) = self.routes[recv].places[t as usize] else { continue };
            if self.scenario.road.nodes[node as usize].kind != NodeKind::Meeting {
                continue;
            }
            for giver in 0..n {
                if giver == recv {
                    continue;
                }
                if self.routes[giver].places[t as usize] == StepPlace::Waiting(node) {
                    out.push((recv as u32, giver as u32, node));
                }
            }
        }
        out
    }

    fn grid_candidates(&self, t: u32) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (ev, route) in self.routes.iter().enumerate() {
            if let StepPlace::Waiting(node) = route.places[t as usize] {
                if self.scenario.road.nodes[node as usize].kind == NodeKind::Parking {
                    out.push((ev as u32, node));
                }
            }
        }
        out
    }

    fn run(&mut self) {
        let mut give_used = vec![false; self.routes.len()];
        let mut recv_used = vec![false; self.routes.len()];
        self.step(0, &mut give_used, &mut recv_used, E::zero());
    }

    /// Advances one time step: enumerate transfer patterns, then grid draws,
    /// then apply arrivals and recurse.
    fn step(&mut self, t: u32, give_used: &mut [bool], recv_used: &mut [bool], grid_cost: E) {
        if self.capped {
            return;
        }
        if *self.budget == 0 {
            self.capped = true;
            return;
        }
        *self.budget -= 1;
        if t + 1 == self.horizon {
            let total = self.travel_total + grid_cost;
            if self.best.as_ref().map_or(true, |(best, _)| total < *best) {
                let plan = Plan {
                    routes: self
                        .routes
                        .iter()
                        .map(|r| crate::plan::Route { arcs: r.arcs.clone() })
                        .collect(),
                    transfers: self.transfers.clone(),
                    grid_draws: self.grid.clone(),
                };
                *self.best = Some((total, plan));
            }
            return;
        }
        let pairs = self.transfer_candidates(t);
        let draws = self.grid_candidates(t);
        self.choose_pair(t, 0, &pairs, &draws, give_used, recv_used, grid_cost);
    }

    #[allow(clippy::too_many_arguments)]
    fn choose_pair(
        &mut self,
        t: u32,
        idx: usize,
        pairs: &[(u32, u32, u32)],
        draws: &[(u32, u32)],
        give_used: &mut [bool],
        recv_used: &mut [bool],
        grid_cost: E,
    ) {
        if self.capped {
            return;
        }
        if idx == pairs.len() {
            self.choose_draw(t, 0, draws, grid_cost);
            return;
        }
        let (recv, giver, node) = pairs[idx];
        // Off branch.
        self.choose_pair(t, idx + 1, pairs, draws, give_used, recv_used, grid_cost);
        // On branch: one giver and one receiver per EV per step, and never
        // both directions inside a pair.
        let two_way = self.transfers.iter().any(|e| {
            e.t == t && e.receiver == EvId(giver) && e.giver == EvId(recv)
        });
        if give_used[giver as usize] || recv_used[recv as usize] || two_way {
            return;
        }
        give_used[giver as usize] = true;
        recv_used[recv as usize] = true;
        self.transfers.push(TransferEvent {
            receiver: EvId(recv),
            giver: EvId(giver),
            meeting: self.scenario.road.nodes[node as usize].id,
            t,
        });
        self.choose_pair(t, idx + 1, pairs, draws, give_used, recv_used, grid_cost);
        self.transfers.pop();
        give_used[giver as usize] = false;
        recv_used[recv as usize] = false;
    }

    fn choose_draw(&mut self, t: u32, idx: usize, draws: &[(u32, u32)], grid_cost: E) {
        if self.capped {
            return;
        }
        if idx == draws.len() {
            self.apply_and_advance(t, grid_cost);
            return;
        }
        self.choose_draw(t, idx + 1, draws, grid_cost);
        let (ev, node) = draws[idx];
        let node_id = self.scenario.road.nodes[node as usize].id;
        let rate = self.scenario.grid_rates[&node_id];
        self.grid.push(GridEvent { ev: EvId(ev), parking: node_id, t });
        self.choose_draw(t, idx + 1, draws, grid_cost + rate);
        self.grid.pop();
    }

    /// Applies every event completing at t+1 and checks the battery bounds.
    fn apply_and_advance(&mut self, t: u32, grid_cost: E) {
        let n = self.routes.len();
        let mut delta = vec![E::zero(); n];
        for (ev, route) in self.routes.iter().enumerate() {
            delta[ev] -= route.arrival_drain[t as usize + 1];
        }
        for event in self.transfers.iter().filter(|e| e.t == t) {
            let rate = self.scenario.evs[event.giver.0 as usize].give_rate;
            delta[event.receiver.0 as usize] += rate;
            delta[event.giver.0 as usize] -= rate;
        }
        for event in self.grid.iter().filter(|e| e.t == t) {
            delta[event.ev.0 as usize] += self.scenario.grid_rates[&event.parking];
        }
        for ev in 0..n {
            let next = self.soc[ev] + delta[ev];
            if next < E::zero() || next > self.scenario.evs[ev].capacity {
                return;
            }
        }
        for ev in 0..n {
            self.soc[ev] += delta[ev];
        }
        let mut give_used = vec![false; n];
        let mut recv_used = vec![false; n];
        self.step(t + 1, &mut give_used, &mut recv_used, grid_cost);
        for ev in 0..n {
            self.soc[ev] -= delta[ev];
        }
    }
}

/// Enumerates every route of one EV through the time-space network.
fn enumerate_routes<E: EnergyScalar>(
    ts: &TimeSpaceNetwork<E>,
    scenario: &Scenario<E>,
    ev: usize,
    cap: usize,
) -> Result<Vec<FixedRoute<E>>, BruteForceError> {
    let spec = &scenario.evs[ev];
    let start = ts.state_index(TsState { node: spec.start, t: 0 })?;
    let goal = ts.state_index(TsState { node: spec.dest, t: ts.horizon - 1 })?;
    let mut routes = Vec::new();
    let mut stack: Vec<u32> = Vec::new();

    fn dfs<E: EnergyScalar>(
        ts: &TimeSpaceNetwork<E>,
        at: usize,
        goal: usize,
        cap: usize,
        stack: &mut Vec<u32>,
        routes: &mut Vec<Vec<u32>>,
    ) -> bool {
        if at == goal {
            if routes.len() == cap {
                return false;
            }
            routes.push(stack.clone());
        }
        for &a in ts.out_arcs(at) {
            stack.push(a);
            let ok = dfs(ts, ts.arcs[a as usize].head as usize, goal, cap, stack, routes);
            stack.pop();
            if !ok {
                return false;
            }
        }
        true
    }

    let mut raw = Vec::new();
    if !dfs(ts, start, goal, cap, &mut stack, &mut raw) {
        return Err(BruteForceError::CapExceeded(format!(
            "EV {ev} has more than {cap} routes"
        )));
    }
    for arcs in raw {
        let horizon = ts.horizon;
        let mut places = vec![StepPlace::Traveling; horizon as usize];
        let mut arrival_drain = vec![E::zero(); horizon as usize + 1];
        let mut travel_cost = E::zero();
        for &a in &arcs {
            let arc = &ts.arcs[a as usize];
            let from = ts.arc_tail_time(a);
            let to = ts.arc_head_time(a);
            arrival_drain[to as usize] += arc.energy;
            match arc.kind {
                TsArcKind::Waiting => {
                    places[from as usize] = StepPlace::Waiting(arc.tail / horizon);
                }
                TsArcKind::Travel => {
                    travel_cost += arc.energy;
                    for step in from..to {
                        places[step as usize] = StepPlace::Traveling;
                    }
                }
            }
        }
        routes.push(FixedRoute { arcs, places, arrival_drain, travel_cost });
    }
    Ok(routes)
}

/// Enumerative exact solve. Rejects (with `CapExceeded`) scenarios whose
/// route product or schedule space exceeds the caps.
pub fn brute_force<E: EnergyScalar>(
    scenario: &Scenario<E>,
    caps: BruteForceCaps,
) -> Result<SolveOutcome<E>, BruteForceError> {
    let started = Instant::now();
    let violations = scenario.validate();
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(BruteForceError::InvalidScenario(listed.join("; ")));
    }
    let ts = scenario.expand()?;
    let n = scenario.evs.len();
    let mut stats = SolveStats::default();

    let mut all_routes: Vec<Vec<FixedRoute<E>>> = Vec::with_capacity(n);
    for ev in 0..n {
        let routes = enumerate_routes(&ts, scenario, ev, caps.max_routes_per_ev)?;
        if routes.is_empty() {
            stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
            return Ok(SolveOutcome::infeasible(stats));
        }
        all_routes.push(routes);
    }
    let mut tuples: u64 = 1;
    for routes in &all_routes {
        tuples = tuples.saturating_mul(routes.len() as u64);
        if tuples > caps.max_route_tuples {
            return Err(BruteForceError::CapExceeded(format!(
                "route product exceeds {}",
                caps.max_route_tuples
            )));
        }
    }

    let mut best: Option<(E, Plan)> = None;
    let mut budget = caps.max_schedule_nodes;
    let mut index = vec![0usize; n];
    loop {
        stats.nodes_explored += 1;
        let chosen: Vec<&FixedRoute<E>> =
            index.iter().enumerate().map(|(ev, &i)| &all_routes[ev][i]).collect();
        let travel_total = chosen.iter().fold(E::zero(), |acc, r| acc + r.travel_cost);
        // Skip tuples that cannot beat the incumbent even with zero draws.
        if best.as_ref().map_or(true, |(b, _)| travel_total < *b) {
            let mut search = ScheduleSearch {
                scenario,
                routes: &chosen,
                horizon: ts.horizon,
                budget: &mut budget,
                best: &mut best,
                travel_total,
                soc: scenario.evs.iter().map(|e| e.soc).collect(),
                transfers: Vec::new(),
                grid: Vec::new(),
                capped: false,
            };
            search.run();
            if search.capped {
                return Err(BruteForceError::CapExceeded(
                    "schedule enumeration budget exhausted".into(),
                ));
            }
        }
        // Odometer.
        let mut pos = 0;
        loop {
            if pos == n {
                stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
                return finish(scenario, best, stats);
            }
            index[pos] += 1;
            if index[pos] < all_routes[pos].len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

fn finish<E: EnergyScalar>(
    scenario: &Scenario<E>,
    best: Option<(E, Plan)>,
    stats: SolveStats,
) -> Result<SolveOutcome<E>, BruteForceError> {
    match best {
        None => Ok(SolveOutcome::infeasible(stats)),
        Some((objective, plan)) => {
            let instance = build_ip(scenario)?;
            let solution = plan.encode(&instance)?;
            debug_assert_eq!(instance.eval_objective(&solution.x).unwrap(), objective);
            Ok(SolveOutcome {
                status: SolveStatus::Optimal,
                solution: Some(solution),
                objective: Some(objective),
                stats,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, RoadArc, RoadNode, RoadNetwork};
    use crate::scenario::Ev;
    use std::collections::BTreeMap;

    fn line_scenario(soc: i64) -> Scenario<i64> {
        Scenario {
            road: RoadNetwork {
                nodes: vec![
                    RoadNode { id: NodeId(0), kind: NodeKind::Plain },
                    RoadNode { id: NodeId(1), kind: NodeKind::Plain },
                ],
                arcs: vec![RoadArc {
                    tail: NodeId(0),
                    head: NodeId(1),
                    energy: 5,
                    duration: 1,
                    directed: false,
                }],
            },
            evs: vec![Ev {
                id: EvId(0),
                start: NodeId(0),
                dest: NodeId(1),
                soc,
                capacity: 10,
                give_rate: 1,
            }],
            grid_rates: BTreeMap::new(),
            horizon: 4,
        }
    }

    #[test]
    fn single_ev_with_enough_charge_is_optimal_at_path_energy() {
        let outcome = brute_force(&line_scenario(7), BruteForceCaps::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        assert_eq!(outcome.objective, Some(5));
    }

    #[test]
    fn single_ev_below_path_energy_is_infeasible() {
        let outcome = brute_force(&line_scenario(4), BruteForceCaps::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Infeasible);
    }

    #[test]
    fn helper_transfers_to_needy_when_needed() {
        let mut scenario = line_scenario(10);
        scenario.road.nodes[0].kind = NodeKind::Meeting;
        scenario.evs.push(Ev {
            id: EvId(1),
            start: NodeId(0),
            dest: NodeId(1),
            soc: 3,
            capacity: 10,
            give_rate: 2,
        });
        scenario.evs[0].give_rate = 2;
        let outcome = brute_force(&scenario, BruteForceCaps::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        // Both EVs traverse the arc; the transfer itself is free.
        assert_eq!(outcome.objective, Some(10));
        let solution = outcome.solution.unwrap();
        let report = crate::verifier::verify_semantic(&scenario, &solution).unwrap();
        assert!(report.accepted(), "{:?}", report.findings);
    }

    #[test]
    fn cap_on_routes_is_reported() {
        let caps = BruteForceCaps { max_routes_per_ev: 1, ..Default::default() };
        assert!(matches!(
            brute_force(&line_scenario(7), caps),
            Err(BruteForceError::CapExceeded(_))
        ));
    }
}
