//! Depth-first branch and bound over the binary decision columns, in time
//! order: at each step every EV at its decision point picks an outgoing arc
//! (fixing X columns via flow conservation), then the charge events of the
//! step are branched (Z and Y columns), and the step's battery effects are
//! applied. Slacks are never branched; they are determined from the binaries
//! when the incumbent is lowered to a full vector.
//!
//! Pruning:
//! - admissible objective bound: committed cost plus each EV's minimum
//!   remaining path energy (backward labels), against the incumbent;
//! - an optimistic state-of-charge sweep: an upper bound on any EV's
//!   reachable charge at every future state, assuming best-case transfers;
//!   if some EV cannot reach its destination even optimistically, the
//!   subtree is dead;
//! - dominance: a (time, positions, charges) state reached again with no
//!   cheaper accumulated cost cannot improve on its first exploration.

use std::collections::HashMap;
use std::time::Instant;

use crate::graph::{LabelTable, NodeKind, TimeSpaceNetwork, TsArcKind, TsState};
use crate::ip::IpInstance;
use crate::plan::{GridEvent, Plan, Route, TransferEvent};
use crate::scalar::EnergyScalar;
use crate::scenario::EvId;

use super::{SolveOutcome, SolveStats, SolveStatus};

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// Explored search nodes before giving up (deterministic cutoff).
    pub max_nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_nodes: u64::MAX }
    }
}

const MEMO_CAP: usize = 2_000_000;

struct Search<'a, E: EnergyScalar> {
    instance: &'a IpInstance<E>,
    ts: TimeSpaceNetwork<E>,
    horizon: u32,
    n: usize,
    /// Backward minimum-energy labels per EV.
    eback: Vec<LabelTable<E>>,
    /// Per EV, per state: outgoing arcs ordered by optimistic completion cost.
    ordered_out: Vec<Vec<Vec<u32>>>,
    /// Node kind per dense road-node index.
    kinds: Vec<NodeKind>,
    grid_rate: Vec<E>,
    use_energy_lb: bool,

    frontier: Vec<usize>,
    soc: Vec<E>,
    acc: E,
    remaining_lb: E,
    routes: Vec<Vec<u32>>,
    transfers: Vec<TransferEvent>,
    grid: Vec<GridEvent>,
    waiting_node: Vec<Option<u32>>,

    incumbent: Option<(E, Plan)>,
    memo: HashMap<Box<[u64]>, E>,
    nodes: u64,
    max_nodes: u64,
    budget_hit: bool,
    ub: Vec<E>,
}

impl<'a, E: EnergyScalar> Search<'a, E> {
    fn new(instance: &'a IpInstance<E>, budget: Budget) -> Self {
        let scenario = &instance.scenario;
        let ts = scenario.expand().expect("instance scenarios expand");
        let horizon = scenario.horizon;
        let n = scenario.evs.len();
        let eback: Vec<LabelTable<E>> = scenario
            .evs
            .iter()
            .map(|ev| {
                ts.min_energy_backward(TsState { node: ev.dest, t: horizon - 1 })
                    .expect("destinations exist")
            })
            .collect();
        let mut ordered_out = Vec::with_capacity(n);
        for labels in &eback {
            let mut per_state = Vec::with_capacity(ts.state_count());
            for s in 0..ts.state_count() {
                let mut arcs: Vec<u32> = ts
                    .out_arcs(s)
                    .iter()
                    .copied()
                    .filter(|&a| labels.get(ts.arcs[a as usize].head as usize).is_some())
                    .collect();
                arcs.sort_by_key(|&a| {
                    let arc = &ts.arcs[a as usize];
                    (arc.energy + labels.get(arc.head as usize).unwrap(), a)
                });
                per_state.push(arcs);
            }
            ordered_out.push(per_state);
        }
        let kinds: Vec<NodeKind> = scenario.road.nodes.iter().map(|nd| nd.kind).collect();
        let grid_rate: Vec<E> = scenario
            .road
            .nodes
            .iter()
            .map(|nd| scenario.grid_rates.get(&nd.id).copied().unwrap_or_else(E::zero))
            .collect();
        let frontier: Vec<usize> = scenario
            .evs
            .iter()
            .map(|ev| ts.state_index(TsState { node: ev.start, t: 0 }).expect("start exists"))
            .collect();
        let remaining_lb = frontier
            .iter()
            .zip(eback.iter())
            .map(|(&f, labels)| labels.get(f).unwrap_or_else(E::zero))
            .fold(E::zero(), |a, b| a + b);
        let states = ts.state_count();
        Self {
            instance,
            horizon,
            n,
            eback,
            ordered_out,
            kinds,
            grid_rate,
            use_energy_lb: instance.objective.tag == "energy",
            frontier,
            soc: scenario.evs.iter().map(|ev| ev.soc).collect(),
            acc: E::zero(),
            remaining_lb,
            routes: vec![Vec::new(); n],
            transfers: Vec::new(),
            grid: Vec::new(),
            waiting_node: vec![None; n],
            incumbent: None,
            memo: HashMap::new(),
            nodes: 0,
            max_nodes: budget.max_nodes,
            budget_hit: false,
            ub: vec![-E::one(); n * states],
            ts,
        }
    }

    fn frontier_time(&self, ev: usize) -> u32 {
        (self.frontier[ev] % self.horizon as usize) as u32
    }

    fn bound_allows(&self) -> bool {
        match (&self.incumbent, self.use_energy_lb) {
            (None, _) => true,
            (Some((best, _)), true) => self.acc + self.remaining_lb < *best,
            (Some((best, _)), false) => self.acc < *best,
        }
    }

    /// Optimistic charge sweep. `ub[ev][state]` is an upper bound on the
    /// EV's level when at that state in any completion of the current
    /// prefix; -1 marks unreachable. One forward pass suffices because every
    /// transition strictly increases time.
    fn optimistic_ok(&mut self) -> bool {
        let states = self.ts.state_count();
        let h = self.horizon as usize;
        let n_nodes = self.ts.node_count();
        self.ub.fill(-E::one());
        let mut t_min = u32::MAX;
        for ev in 0..self.n {
            self.ub[ev * states + self.frontier[ev]] = self.soc[ev];
            t_min = t_min.min(self.frontier_time(ev));
        }
        if self.n == 0 {
            return true;
        }
        let caps: Vec<E> = self.instance.scenario.evs.iter().map(|e| e.capacity).collect();
        let rates: Vec<E> = self.instance.scenario.evs.iter().map(|e| e.give_rate).collect();
        for t in t_min as usize..h.saturating_sub(1) {
            for v in 0..n_nodes {
                let s = v * h + t;
                // Best and runner-up giver rates at a meeting state.
                let (mut best, mut best_ev, mut second) = (E::zero(), usize::MAX, E::zero());
                if self.kinds[v] == NodeKind::Meeting {
                    for g in 0..self.n {
                        let level = self.ub[g * states + s];
                        if level >= rates[g] && rates[g] > E::zero() {
                            if rates[g] > best {
                                second = best;
                                best = rates[g];
                                best_ev = g;
                            } else if rates[g] > second {
                                second = rates[g];
                            }
                        }
                    }
                }
                for ev in 0..self.n {
                    let cur = self.ub[ev * states + s];
                    if cur < E::zero() {
                        continue;
                    }
                    let mut gain = if self.kinds[v] == NodeKind::Parking {
                        self.grid_rate[v]
                    } else if ev == best_ev {
                        second
                    } else {
                        best
                    };
                    if cur + gain > caps[ev] {
                        gain = caps[ev] - cur;
                    }
                    let wait_to = ev * states + s + 1;
                    if cur + gain > self.ub[wait_to] {
                        self.ub[wait_to] = cur + gain;
                    }
                    for &a in self.ts.out_arcs(s) {
                        let arc = &self.ts.arcs[a as usize];
                        if arc.kind == TsArcKind::Waiting {
                            continue;
                        }
                        let cand = cur - arc.energy;
                        let slot = ev * states + arc.head as usize;
                        if cand >= E::zero() && cand > self.ub[slot] {
                            self.ub[slot] = cand;
                        }
                    }
                }
            }
        }
        (0..self.n).all(|ev| {
            let dest = self
                .ts
                .state_index(TsState {
                    node: self.instance.scenario.evs[ev].dest,
                    t: self.horizon - 1,
                })
                .unwrap();
            self.ub[ev * states + dest] >= E::zero()
        })
    }

    fn memo_key(&self, t: u32) -> Box<[u64]> {
        let mut key = Vec::with_capacity(1 + 2 * self.n);
        key.push(t as u64);
        for ev in 0..self.n {
            key.push(self.frontier[ev] as u64);
            key.push(self.soc[ev].to_i64() as u64);
        }
        key.into_boxed_slice()
    }

    fn step_phase(&mut self, t: u32) {
        if self.budget_hit {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.budget_hit = true;
            return;
        }
        let key = self.memo_key(t);
        match self.memo.get_mut(&key) {
            Some(prev) if *prev <= self.acc => return,
            Some(prev) => *prev = self.acc,
            None => {
                if self.memo.len() < MEMO_CAP {
                    self.memo.insert(key, self.acc);
                }
            }
        }
        if t == self.horizon - 1 {
            if self.incumbent.as_ref().map_or(true, |(best, _)| self.acc < *best) {
                let plan = Plan {
                    routes: self.routes.iter().map(|arcs| Route { arcs: arcs.clone() }).collect(),
                    transfers: self.transfers.clone(),
                    grid_draws: self.grid.clone(),
                };
                self.incumbent = Some((self.acc, plan));
            }
            return;
        }
        self.move_phase(t, 0);
    }

    fn move_phase(&mut self, t: u32, ev_from: usize) {
        if self.budget_hit {
            return;
        }
        let next = (ev_from..self.n).find(|&ev| self.frontier_time(ev) == t);
        let Some(ev) = next else {
            self.charge_phase(t);
            return;
        };
        let state = self.frontier[ev];
        let candidates = std::mem::take(&mut self.ordered_out[ev][state]);
        for &a in &candidates {
            let arc = self.ts.arcs[a as usize];
            if self.soc[ev] < arc.energy {
                continue;
            }
            let head = arc.head as usize;
            let old_eback = self.eback[ev].get(state).unwrap();
            let new_eback = self.eback[ev].get(head).unwrap();
            let coeff = self.instance.objective.coefficients
                [self.instance.layout.col_x(ev as u32, a) as usize];
            // Commit.
            self.soc[ev] -= arc.energy;
            self.frontier[ev] = head;
            self.remaining_lb = self.remaining_lb - old_eback + new_eback;
            self.acc += coeff;
            self.routes[ev].push(a);
            if arc.kind == TsArcKind::Waiting {
                self.waiting_node[ev] = Some(arc.tail / self.horizon);
            }
            if self.bound_allows() && self.optimistic_ok() {
                self.move_phase(t, ev + 1);
            }
            // Rollback.
            self.waiting_node[ev] = None;
            self.routes[ev].pop();
            self.acc -= coeff;
            self.remaining_lb = self.remaining_lb + old_eback - new_eback;
            self.frontier[ev] = state;
            self.soc[ev] += arc.energy;
            if self.budget_hit {
                break;
            }
        }
        self.ordered_out[ev][state] = candidates;
    }

    fn charge_phase(&mut self, t: u32) {
        // Receivers: waiting at a meeting node with at least one co-located
        // companion. Parked: waiting at a parking node.
        let mut receivers: Vec<(usize, u32, Vec<usize>)> = Vec::new();
        let mut parked: Vec<(usize, u32)> = Vec::new();
        for ev in 0..self.n {
            let Some(node) = self.waiting_node[ev] else { continue };
            match self.kinds[node as usize] {
                NodeKind::Meeting => {
                    let givers: Vec<usize> = (0..self.n)
                        .filter(|&g| g != ev && self.waiting_node[g] == Some(node))
                        .collect();
                    if !givers.is_empty() {
                        receivers.push((ev, node, givers));
                    }
                }
                NodeKind::Parking => parked.push((ev, node)),
                NodeKind::Plain => {}
            }
        }
        let mut chosen_giver: Vec<Option<usize>> = vec![None; self.n];
        let mut give_used = vec![false; self.n];
        self.assign_receiver(t, 0, &receivers, &parked, &mut chosen_giver, &mut give_used);
    }

    #[allow(clippy::too_many_arguments)]
    fn assign_receiver(
        &mut self,
        t: u32,
        idx: usize,
        receivers: &[(usize, u32, Vec<usize>)],
        parked: &[(usize, u32)],
        chosen_giver: &mut Vec<Option<usize>>,
        give_used: &mut Vec<bool>,
    ) {
        if self.budget_hit {
            return;
        }
        let Some((recv, node, givers)) = receivers.get(idx) else {
            self.assign_grid(t, 0, parked);
            return;
        };
        let (recv, node) = (*recv, *node);
        // A needy EV tries to receive first; a comfortable one tries not to.
        let needs = self.soc[recv] < self.eback[recv].get(self.frontier[recv]).unwrap();
        let mut order: Vec<Option<usize>> = Vec::with_capacity(givers.len() + 1);
        if needs {
            order.extend(givers.iter().map(|&g| Some(g)));
            order.push(None);
        } else {
            order.push(None);
            order.extend(givers.iter().map(|&g| Some(g)));
        }
        for choice in order {
            match choice {
                None => self.assign_receiver(t, idx + 1, receivers, parked, chosen_giver, give_used),
                Some(giver) => {
                    if give_used[giver] || chosen_giver[giver] == Some(recv) {
                        continue;
                    }
                    give_used[giver] = true;
                    chosen_giver[recv] = Some(giver);
                    self.transfers.push(TransferEvent {
                        receiver: EvId(recv as u32),
                        giver: EvId(giver as u32),
                        meeting: self.instance.scenario.road.nodes[node as usize].id,
                        t,
                    });
                    self.assign_receiver(t, idx + 1, receivers, parked, chosen_giver, give_used);
                    self.transfers.pop();
                    chosen_giver[recv] = None;
                    give_used[giver] = false;
                }
            }
            if self.budget_hit {
                return;
            }
        }
    }

    fn assign_grid(&mut self, t: u32, idx: usize, parked: &[(usize, u32)]) {
        if self.budget_hit {
            return;
        }
        let Some(&(ev, node)) = parked.get(idx) else {
            self.advance(t);
            return;
        };
        let needs = self.soc[ev] < self.eback[ev].get(self.frontier[ev]).unwrap();
        for draw in if needs { [true, false] } else { [false, true] } {
            if draw {
                let park = self
                    .instance
                    .layout
                    .parking_nodes
                    .iter()
                    .position(|&p| p == node)
                    .unwrap() as u32;
                let coeff = self.instance.objective.coefficients
                    [self.instance.layout.col_y(ev as u32, park, t) as usize];
                self.acc += coeff;
                self.grid.push(GridEvent {
                    ev: EvId(ev as u32),
                    parking: self.instance.scenario.road.nodes[node as usize].id,
                    t,
                });
                self.assign_grid(t, idx + 1, parked);
                self.grid.pop();
                self.acc -= coeff;
            } else {
                self.assign_grid(t, idx + 1, parked);
            }
            if self.budget_hit {
                return;
            }
        }
    }

    /// Applies the step's completed events and recurses into step t+1.
    fn advance(&mut self, t: u32) {
        if !self.bound_allows() {
            return;
        }
        let mut delta = vec![E::zero(); self.n];
        for event in self.transfers.iter().rev().take_while(|e| e.t == t) {
            let rate = self.instance.scenario.evs[event.giver.0 as usize].give_rate;
            delta[event.receiver.0 as usize] += rate;
            delta[event.giver.0 as usize] -= rate;
        }
        for event in self.grid.iter().rev().take_while(|e| e.t == t) {
            delta[event.ev.0 as usize] += self.instance.scenario.grid_rates[&event.parking];
        }
        for ev in 0..self.n {
            let next = self.soc[ev] + delta[ev];
            if next < E::zero() || next > self.instance.scenario.evs[ev].capacity {
                return;
            }
        }
        for ev in 0..self.n {
            self.soc[ev] += delta[ev];
        }
        let saved_waiting = std::mem::replace(&mut self.waiting_node, vec![None; self.n]);
        if self.optimistic_ok() {
            self.step_phase(t + 1);
        }
        self.waiting_node = saved_waiting;
        for ev in 0..self.n {
            self.soc[ev] -= delta[ev];
        }
    }
}

/// Exact depth-first branch and bound; deterministic for a fixed node budget.
pub fn solve_bb<E: EnergyScalar>(instance: &IpInstance<E>, budget: Budget) -> SolveOutcome<E> {
    let started = Instant::now();
    let mut search = Search::new(instance, budget);
    let mut root_feasible = true;
    for ev in 0..search.n {
        if search.eback[ev].get(search.frontier[ev]).is_none() {
            root_feasible = false;
        }
    }
    if root_feasible {
        root_feasible = search.optimistic_ok();
    }
    if root_feasible {
        search.step_phase(0);
    }
    let stats = SolveStats {
        nodes_explored: search.nodes,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let incumbent = search.incumbent.take();
    let status = if search.budget_hit {
        SolveStatus::BudgetExceeded
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    let (objective, solution) = match incumbent {
        None => (None, None),
        Some((value, plan)) => {
            let encoded = plan.encode(instance).expect("search plans always encode");
            (Some(value), Some(encoded))
        }
    };
    SolveOutcome { status, solution, objective, stats }
}
