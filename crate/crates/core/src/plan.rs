//! Structured view of a solution: per-EV routes plus charge events, and the
//! conversion to and from the flat column vector.
//!
//! Solvers and the heuristic lowering produce plans; encoding sets the
//! binary columns and lets the instance determine the slacks. Decoding is
//! the inverse scan over the binary blocks and is what the semantic verifier
//! starts from.

use thiserror::Error;

use crate::graph::NodeId;
use crate::ip::{IpInstance, Solution, VarId};
use crate::scalar::EnergyScalar;
use crate::scenario::EvId;

/// One EV's route: time-space arc indices in departure-time order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Route {
    pub arcs: Vec<u32>,
}

/// EV `receiver` is charged by EV `giver` at `meeting` during [t, t+1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransferEvent {
    pub receiver: EvId,
    pub giver: EvId,
    pub meeting: NodeId,
    pub t: u32,
}

/// EV `ev` draws from the grid at `parking` during [t, t+1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GridEvent {
    pub ev: EvId,
    pub parking: NodeId,
    pub t: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    pub routes: Vec<Route>,
    pub transfers: Vec<TransferEvent>,
    pub grid_draws: Vec<GridEvent>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("vector length {got} does not match column count {want}")]
    LengthMismatch { got: usize, want: u64 },
    #[error("column {col} holds {value}, not a 0/1 value")]
    NotBinary { col: u64, value: i64 },
    #[error("plan references unknown ev {0}")]
    UnknownEv(EvId),
    #[error("plan references unknown node {0}")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Ip(#[from] crate::ip::IpError),
}

impl Plan {
    pub fn new(n_evs: usize) -> Self {
        Self { routes: vec![Route::default(); n_evs], transfers: Vec::new(), grid_draws: Vec::new() }
    }

    /// Lowers the plan to a full column vector: binary columns from the
    /// routes and events, slacks determined by the instance.
    pub fn encode<E: EnergyScalar>(
        &self,
        instance: &IpInstance<E>,
    ) -> Result<Solution<E>, PlanError> {
        let layout = &instance.layout;
        let mut x = vec![E::zero(); instance.matrix.cols as usize];
        if self.routes.len() != layout.n_evs as usize {
            return Err(PlanError::UnknownEv(EvId(self.routes.len() as u32)));
        }
        for (ev, route) in self.routes.iter().enumerate() {
            for &arc in &route.arcs {
                x[layout.col_x(ev as u32, arc) as usize] = E::one();
            }
        }
        let road = &instance.scenario.road;
        for event in &self.transfers {
            for ev in [event.receiver, event.giver] {
                if ev.0 >= layout.n_evs {
                    return Err(PlanError::UnknownEv(ev));
                }
            }
            let node_index =
                road.node_index(event.meeting).ok_or(PlanError::UnknownNode(event.meeting))? as u32;
            let meet = layout
                .meeting_nodes
                .iter()
                .position(|&m| m == node_index)
                .ok_or(PlanError::UnknownNode(event.meeting))? as u32;
            x[layout.col_z(event.receiver.0, event.giver.0, meet, event.t) as usize] = E::one();
        }
        for event in &self.grid_draws {
            if event.ev.0 >= layout.n_evs {
                return Err(PlanError::UnknownEv(event.ev));
            }
            let node_index =
                road.node_index(event.parking).ok_or(PlanError::UnknownNode(event.parking))? as u32;
            let park = layout
                .parking_nodes
                .iter()
                .position(|&p| p == node_index)
                .ok_or(PlanError::UnknownNode(event.parking))? as u32;
            x[layout.col_y(event.ev.0, park, event.t) as usize] = E::one();
        }
        instance.determine_slacks(&mut x)?;
        Ok(Solution { x })
    }

    /// Reads the binary blocks of `x` back into a plan. Routes come out in
    /// departure-time order; no path structure is enforced here (that is the
    /// semantic verifier's job).
    pub fn decode<E: EnergyScalar>(
        scenario: &crate::scenario::Scenario<E>,
        layout: &crate::ip::VariableLayout,
        x: &[E],
    ) -> Result<Self, PlanError> {
        if x.len() as u64 != layout.total_cols() {
            return Err(PlanError::LengthMismatch { got: x.len(), want: layout.total_cols() });
        }
        let mut plan = Plan::new(layout.n_evs as usize);
        let node_ids: Vec<NodeId> = scenario.road.nodes.iter().map(|n| n.id).collect();
        for col in 0..layout.binary_count() {
            let value = x[col as usize];
            if value.is_zero() {
                continue;
            }
            if value != E::one() {
                return Err(PlanError::NotBinary { col, value: value.to_i64() });
            }
            match layout.var(col) {
                VarId::X { ev, arc } => plan.routes[ev as usize].arcs.push(arc),
                VarId::Y { ev, park, t } => plan.grid_draws.push(GridEvent {
                    ev: EvId(ev),
                    parking: node_ids[layout.parking_nodes[park as usize] as usize],
                    t,
                }),
                VarId::Z { recv, giver, meet, t } => plan.transfers.push(TransferEvent {
                    receiver: EvId(recv),
                    giver: EvId(giver),
                    meeting: node_ids[layout.meeting_nodes[meet as usize] as usize],
                    t,
                }),
                _ => unreachable!("binary columns precede all slacks"),
            }
        }
        let ts = scenario.expand().map_err(crate::ip::IpError::Graph)?;
        for route in &mut plan.routes {
            route.arcs.sort_by_key(|&a| (ts.arc_tail_time(a), a));
        }
        plan.transfers.sort();
        plan.grid_draws.sort();
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeKind, RoadArc, RoadNode, RoadNetwork, TsState};
    use crate::ip::build_ip;
    use crate::scenario::{Ev, Scenario};
    use std::collections::BTreeMap;

    fn meeting_pair_scenario() -> Scenario<i64> {
        Scenario {
            road: RoadNetwork {
                nodes: vec![
                    RoadNode { id: NodeId(0), kind: NodeKind::Meeting },
                    RoadNode { id: NodeId(1), kind: NodeKind::Plain },
                ],
                arcs: vec![RoadArc {
                    tail: NodeId(0),
                    head: NodeId(1),
                    energy: 2,
                    duration: 1,
                    directed: false,
                }],
            },
            evs: vec![
                Ev { id: EvId(0), start: NodeId(0), dest: NodeId(1), soc: 6, capacity: 9, give_rate: 1 },
                Ev { id: EvId(1), start: NodeId(0), dest: NodeId(1), soc: 1, capacity: 9, give_rate: 1 },
            ],
            grid_rates: BTreeMap::new(),
            horizon: 4,
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let scenario = meeting_pair_scenario();
        let instance = build_ip(&scenario).unwrap();
        let ts = scenario.expand().unwrap();
        let wait0 = |t: u32| instance.layout.waiting_arc(0, t);
        let travel_at = |t: u32| {
            (0..ts.arc_count() as u32)
                .find(|&a| {
                    ts.arcs[a as usize].road_arc == Some(0) && ts.arc_tail_time(a) == t
                })
                .unwrap()
        };
        let mut plan = Plan::new(2);
        // Helper waits one step (giving), then travels; needy waits, receives,
        // waits again, then travels.
        plan.routes[0].arcs = vec![wait0(0), travel_at(1)];
        plan.routes[1].arcs = vec![wait0(0), wait0(1), travel_at(2)];
        plan.transfers.push(TransferEvent {
            receiver: EvId(1),
            giver: EvId(0),
            meeting: NodeId(0),
            t: 0,
        });
        let solution = plan.encode(&instance).unwrap();
        let back = Plan::decode(&scenario, &instance.layout, &solution.x).unwrap();
        assert_eq!(back, plan);
        // The battery slack at (ev0, t=1) is the negated level: 6 - 1 given = 5.
        let slack = instance.layout.col_slack_battery(0, 1);
        assert_eq!(solution.x[slack as usize], -5);
        // Needy at t=1: 1 + 1 received = 2.
        let slack = instance.layout.col_slack_battery(1, 1);
        assert_eq!(solution.x[slack as usize], -2);
        let origin = ts.state_index(TsState { node: NodeId(0), t: 0 }).unwrap();
        assert!(origin < ts.state_count());
    }

    #[test]
    fn decode_rejects_non_binary_entries() {
        let scenario = meeting_pair_scenario();
        let instance = build_ip(&scenario).unwrap();
        let mut x = vec![0i64; instance.matrix.cols as usize];
        x[0] = 2;
        assert!(matches!(
            Plan::decode(&scenario, &instance.layout, &x),
            Err(PlanError::NotBinary { .. })
        ));
    }
}
