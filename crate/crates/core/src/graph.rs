//! Road network, its time-space expansion, and energy-feasibility labels.
//!
//! The road network is the static map: nodes with a kind (plain, meeting
//! point, or parking station) and road arcs with a traversal energy and a
//! duration in time steps. The time-space network replicates every road node
//! once per time step and connects the copies with waiting arcs (stay put,
//! zero energy) and travel arcs (one per directed road arc per departure time
//! that still fits in the horizon). Every arc strictly increases time, so the
//! expanded graph is a DAG and single-source minimum-energy labels are a
//! single forward or backward sweep.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::EnergyScalar;

/// Identifier of a road-network node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// What a node may host: nothing special, V2VC meetings, or grid charging.
/// A node has exactly one kind, so meeting and parking sets are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Plain,
    Meeting,
    Parking,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoadNode {
    pub id: NodeId,
    pub kind: NodeKind,
}

/// A road connection. Undirected edges are stored once and expanded to two
/// directed arcs when the time-space network is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoadArc<E> {
    pub tail: NodeId,
    pub head: NodeId,
    /// Total energy to traverse the arc.
    #[serde(rename = "e_a")]
    pub energy: E,
    /// Time steps to traverse the arc.
    #[serde(rename = "d_a")]
    pub duration: u32,
    pub directed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoadNetwork<E> {
    pub nodes: Vec<RoadNode>,
    pub arcs: Vec<RoadArc<E>>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("horizon must be at least 1, got {0}")]
    HorizonTooShort(u32),
    #[error("node id {0} appears more than once")]
    DuplicateNode(NodeId),
    #[error("arc endpoint {0} is not a road node")]
    UnknownEndpoint(NodeId),
    #[error("arc {tail}->{head} has negative energy")]
    NegativeEnergy { tail: NodeId, head: NodeId },
    #[error("arc {tail}->{head} has zero duration")]
    ZeroDuration { tail: NodeId, head: NodeId },
    #[error("state ({node}, {t}) does not exist in the time-space network")]
    UnknownState { node: NodeId, t: u32 },
}

impl<E: EnergyScalar> RoadNetwork<E> {
    /// Checks the structural invariants: unique node ids, known endpoints,
    /// non-negative energies, positive durations.
    pub fn check(&self) -> Result<(), GraphError> {
        let mut seen = std::collections::BTreeSet::new();
        for node in &self.nodes {
            if !seen.insert(node.id) {
                return Err(GraphError::DuplicateNode(node.id));
            }
        }
        for arc in &self.arcs {
            for end in [arc.tail, arc.head] {
                if !seen.contains(&end) {
                    return Err(GraphError::UnknownEndpoint(end));
                }
            }
            if arc.energy < E::zero() {
                return Err(GraphError::NegativeEnergy { tail: arc.tail, head: arc.head });
            }
            if arc.duration == 0 {
                return Err(GraphError::ZeroDuration { tail: arc.tail, head: arc.head });
            }
        }
        Ok(())
    }

    /// Dense index of a node id, if present.
    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node_kind(&self, id: NodeId) -> Option<NodeKind> {
        self.nodes.iter().find(|n| n.id == id).map(|n| n.kind)
    }

    /// Meeting-point node ids in declaration order.
    pub fn meeting_nodes(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Meeting).map(|n| n.id).collect()
    }

    /// Parking-station node ids in declaration order.
    pub fn parking_nodes(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Parking).map(|n| n.id).collect()
    }

    /// Directed arcs after expanding undirected edges (forward copy first).
    pub fn directed_arcs(&self) -> Vec<(NodeId, NodeId, E, u32)> {
        let mut out = Vec::with_capacity(self.arcs.len() * 2);
        for arc in &self.arcs {
            out.push((arc.tail, arc.head, arc.energy, arc.duration));
            if !arc.directed {
                out.push((arc.head, arc.tail, arc.energy, arc.duration));
            }
        }
        out
    }
}

/// A (node, time) state of the time-space network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TsState {
    pub node: NodeId,
    pub t: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsArcKind {
    Waiting,
    Travel,
}

/// Arc of the time-space network. `tail`/`head` are dense state indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsArc<E> {
    pub tail: u32,
    pub head: u32,
    pub kind: TsArcKind,
    /// Traversal energy: zero on waiting arcs, the road arc's energy on
    /// travel arcs. Charging is modeled by decision variables, not arc cost.
    pub energy: E,
    /// Index into `RoadNetwork::directed_arcs()` for travel arcs.
    pub road_arc: Option<u32>,
}

/// Time expansion of a road network over `horizon` steps.
///
/// States are indexed `node_index * horizon + t`. Arcs are laid out with all
/// waiting arcs first (by node, then departure time), then travel arcs (by
/// directed road arc, then departure time); several index maps below rely on
/// that layout.
#[derive(Debug, Clone)]
pub struct TimeSpaceNetwork<E> {
    pub horizon: u32,
    node_ids: Vec<NodeId>,
    pub arcs: Vec<TsArc<E>>,
    /// Arc indices entering each state.
    in_arcs: Vec<Vec<u32>>,
    /// Arc indices leaving each state.
    out_arcs: Vec<Vec<u32>>,
    /// Start of each directed road arc's travel-arc block.
    travel_offsets: Vec<u32>,
    waiting_count: u32,
}

impl<E: EnergyScalar> TimeSpaceNetwork<E> {
    /// Builds the time-space network. Counts follow directly from the layout:
    /// one waiting arc per (node, t) with t <= horizon-2 and one travel arc
    /// per directed road arc per departure time t with t + duration <= horizon-1.
    pub fn expand(road: &RoadNetwork<E>, horizon: u32) -> Result<Self, GraphError> {
        if horizon < 1 {
            return Err(GraphError::HorizonTooShort(horizon));
        }
        road.check()?;
        let n = road.nodes.len();
        let node_ids: Vec<NodeId> = road.nodes.iter().map(|nd| nd.id).collect();
        let state_count = n * horizon as usize;
        let mut arcs = Vec::new();
        for (vi, _) in node_ids.iter().enumerate() {
            for t in 0..horizon.saturating_sub(1) {
                let tail = vi as u32 * horizon + t;
                arcs.push(TsArc {
                    tail,
                    head: tail + 1,
                    kind: TsArcKind::Waiting,
                    energy: E::zero(),
                    road_arc: None,
                });
            }
        }
        let waiting_count = arcs.len() as u32;
        let directed = road.directed_arcs();
        let mut travel_offsets = Vec::with_capacity(directed.len() + 1);
        for (k, (tail_id, head_id, energy, duration)) in directed.iter().enumerate() {
            travel_offsets.push(arcs.len() as u32);
            let vi = road.node_index(*tail_id).unwrap() as u32;
            let wi = road.node_index(*head_id).unwrap() as u32;
            if *duration < horizon {
                for t in 0..(horizon - duration) {
                    arcs.push(TsArc {
                        tail: vi * horizon + t,
                        head: wi * horizon + t + duration,
                        kind: TsArcKind::Travel,
                        energy: *energy,
                        road_arc: Some(k as u32),
                    });
                }
            }
        }
        travel_offsets.push(arcs.len() as u32);

        let mut in_arcs = vec![Vec::new(); state_count];
        let mut out_arcs = vec![Vec::new(); state_count];
        for (idx, arc) in arcs.iter().enumerate() {
            out_arcs[arc.tail as usize].push(idx as u32);
            in_arcs[arc.head as usize].push(idx as u32);
        }
        Ok(Self { horizon, node_ids, arcs, in_arcs, out_arcs, travel_offsets, waiting_count })
    }

    pub fn state_count(&self) -> usize {
        self.node_ids.len() * self.horizon as usize
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_ids.iter().position(|n| *n == id)
    }

    pub fn state_index(&self, state: TsState) -> Result<usize, GraphError> {
        let vi = self
            .node_index(state.node)
            .ok_or(GraphError::UnknownState { node: state.node, t: state.t })?;
        if state.t >= self.horizon {
            return Err(GraphError::UnknownState { node: state.node, t: state.t });
        }
        Ok(vi * self.horizon as usize + state.t as usize)
    }

    pub fn state_of(&self, index: usize) -> TsState {
        let h = self.horizon as usize;
        TsState { node: self.node_ids[index / h], t: (index % h) as u32 }
    }

    pub fn in_arcs(&self, state: usize) -> &[u32] {
        &self.in_arcs[state]
    }

    pub fn out_arcs(&self, state: usize) -> &[u32] {
        &self.out_arcs[state]
    }

    /// Departure time of an arc.
    pub fn arc_tail_time(&self, arc: u32) -> u32 {
        self.arcs[arc as usize].tail % self.horizon
    }

    /// Arrival time of an arc.
    pub fn arc_head_time(&self, arc: u32) -> u32 {
        self.arcs[arc as usize].head % self.horizon
    }

    /// Index of the waiting arc leaving (node, t), for t <= horizon-2.
    pub fn waiting_arc(&self, node_index: usize, t: u32) -> Option<u32> {
        if t + 1 >= self.horizon {
            return None;
        }
        Some(node_index as u32 * (self.horizon - 1) + t)
    }

    pub fn waiting_arc_count(&self) -> u32 {
        self.waiting_count
    }

    /// Minimum-energy labels from a single origin state, over all paths that
    /// respect time. Waiting is free, so for fixed node the labels are
    /// non-increasing in t once the node is reachable.
    pub fn min_energy_forward(&self, origin: TsState) -> Result<LabelTable<E>, GraphError> {
        let start = self.state_index(origin)?;
        let mut labels = vec![None; self.state_count()];
        labels[start] = Some(E::zero());
        // Arcs sorted by departure time form a topological order of the DAG.
        let mut order: Vec<u32> = (0..self.arcs.len() as u32).collect();
        order.sort_by_key(|&a| (self.arc_tail_time(a), a));
        for a in order {
            let arc = &self.arcs[a as usize];
            if let Some(cur) = labels[arc.tail as usize] {
                let cand = cur + arc.energy;
                let slot = &mut labels[arc.head as usize];
                if slot.map_or(true, |best| cand < best) {
                    *slot = Some(cand);
                }
            }
        }
        Ok(LabelTable { direction: LabelDirection::ForwardFromSource, labels })
    }

    /// Minimum-energy labels from every state to a single sink state.
    pub fn min_energy_backward(&self, sink: TsState) -> Result<LabelTable<E>, GraphError> {
        let end = self.state_index(sink)?;
        let mut labels = vec![None; self.state_count()];
        labels[end] = Some(E::zero());
        let mut order: Vec<u32> = (0..self.arcs.len() as u32).collect();
        order.sort_by_key(|&a| (std::cmp::Reverse(self.arc_head_time(a)), a));
        for a in order {
            let arc = &self.arcs[a as usize];
            if let Some(cur) = labels[arc.head as usize] {
                let cand = cur + arc.energy;
                let slot = &mut labels[arc.tail as usize];
                if slot.map_or(true, |best| cand < best) {
                    *slot = Some(cand);
                }
            }
        }
        Ok(LabelTable { direction: LabelDirection::BackwardToSink, labels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelDirection {
    ForwardFromSource,
    BackwardToSink,
}

/// Per-state minimum traversal energy from an origin (or to a sink).
/// `None` marks unreachable states.
#[derive(Debug, Clone)]
pub struct LabelTable<E> {
    pub direction: LabelDirection,
    labels: Vec<Option<E>>,
}

impl<E: EnergyScalar> LabelTable<E> {
    pub fn get(&self, state_index: usize) -> Option<E> {
        self.labels[state_index]
    }

    pub fn lookup(&self, ts: &TimeSpaceNetwork<E>, state: TsState) -> Option<E> {
        ts.state_index(state).ok().and_then(|i| self.labels[i])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// True iff the EV can be at (dest, horizon-1) having spent at most `soc`,
/// starting from (start, 0). Traversal only drains charge, so checking the
/// endpoint label is enough; no intermediate state can be cheaper to pass.
pub fn can_reach_direct<E: EnergyScalar>(
    ts: &TimeSpaceNetwork<E>,
    start: NodeId,
    dest: NodeId,
    soc: E,
) -> Result<bool, GraphError> {
    let labels = ts.min_energy_forward(TsState { node: start, t: 0 })?;
    let at_dest = labels.lookup(ts, TsState { node: dest, t: ts.horizon - 1 });
    Ok(at_dest.map_or(false, |cost| cost <= soc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node_line(energy: i64, duration: u32) -> RoadNetwork<i64> {
        RoadNetwork {
            nodes: vec![
                RoadNode { id: NodeId(0), kind: NodeKind::Plain },
                RoadNode { id: NodeId(1), kind: NodeKind::Plain },
            ],
            arcs: vec![RoadArc {
                tail: NodeId(0),
                head: NodeId(1),
                energy,
                duration,
                directed: false,
            }],
        }
    }

    /// Exhaustive path enumeration, the independent oracle for label values.
    fn brute_force_min_energy(
        ts: &TimeSpaceNetwork<i64>,
        from: TsState,
        to: TsState,
    ) -> Option<i64> {
        fn explore(
            ts: &TimeSpaceNetwork<i64>,
            at: usize,
            target: usize,
            spent: i64,
            best: &mut Option<i64>,
        ) {
            if at == target && best.map_or(true, |b| spent < b) {
                *best = Some(spent);
            }
            for &a in ts.out_arcs(at) {
                let arc = &ts.arcs[a as usize];
                explore(ts, arc.head as usize, target, spent + arc.energy, best);
            }
        }
        let mut best = None;
        explore(ts, ts.state_index(from).ok()?, ts.state_index(to).ok()?, 0, &mut best);
        best
    }

    #[test]
    fn two_nodes_one_edge_t2_has_4_states_4_arcs() {
        let ts = TimeSpaceNetwork::expand(&two_node_line(5, 1), 2).unwrap();
        assert_eq!(ts.state_count(), 4);
        assert_eq!(ts.arc_count(), 4);
        let waiting = ts.arcs.iter().filter(|a| a.kind == TsArcKind::Waiting).count();
        assert_eq!(waiting, 2);
        assert_eq!(ts.arc_count() - waiting, 2);
    }

    #[test]
    fn horizon_one_means_no_arcs() {
        let ts = TimeSpaceNetwork::expand(&two_node_line(5, 1), 1).unwrap();
        assert_eq!(ts.state_count(), 2);
        assert_eq!(ts.arc_count(), 0);
    }

    #[test]
    fn two_nodes_t10_has_36_arcs() {
        let ts = TimeSpaceNetwork::expand(&two_node_line(5, 1), 10).unwrap();
        assert_eq!(ts.waiting_arc_count(), 18);
        assert_eq!(ts.arc_count(), 36);
    }

    #[test]
    fn rejects_horizon_zero() {
        assert!(matches!(
            TimeSpaceNetwork::expand(&two_node_line(5, 1), 0),
            Err(GraphError::HorizonTooShort(0))
        ));
    }

    #[test]
    fn all_arcs_go_forward_in_time() {
        let ts = TimeSpaceNetwork::expand(&two_node_line(3, 2), 7).unwrap();
        for a in 0..ts.arc_count() as u32 {
            assert!(ts.arc_head_time(a) > ts.arc_tail_time(a));
        }
    }

    #[test]
    fn forward_labels_on_the_line() {
        let ts = TimeSpaceNetwork::expand(&two_node_line(5, 1), 4).unwrap();
        let labels = ts.min_energy_forward(TsState { node: NodeId(0), t: 0 }).unwrap();
        assert_eq!(labels.lookup(&ts, TsState { node: NodeId(0), t: 0 }), Some(0));
        assert_eq!(labels.lookup(&ts, TsState { node: NodeId(1), t: 1 }), Some(5));
        assert_eq!(labels.lookup(&ts, TsState { node: NodeId(1), t: 0 }), None);
    }

    #[test]
    fn backward_labels_on_the_line() {
        let horizon = 6;
        let ts = TimeSpaceNetwork::expand(&two_node_line(5, 1), horizon).unwrap();
        let sink = TsState { node: NodeId(1), t: horizon - 1 };
        let labels = ts.min_energy_backward(sink).unwrap();
        assert_eq!(labels.lookup(&ts, sink), Some(0));
        // Waiting at the sink node is free at every earlier step.
        for t in 0..horizon - 1 {
            assert_eq!(labels.lookup(&ts, TsState { node: NodeId(1), t }), Some(0));
        }
        assert_eq!(labels.lookup(&ts, TsState { node: NodeId(0), t: horizon - 2 }), Some(5));
    }

    #[test]
    fn can_reach_direct_cases() {
        let ts = TimeSpaceNetwork::expand(&two_node_line(5, 1), 10).unwrap();
        // Zero-length trip.
        assert!(can_reach_direct(&ts, NodeId(0), NodeId(0), 0).unwrap());
        // 4 < 5: not enough charge.
        assert!(!can_reach_direct(&ts, NodeId(0), NodeId(1), 4).unwrap());
        let tight = TimeSpaceNetwork::expand(&two_node_line(5, 1), 2).unwrap();
        assert!(can_reach_direct(&tight, NodeId(0), NodeId(1), 5).unwrap());
    }

    fn random_road(rng: &mut impl rand::Rng) -> RoadNetwork<i64> {
        use rand::seq::SliceRandom;
        let n = rng.gen_range(1..=6usize);
        let nodes = (0..n)
            .map(|i| RoadNode {
                id: NodeId(i as u32),
                kind: *[NodeKind::Plain, NodeKind::Meeting, NodeKind::Parking]
                    .choose(rng)
                    .unwrap(),
            })
            .collect();
        let m = rng.gen_range(0..=8usize);
        let arcs = (0..m)
            .map(|_| RoadArc {
                tail: NodeId(rng.gen_range(0..n) as u32),
                head: NodeId(rng.gen_range(0..n) as u32),
                energy: rng.gen_range(0..10),
                duration: rng.gen_range(1..4),
                directed: rng.gen_bool(0.5),
            })
            .collect();
        RoadNetwork { nodes, arcs }
    }

    #[test]
    fn arc_count_matches_closed_form_on_random_networks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let road = random_road(&mut rng);
            let horizon = rng.gen_range(1..=8u32);
            let ts = TimeSpaceNetwork::expand(&road, horizon).unwrap();
            let waiting = road.nodes.len() as u64 * (horizon as u64 - 1).max(0);
            let travel: u64 = road
                .directed_arcs()
                .iter()
                .map(|&(_, _, _, d)| horizon.saturating_sub(d) as u64)
                .sum();
            assert_eq!(ts.arc_count() as u64, waiting + travel);
            for a in 0..ts.arc_count() as u32 {
                assert!(ts.arc_head_time(a) > ts.arc_tail_time(a));
            }
        }
    }

    #[test]
    fn forward_labels_match_exhaustive_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let road = random_road(&mut rng);
            let horizon = rng.gen_range(1..=6u32);
            let ts = TimeSpaceNetwork::expand(&road, horizon).unwrap();
            let origin = TsState { node: road.nodes[0].id, t: 0 };
            let labels = ts.min_energy_forward(origin).unwrap();
            for s in 0..ts.state_count() {
                let state = ts.state_of(s);
                assert_eq!(
                    labels.get(s),
                    brute_force_min_energy(&ts, origin, state),
                    "state {state:?}"
                );
            }
            // Triangle relaxation on every arc with finite endpoints.
            for arc in &ts.arcs {
                if let (Some(lu), Some(lw)) =
                    (labels.get(arc.tail as usize), labels.get(arc.head as usize))
                {
                    assert!(lw <= lu + arc.energy);
                }
            }
        }
    }
}
