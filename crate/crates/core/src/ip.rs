//! Exact integer-program assembly: variable layout, sparse constraint
//! matrix, bounds, and the energy objective.
//!
//! Columns are laid out in contiguous blocks: routing variables X (one per
//! EV per time-space arc), grid-charge variables Y (EV x parking x step),
//! transfer variables Z (receiver x giver x meeting x step), then one slack
//! block per constraint family. Every constraint is an equality `A x = b`
//! with integer bounds `l <= x <= u`; inequalities are absorbed by the
//! slacks, whose bounds carry the inequality direction.
//!
//! Row families, in order: path (flow conservation per EV per state),
//! battery (accumulated energy balance per EV per step), grid-charge link
//! (Y <= X at parking), transfer links (Z <= X for receiver and giver),
//! unidirectionality (Z_ij + Z_ji <= 1 per unordered pair), and the two
//! simultaneity families (give to at most one, receive from at most one).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, NodeKind, TimeSpaceNetwork, TsArcKind, TsState};
use crate::scalar::EnergyScalar;
use crate::scenario::{EvId, Scenario};

/// What a column means. The layout is pure index arithmetic, so columns and
/// variable identities convert both ways in O(1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarId {
    /// EV `ev` traverses time-space arc `arc`.
    X { ev: u32, arc: u32 },
    /// EV `ev` draws from the grid at parking index `park` during [t, t+1].
    Y { ev: u32, park: u32, t: u32 },
    /// EV `recv` is charged by EV `giver` at meeting index `meet` during [t, t+1].
    Z { recv: u32, giver: u32, meet: u32, t: u32 },
    /// Negated battery level of `ev` at step `t` (t in 1..=T-1).
    SlackBattery { ev: u32, t: u32 },
    SlackGridLink { ev: u32, park: u32, t: u32 },
    SlackRecvLink { recv: u32, giver: u32, meet: u32, t: u32 },
    SlackGiveLink { recv: u32, giver: u32, meet: u32, t: u32 },
    /// Unordered pair {lo, hi}, lo < hi.
    SlackUnidirectional { lo: u32, hi: u32, meet: u32, t: u32 },
    SlackGiveSimultaneity { ev: u32, t: u32 },
    SlackRecvSimultaneity { ev: u32, t: u32 },
}

/// Column layout of the instance: block offsets plus enough of the scenario
/// shape (counts and node indices) to do all index math without the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_evs: u32,
    pub n_ts_arcs: u32,
    pub n_road_nodes: u32,
    pub horizon: u32,
    /// Dense road-node indices of parking stations, declaration order.
    pub parking_nodes: Vec<u32>,
    /// Dense road-node indices of meeting points, declaration order.
    pub meeting_nodes: Vec<u32>,
}

impl VariableLayout {
    pub fn new<E: EnergyScalar>(scenario: &Scenario<E>) -> Self {
        let parking_nodes = scenario
            .road
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Parking)
            .map(|(i, _)| i as u32)
            .collect();
        let meeting_nodes = scenario
            .road
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Meeting)
            .map(|(i, _)| i as u32)
            .collect();
        let horizon = scenario.horizon;
        let n_road_nodes = scenario.road.nodes.len() as u32;
        let waiting = n_road_nodes as u64 * (horizon as u64 - 1);
        let travel: u64 = scenario
            .road
            .directed_arcs()
            .iter()
            .map(|&(_, _, _, d)| horizon.saturating_sub(d) as u64)
            .sum();
        Self {
            n_evs: scenario.evs.len() as u32,
            n_ts_arcs: (waiting + travel) as u32,
            n_road_nodes,
            horizon,
            parking_nodes,
            meeting_nodes,
        }
    }

    fn steps(&self) -> u64 {
        self.horizon as u64 - 1
    }

    pub fn n_parking(&self) -> u64 {
        self.parking_nodes.len() as u64
    }

    pub fn n_meeting(&self) -> u64 {
        self.meeting_nodes.len() as u64
    }

    pub fn x_count(&self) -> u64 {
        self.n_evs as u64 * self.n_ts_arcs as u64
    }

    pub fn y_count(&self) -> u64 {
        self.n_evs as u64 * self.n_parking() * self.steps()
    }

    pub fn z_count(&self) -> u64 {
        let v = self.n_evs as u64;
        v * v.saturating_sub(1) * self.n_meeting() * self.steps()
    }

    /// Number of binary (X, Y, Z) columns; slacks start here.
    pub fn binary_count(&self) -> u64 {
        self.x_count() + self.y_count() + self.z_count()
    }

    pub fn total_cols(&self) -> u64 {
        let v = self.n_evs as u64;
        let pairs = v * v.saturating_sub(1) / 2;
        self.binary_count()
            + v * self.steps()                                  // battery
            + self.y_count()                                    // grid link
            + 2 * self.z_count()                                // transfer links
            + pairs * self.n_meeting() * self.steps()           // unidirectional
            + 2 * v * self.steps()                              // simultaneity
    }

    pub fn total_rows(&self) -> u64 {
        let v = self.n_evs as u64;
        let states = self.n_road_nodes as u64 * self.horizon as u64;
        let pairs = v * v.saturating_sub(1) / 2;
        v * states
            + v * self.steps()
            + self.y_count()
            + 2 * self.z_count()
            + pairs * self.n_meeting() * self.steps()
            + 2 * v * self.steps()
    }

    pub fn col_x(&self, ev: u32, arc: u32) -> u64 {
        ev as u64 * self.n_ts_arcs as u64 + arc as u64
    }

    pub fn col_y(&self, ev: u32, park: u32, t: u32) -> u64 {
        self.x_count()
            + (ev as u64 * self.n_parking() + park as u64) * self.steps()
            + t as u64
    }

    /// Giver index skipping the receiver itself.
    fn giver_slot(recv: u32, giver: u32) -> u64 {
        debug_assert_ne!(recv, giver);
        if giver < recv { giver as u64 } else { giver as u64 - 1 }
    }

    fn z_block_index(&self, recv: u32, giver: u32, meet: u32, t: u32) -> u64 {
        let v1 = self.n_evs as u64 - 1;
        ((recv as u64 * v1 + Self::giver_slot(recv, giver)) * self.n_meeting() + meet as u64)
            * self.steps()
            + t as u64
    }

    pub fn col_z(&self, recv: u32, giver: u32, meet: u32, t: u32) -> u64 {
        self.x_count() + self.y_count() + self.z_block_index(recv, giver, meet, t)
    }

    pub fn col_slack_battery(&self, ev: u32, t: u32) -> u64 {
        debug_assert!((1..self.horizon).contains(&t));
        self.binary_count() + ev as u64 * self.steps() + (t as u64 - 1)
    }

    pub fn col_slack_grid_link(&self, ev: u32, park: u32, t: u32) -> u64 {
        self.binary_count()
            + self.n_evs as u64 * self.steps()
            + (ev as u64 * self.n_parking() + park as u64) * self.steps()
            + t as u64
    }

    pub fn col_slack_recv_link(&self, recv: u32, giver: u32, meet: u32, t: u32) -> u64 {
        self.slack_recv_link_offset() + self.z_block_index(recv, giver, meet, t)
    }

    fn slack_recv_link_offset(&self) -> u64 {
        self.binary_count() + self.n_evs as u64 * self.steps() + self.y_count()
    }

    pub fn col_slack_give_link(&self, recv: u32, giver: u32, meet: u32, t: u32) -> u64 {
        self.slack_recv_link_offset() + self.z_count() + self.z_block_index(recv, giver, meet, t)
    }

    /// Index of the unordered pair {lo, hi} with lo < hi in lexicographic order.
    fn pair_index(&self, lo: u32, hi: u32) -> u64 {
        debug_assert!(lo < hi);
        let v = self.n_evs as u64;
        let lo = lo as u64;
        let hi = hi as u64;
        lo * v - lo * (lo + 1) / 2 + (hi - lo - 1)
    }

    pub fn col_slack_unidirectional(&self, a: u32, b: u32, meet: u32, t: u32) -> u64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.slack_recv_link_offset()
            + 2 * self.z_count()
            + (self.pair_index(lo, hi) * self.n_meeting() + meet as u64) * self.steps()
            + t as u64
    }

    fn slack_give_sim_offset(&self) -> u64 {
        let v = self.n_evs as u64;
        let pairs = v * v.saturating_sub(1) / 2;
        self.slack_recv_link_offset()
            + 2 * self.z_count()
            + pairs * self.n_meeting() * self.steps()
    }

    pub fn col_slack_give_sim(&self, ev: u32, t: u32) -> u64 {
        self.slack_give_sim_offset() + ev as u64 * self.steps() + t as u64
    }

    pub fn col_slack_recv_sim(&self, ev: u32, t: u32) -> u64 {
        self.slack_give_sim_offset()
            + self.n_evs as u64 * self.steps()
            + ev as u64 * self.steps()
            + t as u64
    }

    /// Inverse of the column maps.
    pub fn var(&self, col: u64) -> VarId {
        let steps = self.steps();
        let v1 = self.n_evs as u64 - 1;
        if col < self.x_count() {
            let arcs = self.n_ts_arcs as u64;
            return VarId::X { ev: (col / arcs) as u32, arc: (col % arcs) as u32 };
        }
        let mut c = col - self.x_count();
        if c < self.y_count() {
            let t = c % steps;
            let rest = c / steps;
            return VarId::Y {
                ev: (rest / self.n_parking()) as u32,
                park: (rest % self.n_parking()) as u32,
                t: t as u32,
            };
        }
        c -= self.y_count();
        if c < self.z_count() {
            let (recv, giver, meet, t) = self.decode_z_block(c, v1);
            return VarId::Z { recv, giver, meet, t };
        }
        c -= self.z_count();
        if c < self.n_evs as u64 * steps {
            return VarId::SlackBattery {
                ev: (c / steps) as u32,
                t: (c % steps) as u32 + 1,
            };
        }
        c -= self.n_evs as u64 * steps;
        if c < self.y_count() {
            let t = c % steps;
            let rest = c / steps;
            return VarId::SlackGridLink {
                ev: (rest / self.n_parking()) as u32,
                park: (rest % self.n_parking()) as u32,
                t: t as u32,
            };
        }
        c -= self.y_count();
        if c < self.z_count() {
            let (recv, giver, meet, t) = self.decode_z_block(c, v1);
            return VarId::SlackRecvLink { recv, giver, meet, t };
        }
        c -= self.z_count();
        if c < self.z_count() {
            let (recv, giver, meet, t) = self.decode_z_block(c, v1);
            return VarId::SlackGiveLink { recv, giver, meet, t };
        }
        c -= self.z_count();
        let v = self.n_evs as u64;
        let pairs = v * v.saturating_sub(1) / 2;
        if c < pairs * self.n_meeting() * steps {
            let t = (c % steps) as u32;
            let rest = c / steps;
            let meet = (rest % self.n_meeting()) as u32;
            let mut pair = rest / self.n_meeting();
            let mut lo = 0u64;
            while pair >= v - lo - 1 {
                pair -= v - lo - 1;
                lo += 1;
            }
            return VarId::SlackUnidirectional {
                lo: lo as u32,
                hi: (lo + 1 + pair) as u32,
                meet,
                t,
            };
        }
        c -= pairs * self.n_meeting() * steps;
        if c < v * steps {
            return VarId::SlackGiveSimultaneity { ev: (c / steps) as u32, t: (c % steps) as u32 };
        }
        c -= v * steps;
        debug_assert!(c < v * steps, "column {col} out of range");
        VarId::SlackRecvSimultaneity { ev: (c / steps) as u32, t: (c % steps) as u32 }
    }

    fn decode_z_block(&self, c: u64, v1: u64) -> (u32, u32, u32, u32) {
        let steps = self.steps();
        let t = (c % steps) as u32;
        let rest = c / steps;
        let meet = (rest % self.n_meeting()) as u32;
        let rest = rest / self.n_meeting();
        let recv = (rest / v1) as u32;
        let slot = (rest % v1) as u32;
        let giver = if slot < recv { slot } else { slot + 1 };
        (recv, giver, meet, t)
    }

    /// Waiting arc of a road node (by dense index) at step t. The waiting
    /// block is laid out node-major in the time-space network.
    pub fn waiting_arc(&self, node_index: u32, t: u32) -> u32 {
        node_index * (self.horizon - 1) + t
    }
}

/// Linear objective: one integer coefficient per column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveSpec<E> {
    pub coefficients: Vec<E>,
    /// `energy` (traversal plus grid draw) or `feasibility` (all zero).
    pub tag: String,
}

/// Row-major sparse integer matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMatrix<E> {
    pub rows: u64,
    pub cols: u64,
    pub triplets: Vec<(u32, u32, E)>,
}

/// The assembled integer program together with its layout and the scenario
/// it came from.
#[derive(Debug, Clone)]
pub struct IpInstance<E> {
    pub scenario: Scenario<E>,
    pub layout: VariableLayout,
    pub matrix: SparseMatrix<E>,
    pub rhs: Vec<E>,
    pub lower: Vec<E>,
    pub upper: Vec<E>,
    pub objective: ObjectiveSpec<E>,
}

/// Values of all decision variables and slacks, in column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution<E> {
    pub x: Vec<E>,
}

impl<E: EnergyScalar + Serialize> Solution<E> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serialization cannot fail")
    }
}

impl<E: EnergyScalar + serde::de::DeserializeOwned> Solution<E> {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error)]
pub enum IpError {
    #[error("scenario is invalid: {0}")]
    InvalidScenario(String),
    #[error("horizon must be at least 2 to build the program, got {0}")]
    HorizonTooShort(u32),
    #[error("instance too large to assemble: {0} columns")]
    TooLarge(u64),
    #[error("vector length {got} does not match column count {want}")]
    LengthMismatch { got: usize, want: u64 },
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Closed-form dimensions of the program, without assembling it:
/// rows = |V||N| + |V|(T-1)(3 + |P| + 5/2 (|V|-1)|M|) and
/// cols = |V||A| + |V|(T-1)(3 + 2|P| + 7/2 (|V|-1)|M|). The halves are exact
/// because |V|(|V|-1) is even.
pub fn predicted_dimensions<E: EnergyScalar>(scenario: &Scenario<E>) -> (u64, u64) {
    let layout = VariableLayout::new(scenario);
    (layout.total_rows(), layout.total_cols())
}

/// Assembles the full integer program for a valid scenario.
pub fn build_ip<E: EnergyScalar>(scenario: &Scenario<E>) -> Result<IpInstance<E>, IpError> {
    let violations = scenario.validate();
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(IpError::InvalidScenario(listed.join("; ")));
    }
    if scenario.horizon < 2 {
        return Err(IpError::HorizonTooShort(scenario.horizon));
    }
    let ts = scenario.expand()?;
    let layout = VariableLayout::new(scenario);
    let cols = layout.total_cols();
    if cols > u32::MAX as u64 {
        return Err(IpError::TooLarge(cols));
    }
    debug_assert_eq!(layout.n_ts_arcs as usize, ts.arc_count());
    let horizon = scenario.horizon;
    let n_evs = layout.n_evs;

    let mut triplets: Vec<(u32, u32, E)> = Vec::new();
    let mut rhs: Vec<E> = Vec::new();
    let mut row: u32 = 0;
    let mut push = |triplets: &mut Vec<(u32, u32, E)>, r: u32, c: u64, v: E| {
        if !v.is_zero() {
            triplets.push((r, c as u32, v));
        }
    };

    // Path rows: flow conservation per EV per time-space state.
    for ev in 0..n_evs {
        let spec = &scenario.evs[ev as usize];
        let source = ts.state_index(TsState { node: spec.start, t: 0 }).unwrap();
        let sink = ts.state_index(TsState { node: spec.dest, t: horizon - 1 }).unwrap();
        for state in 0..ts.state_count() {
            for &a in ts.in_arcs(state) {
                push(&mut triplets, row, layout.col_x(ev, a), E::one());
            }
            for &a in ts.out_arcs(state) {
                push(&mut triplets, row, layout.col_x(ev, a), -E::one());
            }
            let mut b = E::zero();
            if state == source {
                b -= E::one();
            }
            if state == sink {
                b += E::one();
            }
            rhs.push(b);
            row += 1;
        }
    }

    // Battery rows: for each step t, all arcs completed by t. Traversal
    // drains, grid charge adds e_p, a transfer adds the giver's rate to the
    // receiver and drains the giver by its own rate. The slack equals the
    // negated battery level, so its bounds [-MAXSOC, 0] keep the level in
    // [0, MAXSOC].
    let give_rate = |ev: u32| scenario.evs[ev as usize].give_rate;
    for ev in 0..n_evs {
        for t in 1..horizon {
            for (a, arc) in ts.arcs.iter().enumerate() {
                if ts.arc_head_time(a as u32) > t {
                    continue;
                }
                push(&mut triplets, row, layout.col_x(ev, a as u32), -arc.energy);
                if arc.kind != TsArcKind::Waiting {
                    continue;
                }
                let node_index = (arc.tail / horizon) as usize;
                let step = arc.tail % horizon;
                let node_id = ts.node_ids()[node_index];
                match scenario.road.nodes[node_index].kind {
                    NodeKind::Parking => {
                        let park = layout
                            .parking_nodes
                            .iter()
                            .position(|&p| p == node_index as u32)
                            .unwrap() as u32;
                        let rate = scenario.grid_rates[&node_id];
                        push(&mut triplets, row, layout.col_y(ev, park, step), rate);
                    }
                    NodeKind::Meeting => {
                        let meet = layout
                            .meeting_nodes
                            .iter()
                            .position(|&m| m == node_index as u32)
                            .unwrap() as u32;
                        for other in 0..n_evs {
                            if other == ev {
                                continue;
                            }
                            push(
                                &mut triplets,
                                row,
                                layout.col_z(ev, other, meet, step),
                                give_rate(other),
                            );
                            push(
                                &mut triplets,
                                row,
                                layout.col_z(other, ev, meet, step),
                                -give_rate(ev),
                            );
                        }
                    }
                    NodeKind::Plain => {}
                }
            }
            push(&mut triplets, row, layout.col_slack_battery(ev, t), E::one());
            rhs.push(-scenario.evs[ev as usize].soc);
            row += 1;
        }
    }

    // Grid-charge link rows: Y <= X on the parking waiting slot.
    for ev in 0..n_evs {
        for (park, &node_index) in layout.parking_nodes.iter().enumerate() {
            for t in 0..horizon - 1 {
                let wait = layout.waiting_arc(node_index, t);
                push(&mut triplets, row, layout.col_y(ev, park as u32, t), E::one());
                push(&mut triplets, row, layout.col_x(ev, wait), -E::one());
                push(&mut triplets, row, layout.col_slack_grid_link(ev, park as u32, t), E::one());
                rhs.push(E::zero());
                row += 1;
            }
        }
    }

    // Transfer link rows: receiver present, then giver present.
    for side in 0..2 {
        for recv in 0..n_evs {
            for giver in 0..n_evs {
                if giver == recv {
                    continue;
                }
                for (meet, &node_index) in layout.meeting_nodes.iter().enumerate() {
                    for t in 0..horizon - 1 {
                        let wait = layout.waiting_arc(node_index, t);
                        let z = layout.col_z(recv, giver, meet as u32, t);
                        push(&mut triplets, row, z, E::one());
                        let present = if side == 0 { recv } else { giver };
                        push(&mut triplets, row, layout.col_x(present, wait), -E::one());
                        let slack = if side == 0 {
                            layout.col_slack_recv_link(recv, giver, meet as u32, t)
                        } else {
                            layout.col_slack_give_link(recv, giver, meet as u32, t)
                        };
                        push(&mut triplets, row, slack, E::one());
                        rhs.push(E::zero());
                        row += 1;
                    }
                }
            }
        }
    }

    // Unidirectionality rows: Z_ij + Z_ji <= 1 per unordered pair.
    for lo in 0..n_evs {
        for hi in lo + 1..n_evs {
            for meet in 0..layout.meeting_nodes.len() as u32 {
                for t in 0..horizon - 1 {
                    push(&mut triplets, row, layout.col_z(lo, hi, meet, t), E::one());
                    push(&mut triplets, row, layout.col_z(hi, lo, meet, t), E::one());
                    push(
                        &mut triplets,
                        row,
                        layout.col_slack_unidirectional(lo, hi, meet, t),
                        E::one(),
                    );
                    rhs.push(E::one());
                    row += 1;
                }
            }
        }
    }

    // Give-simultaneity rows: each EV charges at most one EV per step.
    for ev in 0..n_evs {
        for t in 0..horizon - 1 {
            push(&mut triplets, row, layout.col_slack_give_sim(ev, t), E::one());
            for recv in 0..n_evs {
                if recv == ev {
                    continue;
                }
                for meet in 0..layout.meeting_nodes.len() as u32 {
                    push(&mut triplets, row, layout.col_z(recv, ev, meet, t), E::one());
                }
            }
            rhs.push(E::zero());
            row += 1;
        }
    }

    // Receive-simultaneity rows: each EV is charged by at most one EV per step.
    for ev in 0..n_evs {
        for t in 0..horizon - 1 {
            push(&mut triplets, row, layout.col_slack_recv_sim(ev, t), E::one());
            for giver in 0..n_evs {
                if giver == ev {
                    continue;
                }
                for meet in 0..layout.meeting_nodes.len() as u32 {
                    push(&mut triplets, row, layout.col_z(ev, giver, meet, t), E::one());
                }
            }
            rhs.push(E::zero());
            row += 1;
        }
    }

    debug_assert_eq!(row as u64, layout.total_rows());

    // Bounds: binaries in [0,1]; slack bounds carry the inequality senses.
    let n_cols = cols as usize;
    let mut lower = vec![E::zero(); n_cols];
    let mut upper = vec![E::one(); n_cols];
    for ev in 0..n_evs {
        for t in 1..horizon {
            let c = layout.col_slack_battery(ev, t) as usize;
            lower[c] = -scenario.evs[ev as usize].capacity;
            upper[c] = E::zero();
        }
        for t in 0..horizon - 1 {
            for c in [layout.col_slack_give_sim(ev, t), layout.col_slack_recv_sim(ev, t)] {
                lower[c as usize] = -E::one();
                upper[c as usize] = E::zero();
            }
        }
    }

    let objective = energy_objective(scenario, &layout, &ts);
    Ok(IpInstance {
        scenario: scenario.clone(),
        layout,
        matrix: SparseMatrix { rows: row as u64, cols, triplets },
        rhs,
        lower,
        upper,
        objective,
    })
}

/// Default objective: energy spent, i.e. traversal energy on X travel
/// columns plus the grid rate on Y columns. Transfers move energy inside the
/// fleet and carry no cost.
fn energy_objective<E: EnergyScalar>(
    scenario: &Scenario<E>,
    layout: &VariableLayout,
    ts: &TimeSpaceNetwork<E>,
) -> ObjectiveSpec<E> {
    let mut coefficients = vec![E::zero(); layout.total_cols() as usize];
    for ev in 0..layout.n_evs {
        for (a, arc) in ts.arcs.iter().enumerate() {
            if arc.kind == TsArcKind::Travel {
                coefficients[layout.col_x(ev, a as u32) as usize] = arc.energy;
            }
        }
        for (park, &node_index) in layout.parking_nodes.iter().enumerate() {
            let node_id = ts.node_ids()[node_index as usize];
            let rate = scenario.grid_rates[&node_id];
            for t in 0..layout.horizon - 1 {
                coefficients[layout.col_y(ev, park as u32, t) as usize] = rate;
            }
        }
    }
    ObjectiveSpec { coefficients, tag: "energy".into() }
}

impl<E: EnergyScalar> IpInstance<E> {
    /// Replaces the objective with the all-zero feasibility objective.
    pub fn with_feasibility_objective(mut self) -> Self {
        self.objective = ObjectiveSpec {
            coefficients: vec![E::zero(); self.matrix.cols as usize],
            tag: "feasibility".into(),
        };
        self
    }

    pub fn eval_objective(&self, x: &[E]) -> Result<E, IpError> {
        if x.len() as u64 != self.matrix.cols {
            return Err(IpError::LengthMismatch { got: x.len(), want: self.matrix.cols });
        }
        Ok(self
            .objective
            .coefficients
            .iter()
            .zip(x.iter())
            .fold(E::zero(), |acc, (&c, &v)| acc + c * v))
    }

    /// Fills in every slack entry of `x` from its defining row, given the
    /// binary part. Each slack column appears in exactly one row with
    /// coefficient +1, so the values are determined, never searched.
    pub fn determine_slacks(&self, x: &mut [E]) -> Result<(), IpError> {
        if x.len() as u64 != self.matrix.cols {
            return Err(IpError::LengthMismatch { got: x.len(), want: self.matrix.cols });
        }
        let first_slack = self.layout.binary_count();
        let mut partial = vec![E::zero(); self.matrix.rows as usize];
        let mut slack_of_row: Vec<Option<u32>> = vec![None; self.matrix.rows as usize];
        for &(r, c, v) in &self.matrix.triplets {
            if (c as u64) < first_slack {
                partial[r as usize] += v * x[c as usize];
            } else {
                slack_of_row[r as usize] = Some(c);
            }
        }
        for (r, slack) in slack_of_row.iter().enumerate() {
            if let Some(c) = slack {
                x[*c as usize] = self.rhs[r] - partial[r];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{RoadArc, RoadNode, RoadNetwork};
    use std::collections::BTreeMap;

    fn one_ev_two_plain_nodes() -> Scenario<i64> {
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
                soc: 5,
                capacity: 10,
                give_rate: 1,
            }],
            grid_rates: BTreeMap::new(),
            horizon: 2,
        }
    }

    fn q1_reconstruction() -> Scenario<i64> {
        Scenario {
            road: RoadNetwork {
                nodes: vec![
                    RoadNode { id: NodeId(0), kind: NodeKind::Meeting },
                    RoadNode { id: NodeId(1), kind: NodeKind::Meeting },
                ],
                arcs: vec![RoadArc {
                    tail: NodeId(0),
                    head: NodeId(1),
                    energy: 5,
                    duration: 1,
                    directed: false,
                }],
            },
            evs: vec![
                Ev { id: EvId(0), start: NodeId(0), dest: NodeId(1), soc: 10, capacity: 20, give_rate: 1 },
                Ev { id: EvId(1), start: NodeId(0), dest: NodeId(1), soc: 4, capacity: 20, give_rate: 1 },
            ],
            grid_rates: BTreeMap::new(),
            horizon: 10,
        }
    }

    use crate::scenario::Ev;

    #[test]
    fn toy_instance_is_seven_by_seven() {
        let scenario = one_ev_two_plain_nodes();
        assert_eq!(predicted_dimensions(&scenario), (7, 7));
        let instance = build_ip(&scenario).unwrap();
        assert_eq!(instance.matrix.rows, 7);
        assert_eq!(instance.matrix.cols, 7);
        // 4 X columns and 3 slacks (battery + two simultaneity).
        assert_eq!(instance.layout.binary_count(), 4);
    }

    #[test]
    fn q1_reconstruction_has_252_columns() {
        let scenario = q1_reconstruction();
        let (rows, cols) = predicted_dimensions(&scenario);
        assert_eq!(cols, 252);
        assert_eq!(rows, 184);
        let instance = build_ip(&scenario).unwrap();
        assert_eq!(instance.matrix.cols, 252);
        assert_eq!(instance.matrix.rows, 184);
    }

    #[test]
    fn no_meetings_or_parking_means_no_y_or_z_columns() {
        let scenario = one_ev_two_plain_nodes();
        let layout = VariableLayout::new(&scenario);
        assert_eq!(layout.y_count(), 0);
        assert_eq!(layout.z_count(), 0);
        // Battery rows then carry only X terms plus the slack.
        let instance = build_ip(&scenario).unwrap();
        let battery_row = instance.layout.n_evs as u64 * 4; // first row after path rows
        for &(r, c, _) in &instance.matrix.triplets {
            if r as u64 == battery_row {
                match instance.layout.var(c as u64) {
                    VarId::X { .. } | VarId::SlackBattery { .. } => {}
                    other => panic!("unexpected {other:?} in battery row"),
                }
            }
        }
    }

    #[test]
    fn rejects_too_short_horizon() {
        let mut scenario = one_ev_two_plain_nodes();
        scenario.horizon = 1;
        // A moving EV with T = 1 is already an invalid scenario.
        assert!(matches!(build_ip(&scenario), Err(IpError::InvalidScenario(_))));
        scenario.evs[0].dest = scenario.evs[0].start;
        assert!(matches!(build_ip(&scenario), Err(IpError::HorizonTooShort(1))));
    }

    #[test]
    fn column_inverse_round_trips() {
        let scenario = q1_reconstruction();
        let mut with_parking = scenario.clone();
        with_parking.road.nodes.push(RoadNode { id: NodeId(2), kind: NodeKind::Parking });
        with_parking.road.arcs.push(RoadArc {
            tail: NodeId(1),
            head: NodeId(2),
            energy: 2,
            duration: 1,
            directed: false,
        });
        with_parking.grid_rates.insert(NodeId(2), 3);
        with_parking.evs.push(Ev {
            id: EvId(2),
            start: NodeId(0),
            dest: NodeId(0),
            soc: 1,
            capacity: 9,
            give_rate: 2,
        });
        let layout = VariableLayout::new(&with_parking);
        for col in 0..layout.total_cols() {
            let var = layout.var(col);
            let back = match var {
                VarId::X { ev, arc } => layout.col_x(ev, arc),
                VarId::Y { ev, park, t } => layout.col_y(ev, park, t),
                VarId::Z { recv, giver, meet, t } => layout.col_z(recv, giver, meet, t),
                VarId::SlackBattery { ev, t } => layout.col_slack_battery(ev, t),
                VarId::SlackGridLink { ev, park, t } => layout.col_slack_grid_link(ev, park, t),
                VarId::SlackRecvLink { recv, giver, meet, t } => {
                    layout.col_slack_recv_link(recv, giver, meet, t)
                }
                VarId::SlackGiveLink { recv, giver, meet, t } => {
                    layout.col_slack_give_link(recv, giver, meet, t)
                }
                VarId::SlackUnidirectional { lo, hi, meet, t } => {
                    layout.col_slack_unidirectional(lo, hi, meet, t)
                }
                VarId::SlackGiveSimultaneity { ev, t } => layout.col_slack_give_sim(ev, t),
                VarId::SlackRecvSimultaneity { ev, t } => layout.col_slack_recv_sim(ev, t),
            };
            assert_eq!(back, col, "round trip failed at column {col}: {var:?}");
        }
    }

    #[test]
    fn structural_invariants_hold() {
        let instance = build_ip(&q1_reconstruction()).unwrap();
        let layout = &instance.layout;
        let n_cols = instance.matrix.cols as usize;
        let mut appearances = vec![0u32; n_cols];
        let mut slack_rows: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
        let path_rows = layout.n_evs as u64 * layout.n_road_nodes as u64 * layout.horizon as u64;
        let battery_rows = path_rows + layout.n_evs as u64 * (layout.horizon as u64 - 1);
        let mut x_in_path_rows: std::collections::BTreeMap<u32, Vec<i64>> = Default::default();
        for &(r, c, v) in &instance.matrix.triplets {
            appearances[c as usize] += 1;
            let var = layout.var(c as u64);
            let in_battery = (path_rows..battery_rows).contains(&(r as u64));
            match var {
                VarId::X { .. } | VarId::Y { .. } | VarId::Z { .. } => {
                    if !in_battery {
                        assert!(v.abs() == 1, "non-unit coefficient outside battery rows");
                    }
                }
                _ => {
                    assert_eq!(v, 1, "slack coefficient must be +1");
                    slack_rows.entry(c).or_default().push(r);
                }
            }
            if (r as u64) < path_rows {
                if let VarId::X { .. } = var {
                    x_in_path_rows.entry(c).or_default().push(v);
                }
            }
        }
        for (col, &count) in appearances.iter().enumerate() {
            assert!(count >= 1, "column {col} appears in no row");
        }
        for (_, rows) in slack_rows {
            assert_eq!(rows.len(), 1, "slack must live in exactly one row");
        }
        // Every X column sits in exactly two path rows: +1 at head, -1 at tail.
        for ev in 0..layout.n_evs {
            for arc in 0..layout.n_ts_arcs {
                let col = layout.col_x(ev, arc) as u32;
                let mut coeffs = x_in_path_rows.remove(&col).unwrap();
                coeffs.sort();
                assert_eq!(coeffs, vec![-1, 1]);
            }
        }
        // Bounds are consistent.
        for c in 0..n_cols {
            assert!(instance.lower[c] <= instance.upper[c]);
        }
    }

    #[test]
    fn objective_evaluation() {
        let instance = build_ip(&one_ev_two_plain_nodes()).unwrap();
        let zero = vec![0i64; instance.matrix.cols as usize];
        assert_eq!(instance.eval_objective(&zero).unwrap(), 0);
        // Single EV traversing the one arc of energy 5.
        let mut x = zero.clone();
        let travel = instance
            .layout
            .n_road_nodes
            * (instance.layout.horizon - 1); // first travel arc index
        x[instance.layout.col_x(0, travel) as usize] = 1;
        assert_eq!(instance.eval_objective(&x).unwrap(), 5);
        assert!(instance.eval_objective(&[0i64]).is_err());
    }
}
