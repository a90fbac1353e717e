//! Solution verification: the algebraic witness check over the assembled
//! program, an independent semantic re-simulation of routes and batteries,
//! and state-of-charge trajectories.
//!
//! The algebraic check is exact integer arithmetic over the sparse rows and
//! runs in time linear in the nonzeros. The semantic check does not trust
//! the matrix at all: it replays each EV's occupancy over time from the X
//! block and recomputes every battery level from scratch.

use thiserror::Error;

use crate::graph::{NodeId, NodeKind, TsArcKind, TsState};
use crate::ip::{IpInstance, Solution};
use crate::plan::{Plan, PlanError};
use crate::scalar::EnergyScalar;
use crate::scenario::{EvId, Scenario};

/// A semantic finding, tagged by what went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    /// The chosen arcs do not form one connected route from (start, 0) to
    /// (dest, T-1).
    BrokenRoute { ev: EvId, detail: String },
    NegativeSoc { ev: EvId, t: u32, level: i64 },
    SocAboveCapacity { ev: EvId, t: u32, level: i64 },
    /// A charge event at a node the EV is not waiting at, or at a node of
    /// the wrong kind.
    ChargingWhileAbsent { ev: EvId, node: NodeId, t: u32 },
    /// More than one giver, more than one receiver, or a two-way transfer
    /// inside a pair in the same step.
    ConcurrentCharge { ev: EvId, t: u32 },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::BrokenRoute { ev, detail } => write!(f, "{ev}: broken route: {detail}"),
            Finding::NegativeSoc { ev, t, level } => {
                write!(f, "{ev}: battery {level} below 0 at t={t}")
            }
            Finding::SocAboveCapacity { ev, t, level } => {
                write!(f, "{ev}: battery {level} above capacity at t={t}")
            }
            Finding::ChargingWhileAbsent { ev, node, t } => {
                write!(f, "{ev}: charge event at {node} t={t} without waiting there")
            }
            Finding::ConcurrentCharge { ev, t } => {
                write!(f, "{ev}: conflicting charge events at t={t}")
            }
        }
    }
}

/// Outcome of either verifier; `accepted` iff every list is empty.
#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    /// (row, lhs, rhs) for every violated equality.
    pub violated_rows: Vec<(u64, i64, i64)>,
    /// (column, value, lower, upper) for every out-of-bounds entry.
    pub bound_violations: Vec<(u64, i64, i64, i64)>,
    pub findings: Vec<Finding>,
}

impl VerificationReport {
    pub fn accepted(&self) -> bool {
        self.violated_rows.is_empty()
            && self.bound_violations.is_empty()
            && self.findings.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("vector length {got} does not match column count {want}")]
    LengthMismatch { got: usize, want: u64 },
    #[error("solution does not decode: {0}")]
    Undecodable(#[from] PlanError),
    #[error(transparent)]
    Ip(#[from] crate::ip::IpError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("solution is not semantically valid for {0}")]
    InvalidForTrajectory(EvId),
}

/// Exact integer check of every row of `A x = b` and every bound.
pub fn verify_algebraic<E: EnergyScalar>(
    instance: &IpInstance<E>,
    x: &[E],
) -> Result<VerificationReport, VerifyError> {
    if x.len() as u64 != instance.matrix.cols {
        return Err(VerifyError::LengthMismatch { got: x.len(), want: instance.matrix.cols });
    }
    let mut lhs = vec![E::zero(); instance.matrix.rows as usize];
    for &(r, c, v) in &instance.matrix.triplets {
        lhs[r as usize] += v * x[c as usize];
    }
    let mut report = VerificationReport::default();
    for (r, (&got, &want)) in lhs.iter().zip(instance.rhs.iter()).enumerate() {
        if got != want {
            report.violated_rows.push((r as u64, got.to_i64(), want.to_i64()));
        }
    }
    for (c, &value) in x.iter().enumerate() {
        if value < instance.lower[c] || value > instance.upper[c] {
            report.bound_violations.push((
                c as u64,
                value.to_i64(),
                instance.lower[c].to_i64(),
                instance.upper[c].to_i64(),
            ));
        }
    }
    Ok(report)
}

/// Where an EV is during [t, t+1]: waiting at a node or on a road arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Occupancy {
    Waiting(usize),
    Traveling,
}

/// Re-simulates a decoded solution against the scenario: route contiguity,
/// endpoints, battery levels under the transfer semantics, co-location of
/// every charge event, and per-step charge exclusivity.
pub fn verify_semantic<E: EnergyScalar>(
    scenario: &Scenario<E>,
    solution: &Solution<E>,
) -> Result<VerificationReport, VerifyError> {
    let layout = crate::ip::VariableLayout::new(scenario);
    let plan = Plan::decode(scenario, &layout, &solution.x)?;
    let ts = scenario.expand()?;
    let horizon = scenario.horizon;
    let n_evs = scenario.evs.len();
    let mut report = VerificationReport::default();

    // Occupancy per EV per step, from the route arcs.
    let mut occupancy: Vec<Vec<Option<Occupancy>>> =
        vec![vec![None; horizon.saturating_sub(1) as usize]; n_evs];
    for (ev, route) in plan.routes.iter().enumerate() {
        let spec = &scenario.evs[ev];
        let mut at = ts.state_index(TsState { node: spec.start, t: 0 })?;
        let mut broken = false;
        for &a in &route.arcs {
            let arc = &ts.arcs[a as usize];
            if arc.tail as usize != at {
                report.findings.push(Finding::BrokenRoute {
                    ev: spec.id,
                    detail: format!(
                        "arc departs {:?}, EV is at {:?}",
                        ts.state_of(arc.tail as usize),
                        ts.state_of(at)
                    ),
                });
                broken = true;
                break;
            }
            let from_t = ts.arc_tail_time(a);
            let to_t = ts.arc_head_time(a);
            for step in from_t..to_t {
                occupancy[ev][step as usize] = Some(match arc.kind {
                    TsArcKind::Waiting => Occupancy::Waiting(arc.tail as usize / horizon as usize),
                    TsArcKind::Travel => Occupancy::Traveling,
                });
            }
            at = arc.head as usize;
        }
        if broken {
            continue;
        }
        let goal = ts.state_index(TsState { node: spec.dest, t: horizon - 1 })?;
        if at != goal {
            report.findings.push(Finding::BrokenRoute {
                ev: spec.id,
                detail: format!("route ends at {:?}, not the destination", ts.state_of(at)),
            });
        }
        if occupancy[ev].iter().any(|o| o.is_none()) {
            report.findings.push(Finding::BrokenRoute {
                ev: spec.id,
                detail: "route leaves idle steps uncovered".into(),
            });
        }
    }
    if !report.findings.is_empty() {
        return Ok(report);
    }

    // Charge events must happen while both sides wait at the right node kind.
    let waits_at = |ev: usize, node: NodeId, t: u32| -> bool {
        let Some(index) = scenario.road.node_index(node) else { return false };
        occupancy[ev][t as usize] == Some(Occupancy::Waiting(index))
    };
    for event in &plan.transfers {
        let kind = scenario.road.node_kind(event.meeting);
        for ev in [event.receiver, event.giver] {
            if kind != Some(NodeKind::Meeting) || !waits_at(ev.0 as usize, event.meeting, event.t) {
                report.findings.push(Finding::ChargingWhileAbsent {
                    ev,
                    node: event.meeting,
                    t: event.t,
                });
            }
        }
    }
    for event in &plan.grid_draws {
        let kind = scenario.road.node_kind(event.parking);
        if kind != Some(NodeKind::Parking) || !waits_at(event.ev.0 as usize, event.parking, event.t)
        {
            report.findings.push(Finding::ChargingWhileAbsent {
                ev: event.ev,
                node: event.parking,
                t: event.t,
            });
        }
    }

    // Per-step exclusivity: one giver, one receiver, no two-way pairs.
    for t in 0..horizon.saturating_sub(1) {
        let at_t: Vec<_> = plan.transfers.iter().filter(|e| e.t == t).collect();
        for ev in 0..n_evs as u32 {
            let gives = at_t.iter().filter(|e| e.giver == EvId(ev)).count();
            let receives = at_t.iter().filter(|e| e.receiver == EvId(ev)).count();
            if gives > 1 || receives > 1 {
                report.findings.push(Finding::ConcurrentCharge { ev: EvId(ev), t });
            }
        }
        for a in &at_t {
            for b in &at_t {
                if a.giver == b.receiver && a.receiver == b.giver && a.giver < a.receiver {
                    report.findings.push(Finding::ConcurrentCharge { ev: a.giver, t });
                }
            }
        }
    }

    // Battery levels, recomputed from scratch at every step.
    let levels = soc_levels(scenario, &plan, &ts)?;
    for (ev, series) in levels.iter().enumerate() {
        let spec = &scenario.evs[ev];
        for (t, &level) in series.iter().enumerate() {
            if level < E::zero() {
                report.findings.push(Finding::NegativeSoc {
                    ev: spec.id,
                    t: t as u32,
                    level: level.to_i64(),
                });
                break;
            }
            if level > spec.capacity {
                report.findings.push(Finding::SocAboveCapacity {
                    ev: spec.id,
                    t: t as u32,
                    level: level.to_i64(),
                });
                break;
            }
        }
    }
    Ok(report)
}

/// Battery level of every EV at every step: the starting charge, minus each
/// traversal at its completion step, plus grid and transfer amounts as their
/// step completes.
fn soc_levels<E: EnergyScalar>(
    scenario: &Scenario<E>,
    plan: &Plan,
    ts: &crate::graph::TimeSpaceNetwork<E>,
) -> Result<Vec<Vec<E>>, VerifyError> {
    let horizon = scenario.horizon as usize;
    let mut delta: Vec<Vec<E>> = vec![vec![E::zero(); horizon]; scenario.evs.len()];
    for (ev, route) in plan.routes.iter().enumerate() {
        for &a in &route.arcs {
            let arc = &ts.arcs[a as usize];
            delta[ev][ts.arc_head_time(a) as usize] -= arc.energy;
        }
    }
    for event in &plan.grid_draws {
        let rate = scenario.grid_rates[&event.parking];
        delta[event.ev.0 as usize][event.t as usize + 1] += rate;
    }
    for event in &plan.transfers {
        let give_rate = scenario.evs[event.giver.0 as usize].give_rate;
        delta[event.receiver.0 as usize][event.t as usize + 1] += give_rate;
        delta[event.giver.0 as usize][event.t as usize + 1] -= give_rate;
    }
    Ok(delta
        .into_iter()
        .enumerate()
        .map(|(ev, deltas)| {
            let mut level = scenario.evs[ev].soc;
            deltas
                .into_iter()
                .enumerate()
                .map(|(t, d)| {
                    if t > 0 {
                        level += d;
                    }
                    level
                })
                .collect()
        })
        .collect())
}

/// State-of-charge series (t, level) for one EV, length T. Only defined for
/// semantically valid solutions.
pub fn soc_trajectory<E: EnergyScalar>(
    scenario: &Scenario<E>,
    solution: &Solution<E>,
    ev: EvId,
) -> Result<Vec<(u32, E)>, VerifyError> {
    let report = verify_semantic(scenario, solution)?;
    if !report.accepted() {
        return Err(VerifyError::InvalidForTrajectory(ev));
    }
    let layout = crate::ip::VariableLayout::new(scenario);
    let plan = Plan::decode(scenario, &layout, &solution.x)?;
    let ts = scenario.expand()?;
    let levels = soc_levels(scenario, &plan, &ts)?;
    Ok(levels[ev.0 as usize]
        .iter()
        .enumerate()
        .map(|(t, &level)| (t as u32, level))
        .collect())
}

/// CSV export of all trajectories, columns `ev,t,soc`.
pub fn trajectories_csv<E: EnergyScalar>(
    scenario: &Scenario<E>,
    solution: &Solution<E>,
) -> Result<String, VerifyError> {
    let mut out = String::from("ev,t,soc\n");
    for ev in 0..scenario.evs.len() as u32 {
        for (t, level) in soc_trajectory(scenario, solution, EvId(ev))? {
            out.push_str(&format!("{ev},{t},{level}\n"));
        }
    }
    Ok(out)
}
