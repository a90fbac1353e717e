//! Complete problem parameterization: the road map, the fleet, grid charging
//! rates, and the horizon, plus validation and the JSON file format.
//!
//! The scenario file is UTF-8 JSON with top-level keys `nodes`, `arcs`,
//! `evs`, `e_p`, and `T`; see `docs/file-formats.md` for the schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, NodeKind, RoadNetwork, TimeSpaceNetwork, TsState};
use crate::scalar::EnergyScalar;

/// Identifier of an EV (dense, 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvId(pub u32);

impl std::fmt::Display for EvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ev{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ev<E> {
    pub id: EvId,
    /// Starting node at t = 0.
    #[serde(rename = "s_i")]
    pub start: NodeId,
    /// Destination node; the EV must be there at t = T-1.
    #[serde(rename = "f_i")]
    pub dest: NodeId,
    /// Starting battery level.
    #[serde(rename = "SOC_i")]
    pub soc: E,
    /// Battery capacity.
    #[serde(rename = "MAXSOC_i")]
    pub capacity: E,
    /// Energy this EV transfers per time step when charging another EV.
    #[serde(rename = "e_i")]
    pub give_rate: E,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario<E> {
    #[serde(flatten)]
    pub road: RoadNetwork<E>,
    pub evs: Vec<Ev<E>>,
    /// Grid charging rate per parking node per time step.
    #[serde(rename = "e_p")]
    pub grid_rates: BTreeMap<NodeId, E>,
    /// Number of time steps; the horizon runs t = 0 .. T-1.
    #[serde(rename = "T")]
    pub horizon: u32,
}

/// A named invariant violation found by [`Scenario::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// What the violation is about, e.g. `evs[3]` or `arcs[0].e_a`.
    pub subject: String,
    /// The rule that failed.
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl<E: EnergyScalar> Scenario<E> {
    /// Returns every violated invariant; an empty list means the scenario is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut ids = std::collections::BTreeSet::new();
        for (i, node) in self.road.nodes.iter().enumerate() {
            if !ids.insert(node.id) {
                out.push(Violation {
                    subject: format!("nodes[{i}]"),
                    rule: format!("node id {} must be unique", node.id),
                });
            }
        }
        for (i, arc) in self.road.arcs.iter().enumerate() {
            for end in [arc.tail, arc.head] {
                if !ids.contains(&end) {
                    out.push(Violation {
                        subject: format!("arcs[{i}]"),
                        rule: format!("endpoint {end} is not a declared node"),
                    });
                }
            }
            if arc.energy < E::zero() {
                out.push(Violation {
                    subject: format!("arcs[{i}].e_a"),
                    rule: "arc energy must be >= 0".into(),
                });
            }
            if arc.duration == 0 {
                out.push(Violation {
                    subject: format!("arcs[{i}].d_a"),
                    rule: "arc duration must be >= 1".into(),
                });
            }
        }
        for (i, ev) in self.evs.iter().enumerate() {
            if ev.soc < E::zero() {
                out.push(Violation {
                    subject: format!("evs[{i}].SOC_i"),
                    rule: format!("{}: SOC must be >= 0", ev.id),
                });
            }
            if ev.soc > ev.capacity {
                out.push(Violation {
                    subject: format!("evs[{i}]"),
                    rule: format!("{}: SOC_i exceeds MAXSOC_i", ev.id),
                });
            }
            if ev.give_rate < E::zero() {
                out.push(Violation {
                    subject: format!("evs[{i}].e_i"),
                    rule: "transfer rate must be >= 0".into(),
                });
            }
            for (field, node) in [("s_i", ev.start), ("f_i", ev.dest)] {
                if !ids.contains(&node) {
                    out.push(Violation {
                        subject: format!("evs[{i}].{field}"),
                        rule: format!("{node} is not a declared node"),
                    });
                }
            }
        }
        for (node, rate) in &self.grid_rates {
            match self.road.node_kind(*node) {
                Some(NodeKind::Parking) => {}
                Some(NodeKind::Meeting) => out.push(Violation {
                    subject: format!("e_p[{node}]"),
                    rule: "P and M must be disjoint: meeting node cannot carry a grid rate".into(),
                }),
                Some(NodeKind::Plain) => out.push(Violation {
                    subject: format!("e_p[{node}]"),
                    rule: "grid rates apply to parking nodes only".into(),
                }),
                None => out.push(Violation {
                    subject: format!("e_p[{node}]"),
                    rule: format!("{node} is not a declared node"),
                }),
            }
            if *rate < E::zero() {
                out.push(Violation {
                    subject: format!("e_p[{node}]"),
                    rule: "grid rate must be >= 0".into(),
                });
            }
        }
        for node in self.road.parking_nodes() {
            if !self.grid_rates.contains_key(&node) {
                out.push(Violation {
                    subject: format!("e_p[{node}]"),
                    rule: "every parking node needs a grid rate".into(),
                });
            }
        }
        if self.evs.iter().any(|ev| ev.start != ev.dest) && self.horizon < 2 {
            out.push(Violation {
                subject: "T".into(),
                rule: "horizon must be >= 2 when any EV has to move".into(),
            });
        }
        out
    }

    /// Validation as a hard error, for call sites that require a clean input.
    pub fn require_valid(&self) -> Result<(), ScenarioError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(ScenarioError::Invalid(listed.join("; ")))
        }
    }

    pub fn ev(&self, id: EvId) -> &Ev<E> {
        &self.evs[id.0 as usize]
    }

    pub fn expand(&self) -> Result<TimeSpaceNetwork<E>, crate::graph::GraphError> {
        TimeSpaceNetwork::expand(&self.road, self.horizon)
    }

    /// True iff the EV reaches its destination unaided within the horizon.
    pub fn can_reach_direct(
        &self,
        ts: &TimeSpaceNetwork<E>,
        id: EvId,
    ) -> Result<bool, crate::graph::GraphError> {
        let ev = self.ev(id);
        crate::graph::can_reach_direct(ts, ev.start, ev.dest, ev.soc)
    }

    /// Per-EV minimum direct cost: energy of the cheapest path from
    /// (start, 0) to (dest, T-1), or `None` when unreachable in time.
    pub fn direct_cost(
        &self,
        ts: &TimeSpaceNetwork<E>,
        id: EvId,
    ) -> Result<Option<E>, crate::graph::GraphError> {
        let ev = self.ev(id);
        let labels = ts.min_energy_forward(TsState { node: ev.start, t: 0 })?;
        Ok(labels.lookup(ts, TsState { node: ev.dest, t: ts.horizon - 1 }))
    }

    pub fn to_json(&self) -> String
    where
        E: Serialize,
    {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError>
    where
        E: serde::de::DeserializeOwned,
    {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{RoadArc, RoadNode};

    fn small_scenario() -> Scenario<i64> {
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

    #[test]
    fn well_formed_scenario_has_no_violations() {
        assert!(small_scenario().validate().is_empty());
    }

    #[test]
    fn soc_above_capacity_names_the_ev() {
        let mut s = small_scenario();
        s.evs[1].soc = 25;
        let violations = s.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("ev1"));
        assert!(violations[0].rule.contains("MAXSOC"));
    }

    #[test]
    fn grid_rate_on_meeting_node_cites_disjointness() {
        let mut s = small_scenario();
        s.grid_rates.insert(NodeId(0), 2);
        let violations = s.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("P and M must be disjoint"));
    }

    #[test]
    fn json_round_trip_is_structural_identity() {
        let s = small_scenario();
        let text = s.to_json();
        let back: Scenario<i64> = Scenario::from_json(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn json_uses_the_documented_keys() {
        let text = small_scenario().to_json();
        for key in ["\"nodes\"", "\"arcs\"", "\"evs\"", "\"e_p\"", "\"T\"", "\"s_i\"", "\"f_i\"", "\"SOC_i\"", "\"MAXSOC_i\"", "\"e_i\"", "\"e_a\"", "\"d_a\""] {
            assert!(text.contains(key), "missing key {key} in {text}");
        }
    }
}
