//! Deterministic scenario generation: benchmark presets, random scenarios
//! for property tests and the bench harness, and the three-EV chain fixture
//! that the one-action heuristic cannot solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, NodeKind, RoadArc, RoadNode, RoadNetwork, TsState};
use crate::scalar::EnergyScalar;
use crate::scenario::{Ev, EvId, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Complete,
    Ring,
    Grid,
    /// Nearest-neighbor geometric graph with a degree bound, patched to be
    /// connected.
    RandomGeometric { max_degree: u32 },
}

/// Knobs of the random generator. Ranges are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub helpers: u32,
    pub needy: u32,
    pub nodes: u32,
    pub horizon: u32,
    /// Fraction of non-parking nodes that become meeting points.
    pub meeting_fraction: f64,
    pub parking_count: u32,
    pub topology: Topology,
    pub arc_energy: (i64, i64),
    pub arc_duration: (u32, u32),
    pub give_rate: (i64, i64),
    pub grid_rate: (i64, i64),
    /// Extra charge a helper carries beyond its cheapest path.
    pub helper_surplus: (i64, i64),
    /// Battery headroom beyond the cheapest path energy.
    pub capacity_slack: (i64, i64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            helpers: 1,
            needy: 1,
            nodes: 4,
            horizon: 10,
            meeting_fraction: 1.0,
            parking_count: 0,
            topology: Topology::RandomGeometric { max_degree: 4 },
            arc_energy: (1, 3),
            arc_duration: (1, 1),
            give_rate: (1, 3),
            grid_rate: (2, 4),
            helper_surplus: (10, 16),
            capacity_slack: (4, 8),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("could not meet the helper/needy split after {0} attempts: {1}")]
    SplitUnsatisfiable(u32, String),
}

const RETRY_BOUND: u32 = 200;

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenerateError> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.meeting_fraction) {
            problems.push("meeting_fraction must be in [0, 1]".to_string());
        }
        if self.nodes == 0 {
            problems.push("need at least one node".to_string());
        }
        if self.horizon < 2 && self.helpers + self.needy > 0 {
            problems.push("horizon must be at least 2".to_string());
        }
        for (name, (lo, hi)) in [
            ("arc_energy", self.arc_energy),
            ("give_rate", self.give_rate),
            ("grid_rate", self.grid_rate),
            ("helper_surplus", self.helper_surplus),
            ("capacity_slack", self.capacity_slack),
        ] {
            if lo > hi || lo < 0 {
                problems.push(format!("{name} range is invalid"));
            }
        }
        if self.arc_duration.0 > self.arc_duration.1 || self.arc_duration.0 == 0 {
            problems.push("arc_duration range is invalid".to_string());
        }
        if self.give_rate.0 == 0 && self.needy > 0 {
            problems.push("needy EVs need a positive transfer rate".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GenerateError::InvalidConfig(problems.join("; ")))
        }
    }
}

fn sample<Rg: Rng>(rng: &mut Rg, range: (i64, i64)) -> i64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

fn build_edges<Rg: Rng>(config: &GeneratorConfig, rng: &mut Rg) -> Vec<(u32, u32)> {
    let n = config.nodes;
    match config.topology {
        Topology::Complete => {
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    edges.push((a, b));
                }
            }
            edges
        }
        Topology::Ring => (0..n).filter(|_| n > 1).map(|a| (a, (a + 1) % n)).collect(),
        Topology::Grid => {
            let width = (n as f64).sqrt().ceil() as u32;
            let mut edges = Vec::new();
            for a in 0..n {
                if (a + 1) % width != 0 && a + 1 < n {
                    edges.push((a, a + 1));
                }
                if a + width < n {
                    edges.push((a, a + width));
                }
            }
            edges
        }
        Topology::RandomGeometric { max_degree } => {
            let points: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let dist = |a: u32, b: u32| {
                let (ax, ay) = points[a as usize];
                let (bx, by) = points[b as usize];
                (ax - bx).powi(2) + (ay - by).powi(2)
            };
            let mut degree = vec![0u32; n as usize];
            let mut edges: Vec<(u32, u32)> = Vec::new();
            for a in 0..n {
                let mut near: Vec<u32> = (0..n).filter(|&b| b != a).collect();
                near.sort_by(|&x, &y| dist(a, x).partial_cmp(&dist(a, y)).unwrap());
                for &b in near.iter().take(2) {
                    let key = (a.min(b), a.max(b));
                    if !edges.contains(&key)
                        && degree[a as usize] < max_degree
                        && degree[b as usize] < max_degree
                    {
                        edges.push(key);
                        degree[a as usize] += 1;
                        degree[b as usize] += 1;
                    }
                }
            }
            // Patch connectivity with shortest cross-component links.
            let mut parent: Vec<u32> = (0..n).collect();
            fn find(parent: &mut [u32], x: u32) -> u32 {
                if parent[x as usize] != x {
                    let root = find(parent, parent[x as usize]);
                    parent[x as usize] = root;
                }
                parent[x as usize]
            }
            for &(a, b) in &edges {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra as usize] = rb;
            }
            loop {
                let mut best: Option<(f64, u32, u32)> = None;
                for a in 0..n {
                    for b in a + 1..n {
                        if find(&mut parent, a) != find(&mut parent, b) {
                            let d = dist(a, b);
                            if best.map_or(true, |(bd, _, _)| d < bd) {
                                best = Some((d, a, b));
                            }
                        }
                    }
                }
                match best {
                    None => break,
                    Some((_, a, b)) => {
                        edges.push((a.min(b), a.max(b)));
                        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                        parent[ra as usize] = rb;
                    }
                }
            }
            edges.sort();
            edges
        }
    }
}

/// Generates a scenario with exactly `helpers` EVs that can reach their
/// destination unaided and exactly `needy` EVs that cannot. Deterministic
/// for a fixed seed.
pub fn generate<E: EnergyScalar>(config: &GeneratorConfig) -> Result<Scenario<E>, GenerateError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.nodes;

    // Topology and arc attributes.
    let edges = build_edges(config, &mut rng);
    let arcs: Vec<RoadArc<E>> = edges
        .iter()
        .map(|&(a, b)| RoadArc {
            tail: NodeId(a),
            head: NodeId(b),
            energy: E::of(sample(&mut rng, config.arc_energy)),
            duration: if config.arc_duration.0 == config.arc_duration.1 {
                config.arc_duration.0
            } else {
                rng.gen_range(config.arc_duration.0..=config.arc_duration.1)
            },
            directed: false,
        })
        .collect();

    // Node kinds: parking first, then a fraction of the rest as meetings.
    let mut kinds = vec![NodeKind::Plain; n as usize];
    let mut order: Vec<u32> = (0..n).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let parking_count = config.parking_count.min(n) as usize;
    for &v in order.iter().take(parking_count) {
        kinds[v as usize] = NodeKind::Parking;
    }
    let remaining = &order[parking_count..];
    let mut meeting_count = (remaining.len() as f64 * config.meeting_fraction).round() as usize;
    if config.needy > 0 && meeting_count == 0 && config.meeting_fraction > 0.0 {
        meeting_count = 1;
    }
    if config.needy > 0 && meeting_count.min(remaining.len()) == 0 {
        return Err(GenerateError::SplitUnsatisfiable(
            0,
            "needy EVs require at least one meeting point".into(),
        ));
    }
    for &v in remaining.iter().take(meeting_count) {
        kinds[v as usize] = NodeKind::Meeting;
    }

    let road = RoadNetwork {
        nodes: (0..n).map(|v| RoadNode { id: NodeId(v), kind: kinds[v as usize] }).collect(),
        arcs,
    };
    let mut grid_rates = std::collections::BTreeMap::new();
    for v in 0..n {
        if kinds[v as usize] == NodeKind::Parking {
            grid_rates.insert(NodeId(v), E::of(sample(&mut rng, config.grid_rate)));
        }
    }
    let ts = crate::graph::TimeSpaceNetwork::expand(&road, config.horizon)
        .map_err(|e| GenerateError::InvalidConfig(e.to_string()))?;

    // EVs: helpers carry their cheapest path plus a surplus, needy ones sit
    // strictly below their cheapest path so pairing is both needed and
    // possible.
    let mut evs: Vec<Ev<E>> = Vec::with_capacity((config.helpers + config.needy) as usize);
    let mut make_ev = |needy: bool, id: u32, rng: &mut ChaCha8Rng| -> Result<Ev<E>, GenerateError> {
        for _ in 0..RETRY_BOUND {
            let start = NodeId(rng.gen_range(0..n));
            let dest = NodeId(rng.gen_range(0..n));
            if start == dest && (needy || n > 1) {
                continue;
            }
            let labels = ts.min_energy_forward(TsState { node: start, t: 0 }).unwrap();
            let Some(cost) = labels.lookup(&ts, TsState { node: dest, t: config.horizon - 1 })
            else {
                continue;
            };
            if needy && cost <= E::zero() {
                continue;
            }
            let slack = E::of(sample(rng, config.capacity_slack));
            let give_rate = E::of(sample(rng, config.give_rate));
            let (soc, capacity) = if needy {
                let deficit = sample(rng, (1, cost.to_i64().min(config.arc_energy.1.max(1))));
                (cost - E::of(deficit), cost + slack)
            } else {
                let surplus = E::of(sample(rng, config.helper_surplus));
                (cost + surplus, cost + surplus + slack)
            };
            return Ok(Ev { id: EvId(id), start, dest, soc, capacity, give_rate });
        }
        Err(GenerateError::SplitUnsatisfiable(
            RETRY_BOUND,
            format!("no placement for {} ev {id}", if needy { "needy" } else { "helper" }),
        ))
    };
    for id in 0..config.helpers {
        evs.push(make_ev(false, id, &mut rng)?);
    }
    for id in 0..config.needy {
        evs.push(make_ev(true, config.helpers + id, &mut rng)?);
    }

    let scenario = Scenario { road, evs, grid_rates, horizon: config.horizon };
    debug_assert!(scenario.validate().is_empty());
    // The split is guaranteed by construction; check it anyway.
    for (i, ev) in scenario.evs.iter().enumerate() {
        let reaches = scenario.can_reach_direct(&ts, ev.id).unwrap();
        let is_helper = (i as u32) < config.helpers;
        debug_assert_eq!(reaches, is_helper, "split violated for ev {i}");
    }
    Ok(scenario)
}

/// The benchmark presets: helper/needy counts, node counts, and horizons of
/// the B1-B11 and Q1-Q6 scenario families. All nodes are meeting points and
/// there are no parking stations; B rows mix arc durations of 1 and 2.
pub fn benchmark_suite() -> Vec<(String, GeneratorConfig)> {
    let rows: [(&str, u32, u32, u32, u32); 17] = [
        ("B1", 1, 1, 20, 40),
        ("B2", 2, 1, 20, 40),
        ("B3", 2, 2, 20, 40),
        ("B4", 4, 2, 20, 40),
        ("B5", 6, 3, 20, 40),
        ("B6", 8, 4, 20, 40),
        ("B7", 10, 5, 20, 40),
        ("B8", 20, 10, 40, 80),
        ("B9", 40, 20, 80, 160),
        ("B10", 60, 30, 120, 240),
        ("B11", 80, 40, 160, 320),
        ("Q1", 1, 1, 2, 10),
        ("Q2", 2, 1, 3, 10),
        ("Q3", 3, 2, 5, 10),
        ("Q4", 4, 2, 6, 10),
        ("Q5", 5, 3, 8, 10),
        ("Q6", 6, 3, 9, 10),
    ];
    rows.iter()
        .map(|&(id, helpers, needy, nodes, horizon)| {
            let config = GeneratorConfig {
                helpers,
                needy,
                nodes,
                horizon,
                arc_duration: if id.starts_with('B') { (1, 2) } else { (1, 1) },
                seed: 1,
                ..Default::default()
            };
            (id.to_string(), config)
        })
        .collect()
}

pub fn preset(id: &str) -> Option<GeneratorConfig> {
    benchmark_suite().into_iter().find(|(name, _)| name == id).map(|(_, c)| c)
}

/// Sizes of the random timing suite: 36 EV counts from 15 to 120, scaled
/// like the B rows (nodes = 4/3 EVs, horizon = 2 nodes).
pub fn random_suite_configs(seed: u64) -> Vec<(String, GeneratorConfig)> {
    (0..36u32)
        .map(|k| {
            let evs = 15 + 3 * k;
            let needy = evs / 3;
            let helpers = evs - needy;
            let nodes = (evs * 4).div_ceil(3);
            let config = GeneratorConfig {
                helpers,
                needy,
                nodes,
                horizon: 2 * nodes,
                arc_duration: (1, 2),
                seed,
                ..Default::default()
            };
            (format!("R{evs}"), config)
        })
        .collect()
}

/// The three-EV chain: A can top up B at the first meeting point, after
/// which B must pass the charge on to C at the second. Solvable exactly
/// (B both receives and gives) but not with one action per EV.
pub fn limitation_scenario<E: EnergyScalar>() -> Scenario<E> {
    let node = |id: u32, kind: NodeKind| RoadNode { id: NodeId(id), kind };
    let edge = |a: u32, b: u32| RoadArc {
        tail: NodeId(a),
        head: NodeId(b),
        energy: E::one(),
        duration: 1,
        directed: false,
    };
    let ev = |id: u32, start: u32, dest: u32, soc: i64| Ev {
        id: EvId(id),
        start: NodeId(start),
        dest: NodeId(dest),
        soc: E::of(soc),
        capacity: E::of(10),
        give_rate: E::one(),
    };
    Scenario {
        road: RoadNetwork {
            nodes: vec![
                node(0, NodeKind::Meeting), // first rendezvous
                node(1, NodeKind::Meeting), // second rendezvous
                node(2, NodeKind::Plain),   // A's destination
                node(3, NodeKind::Plain),   // B's destination
                node(4, NodeKind::Plain),   // C's destination
            ],
            arcs: vec![edge(0, 1), edge(0, 2), edge(1, 3), edge(1, 4)],
        },
        evs: vec![ev(0, 0, 2, 4), ev(1, 0, 3, 0), ev(2, 1, 4, 0)],
        grid_rates: std::collections::BTreeMap::new(),
        horizon: 7,
    }
}
