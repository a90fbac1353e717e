//! The two exact methods must agree: status and optimal objective of the
//! branch-and-bound search equal the brute-force oracle on every tiny
//! instance both can finish.

use v2vc_core::generator::{generate, GeneratorConfig, Topology};
use v2vc_core::ip::build_ip;
use v2vc_core::scenario::Scenario;
use v2vc_core::solver::{brute_force, solve_bb, Budget, BruteForceCaps, SolveStatus};
use v2vc_core::verifier::{verify_algebraic, verify_semantic};

fn tiny_config(seed: u64) -> GeneratorConfig {
    let helpers = 1 + (seed % 2) as u32;
    let needy = (seed % 3 == 0) as u32;
    GeneratorConfig {
        helpers,
        needy,
        nodes: 2 + (seed % 4) as u32,
        horizon: 4 + (seed % 5) as u32,
        topology: if seed % 2 == 0 {
            Topology::Ring
        } else {
            Topology::RandomGeometric { max_degree: 3 }
        },
        arc_energy: (1, 4),
        helper_surplus: (2, 8),
        capacity_slack: (2, 6),
        seed,
        ..Default::default()
    }
}

#[test]
fn branch_and_bound_matches_brute_force_on_tiny_scenarios() {
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 25 {
        seed += 1;
        let Ok(scenario) = generate::<i64>(&tiny_config(seed)) else { continue };
        let caps = BruteForceCaps {
            max_routes_per_ev: 4000,
            max_route_tuples: 60_000,
            max_schedule_nodes: 4_000_000,
        };
        let Ok(oracle) = brute_force(&scenario, caps) else { continue };
        let instance = build_ip(&scenario).unwrap();
        let bb = solve_bb(&instance, Budget::default());
        assert_eq!(bb.status, oracle.status, "seed {seed}");
        assert_eq!(bb.objective, oracle.objective, "seed {seed}");
        if let Some(solution) = &bb.solution {
            assert!(verify_algebraic(&instance, &solution.x).unwrap().accepted(), "seed {seed}");
            assert!(verify_semantic(&scenario, solution).unwrap().accepted(), "seed {seed}");
        }
        checked += 1;
    }
}

#[test]
fn limitation_chain_is_exactly_solvable_with_a_two_action_ev() {
    let scenario: Scenario<i64> = v2vc_core::generator::limitation_scenario();
    let caps = BruteForceCaps::default();
    let oracle = brute_force(&scenario, caps).unwrap();
    assert_eq!(oracle.status, SolveStatus::Optimal);
    assert_eq!(oracle.objective, Some(4));
    let instance = build_ip(&scenario).unwrap();
    let bb = solve_bb(&instance, Budget::default());
    assert_eq!(bb.status, SolveStatus::Optimal);
    assert_eq!(bb.objective, Some(4));
    // EV B (id 1) both receives and gives: two charge actions.
    let solution = bb.solution.unwrap();
    let layout = &instance.layout;
    let mut receives = 0;
    let mut gives = 0;
    for col in 0..layout.binary_count() {
        if solution.x[col as usize] == 1 {
            if let v2vc_core::ip::VarId::Z { recv, giver, .. } = layout.var(col) {
                receives += u32::from(recv == 1);
                gives += u32::from(giver == 1);
            }
        }
    }
    assert_eq!(receives, 3);
    assert_eq!(gives, 1);
}
