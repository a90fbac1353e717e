//! Exact solving of assembled instances: a branch-and-bound search over the
//! binary decision columns and an independent brute-force oracle used as
//! ground truth in tests.

mod bb;
mod brute;

pub use bb::{solve_bb, Budget};
pub use brute::{brute_force, BruteForceCaps, BruteForceError};

use crate::ip::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Search finished; the reported solution is a certified optimum.
    Optimal,
    /// Search finished; no feasible assignment exists.
    Infeasible,
    /// Search stopped at the budget; the best incumbent, if any, is attached
    /// but not certified.
    BudgetExceeded,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::BudgetExceeded => "budget-exceeded",
        };
        f.write_str(tag)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub nodes_explored: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<E> {
    pub status: SolveStatus,
    pub solution: Option<Solution<E>>,
    pub objective: Option<E>,
    pub stats: SolveStats,
}

impl<E> SolveOutcome<E> {
    pub(crate) fn infeasible(stats: SolveStats) -> Self {
        Self { status: SolveStatus::Infeasible, solution: None, objective: None, stats }
    }
}
