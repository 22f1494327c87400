//! Bilevel investment planning: the single-level MILP with its
//! linearizations, a branch-and-bound solver, an exhaustive oracle, and the
//! two study procedures built on them.

mod bnb;
mod milp;
mod oracle;
mod plan;
mod study;

use serde::{Deserialize, Serialize};

pub use bnb::{branch_and_bound, BnbOptions, BnbOutcome};
pub use milp::{
    build_milp, build_milp_with, linearize_binary_continuous, linearize_profit_terms, BlockColumns, MilpModel,
    MilpOptions, Product, ProductKind, RawTerm,
};
pub use oracle::{enumerate_oracle, evaluate_plan, symmetry_classes, PlanEvaluation};
pub use plan::{Build, CandidateSpace, InvestmentPlan, PlanEntry};
pub use study::{run_correlation_study, run_failure_study, CorrelationRow, FailureRow, StudyOptions, StudyRoute};

use crate::error::Result;
use crate::scenario::ScenarioSet;
use crate::system::SystemModel;

/// Price margin `lmp - cost` of one MW; margins inside the LP tolerance
/// are exactly zero.
pub(crate) fn margin(lmp: f64, cost: f64) -> f64 {
    let d = lmp - cost;
    if d.abs() <= 1e-9 * (1.0 + cost.abs()) {
        0.0
    } else {
        d
    }
}

/// Profit of one (scenario, block, year) cell at the reported plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProfit {
    pub s: usize,
    pub b: usize,
    pub y: usize,
    /// Pool profit, $/h.
    pub profit: f64,
    /// `discount * probability * hours`, so `weight * profit` is this
    /// cell's contribution in $.
    pub weight: f64,
}

/// Post-solve check of every linearization bound.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BigMReport {
    /// Active products (binary factor at 1) whose big-M sides were checked.
    pub checked: usize,
    /// Those whose continuous factor sat within 1e-6 of a big-M bound.
    pub at_bound: usize,
    /// Cells re-solved with ten-fold bounds to see whether a bound binds.
    pub recertified_cells: usize,
    /// True when no bound changes the optimum.
    pub ok: bool,
    pub details: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerResult {
    pub method: String,
    pub plan: InvestmentPlan,
    /// Discounted expected profit, $.
    pub objective: f64,
    /// Best proven upper bound, $.
    pub bound: f64,
    pub gap: f64,
    /// Branch-and-bound nodes, or plans evaluated by the oracle.
    pub nodes: usize,
    pub profit_trace: Vec<CellProfit>,
    pub big_m: BigMReport,
    /// Largest `|primal cost - dual objective| / (1 + |primal cost|)` over cells.
    pub max_duality_residual: f64,
    /// Largest gap between linearized and raw `lambda * P` profit, relative
    /// to `1 + |objective|`. Zero for the oracle, which only uses raw terms.
    pub max_linearization_residual: f64,
    pub timed_out: bool,
}

/// Solve the planning problem with the MILP route.
pub fn plan_milp(model: &SystemModel, scenarios: &ScenarioSet, space: &CandidateSpace) -> Result<PlannerResult> {
    let milp = build_milp(model, scenarios, space)?;
    milp.solve(&BnbOptions::from_config(&model.config))
}
