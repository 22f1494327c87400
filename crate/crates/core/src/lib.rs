//! Generation-expansion planning under equipment failures and correlated
//! wind: data model, scenario generation, an LP kernel, market clearing and
//! a bilevel investment planner.

pub mod clearing;
pub mod error;
pub mod lp;
pub mod planner;
pub mod scenario;
pub mod system;

pub use clearing::{
    clear_grid, clear_market, expected_discounted_profit, investment_cost, scenario_profit, ClearingGrid,
    ClearingProblem, ClearingResult,
};
pub use error::{Error, Result};
pub use planner::{
    branch_and_bound, build_milp, build_milp_with, enumerate_oracle, evaluate_plan, linearize_binary_continuous,
    linearize_profit_terms, plan_milp, run_correlation_study, run_failure_study, symmetry_classes, BigMReport,
    BnbOptions, Build, CandidateSpace, CellProfit, CorrelationRow, FailureRow, InvestmentPlan, MilpModel, MilpOptions,
    PlanEntry, PlanEvaluation, PlannerResult, StudyOptions, StudyRoute,
};
pub use scenario::{
    combine, decorrelate, enumerate_n_minus_1, enumerate_outages, estimate_correlation, synthesize_correlated_wind,
    wind_power, Scenario, ScenarioSet, WindScenario, WindSet,
};
pub use system::{
    annualized_invest_cost, coarsen_blocks, load_system, load_system_with, save_system, Bus, ConventionalUnit,
    LoadBlock, PowerCurve, StudyConfig, SystemModel, TransmissionLine, WindFarm,
};
