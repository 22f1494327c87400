use serde::{Deserialize, Serialize};

use super::bnb::BnbOptions;
use super::milp::build_milp;
use super::oracle::{enumerate_oracle, evaluate_plan};
use super::plan::{CandidateSpace, InvestmentPlan};
use super::PlannerResult;
use crate::error::{Error, Result};
use crate::scenario::{combine, decorrelate, enumerate_outages, ScenarioSet, WindSet};
use crate::system::{coarsen_blocks, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyRoute {
    Oracle,
    Milp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub route: StudyRoute,
    /// Merge the load blocks into this many before solving.
    pub blocks: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions { route: StudyRoute::Oracle, blocks: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    /// Candidate marginal cost, $/MWh.
    pub cost: f64,
    pub plan_nf: InvestmentPlan,
    /// Profit of `plan_nf` evaluated with failures, $.
    pub profit_nf: f64,
    pub plan_f: InvestmentPlan,
    pub profit_f: f64,
    /// Relative gain; `None` when `profit_nf <= 0`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub turbines: u32,
    /// Annualized investment cost of all candidate farms, $/yr.
    pub invest_cost: f64,
    pub plan_nc: InvestmentPlan,
    /// Profit of `plan_nc` evaluated on the correlated set, $.
    pub profit_nc: f64,
    pub plan_c: InvestmentPlan,
    pub profit_c: f64,
    pub delta: Option<f64>,
}

fn solve(
    model: &SystemModel,
    scenarios: &ScenarioSet,
    space: &CandidateSpace,
    route: StudyRoute,
) -> Result<PlannerResult> {
    match route {
        StudyRoute::Oracle => enumerate_oracle(model, scenarios, space),
        StudyRoute::Milp => build_milp(model, scenarios, space)?.solve(&BnbOptions::from_config(&model.config)),
    }
}

fn prepared(model: &SystemModel, opts: &StudyOptions) -> SystemModel {
    let mut m = model.clone();
    if let Some(k) = opts.blocks {
        m.load_blocks = coarsen_blocks(&m.load_blocks, k);
    }
    m
}

/// Plan informed by `full`, against a plan informed by `reduced` but scored
/// on `full`. The first can never lose to the second.
fn compare(
    m: &SystemModel,
    reduced: &ScenarioSet,
    full: &ScenarioSet,
    space: &CandidateSpace,
    route: StudyRoute,
) -> Result<(InvestmentPlan, f64, InvestmentPlan, f64, Option<f64>)> {
    let naive = solve(m, reduced, space, route)?;
    let naive_profit = evaluate_plan(m, full, &naive.plan)?.objective;
    let informed = solve(m, full, space, route)?;
    if informed.objective < naive_profit - 1e-6 * (1.0 + naive_profit.abs()) {
        return Err(Error::Solver(format!(
            "informed plan earns {} below the naive plan's {}",
            informed.objective, naive_profit
        )));
    }
    let delta = (naive_profit > 0.0).then(|| (informed.objective - naive_profit) / naive_profit);
    Ok((naive.plan, naive_profit, informed.plan, informed.objective, delta))
}

/// Value of planning with equipment failures, per candidate marginal cost.
///
/// The naive plan is optimal when every device is available; both plans
/// are scored on the outage set with up to `max_outages` failures.
pub fn run_failure_study(
    model: &SystemModel,
    space: &CandidateSpace,
    costs: &[f64],
    opts: &StudyOptions,
) -> Result<Vec<FailureRow>> {
    let mut m = prepared(model, opts);
    let mut rows = Vec::with_capacity(costs.len());
    for &cost in costs {
        for u in m.units.iter_mut().filter(|u| u.is_candidate()) {
            u.marginal_cost = cost;
        }
        m.validate()?;
        let base = ScenarioSet::base(&m);
        let full = enumerate_outages(&m, m.config.max_outages)?;
        let (plan_nf, profit_nf, plan_f, profit_f, delta) = compare(&m, &base, &full, space, opts.route)?;
        rows.push(FailureRow { cost, plan_nf, profit_nf, plan_f, profit_f, delta });
    }
    Ok(rows)
}

/// Value of modelling wind correlation, per candidate farm size.
///
/// The naive plan is optimal on a decorrelated copy of `correlated` with
/// the same per-site values; both plans are scored on `correlated`. Farm
/// investment costs scale with the turbine count. An empty `turbines`
/// keeps the model's farm sizes.
pub fn run_correlation_study(
    model: &SystemModel,
    space: &CandidateSpace,
    correlated: &WindSet,
    turbines: &[u32],
    seed: u64,
    opts: &StudyOptions,
) -> Result<Vec<CorrelationRow>> {
    let mut m = prepared(model, opts);
    let decorrelated = decorrelate(correlated, seed, m.config.decorrelation_threshold)?;
    let avail = ScenarioSet::base(&m);
    let cap = m.config.max_scenarios;
    let c_set = combine(&avail, correlated, cap)?;
    let nc_set = combine(&avail, &decorrelated, cap)?;
    let sizes: Vec<Option<u32>> =
        if turbines.is_empty() { vec![None] } else { turbines.iter().map(|&t| Some(t)).collect() };
    let mut rows = Vec::with_capacity(sizes.len());
    for size in sizes {
        if let Some(nt) = size {
            if nt == 0 {
                return Err(Error::validation("turbine count must be positive"));
            }
            for f in m.wind_farms.iter_mut().filter(|f| f.is_candidate()) {
                f.invest_cost *= nt as f64 / f.n_turbines as f64;
                f.n_turbines = nt;
            }
        }
        m.validate()?;
        let invest_cost = m.wind_farms.iter().filter(|f| f.is_candidate()).map(|f| f.invest_cost).sum();
        let nt = m.wind_farms.iter().find(|f| f.is_candidate()).map_or(0, |f| f.n_turbines);
        let (plan_nc, profit_nc, plan_c, profit_c, delta) = compare(&m, &nc_set, &c_set, space, opts.route)?;
        rows.push(CorrelationRow { turbines: nt, invest_cost, plan_nc, profit_nc, plan_c, profit_c, delta });
    }
    Ok(rows)
}
